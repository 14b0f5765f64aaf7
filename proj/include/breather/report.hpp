#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "breather/config.hpp"
#include "breather/dual_solver.hpp"
#include "breather/hill.hpp"
#include "breather/reconstruction.hpp"
#include "breather/version.hpp"

namespace breather {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ConfigError("short write to '" + path + "'");
}

// Fitted decay exponent of the mode amplitudes: |u_k| ~ k^{-p}. Large p means a
// smooth (in t) solution; reported as a smoothness proxy alongside the residuals.
inline double coefficient_decay_rate(const std::map<int, double>& masses) {
  std::vector<double> lx, ly;
  double mx = 0;
  for (auto& [k, m] : masses) mx = std::max(mx, m);
  if (mx <= 0) return 0;
  for (auto& [k, m] : masses) {
    if (m > 1e-14 * mx) {
      lx.push_back(std::log(double(k)));
      ly.push_back(std::log(m));
    }
  }
  if (lx.size() < 2) return 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = int(lx.size());
  for (int i = 0; i < n; ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  double den = n * sxx - sx * sx;
  if (den <= 0) return 0;
  return -(n * sxy - sx * sy) / den;
}

// ---- JSON views of the diagnostic structs ----

inline json assumption_to_json(const AssumptionCheck& a) {
  json j;
  j["pass"] = a.pass;
  j["warning"] = a.warning;
  j["witness"] = a.witness;
  if (a.k0 > 0) j["k0"] = a.k0;
  if (!a.note.empty()) j["note"] = a.note;
  return j;
}

inline json assumptions_to_json(const AssumptionReport& r) {
  json j;
  j["a1_sign_weight"] = assumption_to_json(r.a1);
  j["a2_kernel_bound"] = assumption_to_json(r.a2);
  j["a3_weight_positive"] = assumption_to_json(r.a3);
  j["a4_gap_growth"] = assumption_to_json(r.a4);
  j["a5_exponent_balance"] = assumption_to_json(r.a5);
  j["a6_perturbation_margin"] = assumption_to_json(r.a6);
  j["a7_extended_gaps"] = assumption_to_json(r.a7);
  j["a8_split_weight"] = assumption_to_json(r.a8);
  j["suggested_sublattice_m"] = r.suggested_sublattice_m;
  j["all_pass"] = r.all_pass();
  return j;
}

inline json bands_to_json(const BandCertificate& cert) {
  json j;
  json bands = json::array();
  for (auto& b : cert.bands) bands.push_back({b.first, b.second});
  j["bands"] = bands;
  j["touching"] = cert.touching;
  json gaps;
  for (auto& [k, g] : cert.gaps_at) {
    json gj;
    gj["lower"] = g.lower;
    gj["upper"] = g.upper;
    gj["margin"] = g.margin;
    gj["certified"] = g.certified;
    gaps[std::to_string(k)] = gj;
  }
  j["gaps_at"] = gaps;
  j["point_spectrum"] = cert.point_spectrum;
  j["delta"] = cert.delta;
  j["gamma"] = cert.gamma;
  j["gamma_raw"] = cert.gamma_raw;
  j["delta_tilde"] = cert.delta_tilde;
  j["gamma_tilde"] = cert.gamma_tilde;
  j["all_active_certified"] = cert.all_active_certified;
  j["lambda_max"] = cert.lambda_max;
  return j;
}

inline json w1_to_json(const W1Estimate& w) {
  json j;
  j["sigma"] = w.sigma;
  j["converged"] = w.converged;
  j["skipped"] = w.skipped;
  if (w.argmax_k > 0) j["argmax_k"] = w.argmax_k;
  if (!w.note.empty()) j["note"] = w.note;
  return j;
}

inline json maxwell_to_json(const MaxwellReport& m) {
  json j;
  j["faraday_x"] = m.faraday_x;
  j["faraday_y"] = m.faraday_y;
  j["faraday_z"] = m.faraday_z;
  j["ampere_x"] = m.ampere_x;
  j["ampere_y"] = m.ampere_y;
  j["ampere_z"] = m.ampere_z;
  j["div_b"] = m.div_b;
  j["div_d"] = m.div_d;
  j["scale"] = m.scale;
  j["note"] = "ampere_y carries the second-order spatial-stencil error and is "
              "reported as a diagnostic; the remaining rows vanish in exact "
              "arithmetic for this ansatz";
  return j;
}

inline json wave_residual_to_json(const WaveResidualReport& w) {
  json j;
  json rows = json::array();
  for (auto& r : w.rows) {
    json rj;
    rj["k"] = r.k;
    rj["residual_norm"] = r.residual_norm;
    rj["forcing_norm"] = r.forcing_norm;
    rj["rel"] = r.rel;
    rows.push_back(rj);
  }
  j["per_mode"] = rows;
  j["total_rel"] = w.total_rel;
  j["tail_rel"] = w.tail_rel;
  j["stencil_agreement"] = w.stencil_agreement;
  return j;
}

// ---- bands command outputs ----

inline void write_bands_csv(const std::string& path, const BandCertificate& cert,
                            const std::string& hash) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw ConfigError("cannot open '" + path + "' for writing");
  std::fprintf(fp, "# config=%s version=%s\n", hash.c_str(), kVersion);
  std::fprintf(fp, "lambda,discriminant\n");
  for (std::size_t i = 0; i < cert.scan_lambda.size(); ++i)
    std::fprintf(fp, "%.17g,%.17g\n", cert.scan_lambda[i], cert.scan_disc[i]);
  std::fclose(fp);
}

inline void write_bands_outputs(const std::string& dir, const RunConfig& cfg,
                                const BandCertificate& cert, const AssumptionReport& assum,
                                const W1Estimate* w1) {
  ensure_dir(dir);
  std::string hash = config_hash(cfg);
  write_bands_csv(dir + "/bands.csv", cert, hash);
  json j;
  j["config"] = hash;
  j["version"] = kVersion;
  j["format_version"] = kFormatVersion;
  j["certificate"] = bands_to_json(cert);
  j["assumptions"] = assumptions_to_json(assum);
  if (w1) j["w1_norm"] = w1_to_json(*w1);
  write_text_file(dir + "/bands.json", j.dump(2) + "\n");
}

// ---- solve command outputs ----

struct SolveArtifacts {
  const RunConfig* cfg = nullptr;
  const EffectiveOperator* op = nullptr;
  const BandCertificate* cert = nullptr;
  const AssumptionReport* assum = nullptr;
  const MountainPassResult* mp = nullptr;
  const PrimalPair* primal = nullptr;
  double primal_rel = 0;
  const Field* w = nullptr;
  const WaveResidualReport* wave = nullptr;
  const EMFields* em = nullptr;
  const MaxwellReport* maxwell = nullptr;
  const PoyntingReport* poynting = nullptr;
  const W1Estimate* w1 = nullptr;
  bool uncertified = false;
};

inline json solve_report_json(const SolveArtifacts& a) {
  const auto& mp = *a.mp;
  json j;
  j["config"] = config_hash(*a.cfg);
  j["version"] = kVersion;
  j["format_version"] = kFormatVersion;
  j["converged"] = mp.state.converged;
  j["uncertified"] = a.uncertified;
  if (a.cert) j["certificate"] = bands_to_json(*a.cert);
  if (a.assum) j["assumptions"] = assumptions_to_json(*a.assum);

  json lvl;
  lvl["value"] = mp.level;
  lvl["path_level"] = mp.path_level;
  lvl["J_at_critical_point"] = mp.state.J;
  lvl["lower_bound"] = mp.lower_bound;
  lvl["lower_bound_operator_norm"] = mp.lower_bound_l2;
  lvl["rayleigh_sup_estimate"] = mp.B;
  lvl["K_operator_norm"] = mp.K_norm;
  lvl["K_norm_converged"] = mp.K_norm_converged;
  j["level"] = lvl;

  json sol;
  sol["J"] = mp.state.J;
  sol["q43"] = mp.state.q;
  sol["quadratic_form"] = mp.state.b;
  sol["grad_rel"] = mp.state.grad_rel;
  sol["identity_gap"] = mp.state.id_gap;
  sol["method"] = mp.state.method;
  sol["fixed_point_iterations"] = mp.fp_iterations;
  sol["newton_iterations"] = mp.newton_iterations;
  sol["path_sweeps"] = mp.path_sweeps_used;
  sol["newton_hit_floor"] = mp.newton_hit_floor;
  sol["minimal_period"] = mp.min_period;
  json masses;
  for (auto& [k, m] : mp.masses) masses[std::to_string(k)] = m;
  sol["mode_masses"] = masses;
  sol["coefficient_decay_rate"] = coefficient_decay_rate(mp.masses);
  j["solution"] = sol;

  json res;
  res["dual_gradient_rel"] = mp.state.grad_rel;
  res["identity_gap"] = mp.state.id_gap;
  if (a.primal) {
    res["primal_route_gap"] = a.primal->route_gap;
    res["primal_routes_consistent"] = a.primal->consistent;
  }
  res["primal_rel"] = a.primal_rel;
  if (a.wave) {
    res["wave_total_rel"] = a.wave->total_rel;
    res["wave_tail_rel"] = a.wave->tail_rel;
  }
  if (a.maxwell) {
    res["maxwell_worst"] = a.maxwell->worst();
    res["ampere_y_diagnostic"] = a.maxwell->ampere_y;
  }
  j["residuals"] = res;

  if (a.poynting) j["poynting_flux_z"] = a.poynting->flux_z;
  if (a.w1) j["w1_norm"] = w1_to_json(*a.w1);
  return j;
}

inline json solve_residuals_json(const SolveArtifacts& a) {
  json j;
  j["config"] = config_hash(*a.cfg);
  j["version"] = kVersion;
  const auto& st = a.mp->state;
  j["dual"] = {{"grad_rel", st.grad_rel}, {"identity_gap", st.id_gap}, {"J", st.J},
               {"q43", st.q}};
  if (a.primal)
    j["primal"] = {{"route_gap", a.primal->route_gap},
                   {"consistent", a.primal->consistent},
                   {"rel", a.primal_rel}};
  if (a.wave) j["wave"] = wave_residual_to_json(*a.wave);
  if (a.maxwell) j["maxwell"] = maxwell_to_json(*a.maxwell);
  if (a.poynting)
    j["poynting"] = {{"flux_z", a.poynting->flux_z}};
  return j;
}

inline void write_trace_jsonl(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  for (auto& r : trace) {
    json j;
    j["iter"] = r.iter;
    j["J"] = r.J;
    j["grad_norm"] = r.grad_norm;
    j["level"] = r.level;
    out << j.dump() << "\n";
  }
}

inline void write_coef_csv(const std::string& path, const Field& f, const SpaceGrid& grid,
                           const FrequencyLattice& lat, const std::string& hash,
                           const char* name) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw ConfigError("cannot open '" + path + "' for writing");
  write_field_csv(fp, f, grid, lat, hash, kVersion, name);
  std::fclose(fp);
}

// fields.csv: one row per (x, phase) sample of the physical EM fields.
inline void write_fields_csv(const std::string& path, const EMFields& em,
                             const SpaceGrid& grid, const FrequencyLattice& lat,
                             int n_phases, const std::string& hash) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw ConfigError("cannot open '" + path + "' for writing");
  std::fprintf(fp, "# config=%s version=%s T=%.17g n_phases=%d\n", hash.c_str(), kVersion,
               lat.T, n_phases);
  std::fprintf(fp, "x,phase,E_y,B_x,B_z,H_x,H_z,D_y\n");
  std::vector<std::vector<double>> sl(6);
  for (int p = 0; p < n_phases; ++p) {
    double phase = double(p) / n_phases;
    double t = phase * lat.T;
    sl[0] = field_time_slice(em.E_y, lat.omega, t);
    sl[1] = field_time_slice(em.B_x, lat.omega, t);
    sl[2] = field_time_slice(em.B_z, lat.omega, t);
    sl[3] = field_time_slice(em.H_x, lat.omega, t);
    sl[4] = field_time_slice(em.H_z, lat.omega, t);
    sl[5] = field_time_slice(em.D_y, lat.omega, t);
    for (int i = 0; i < grid.n_points; ++i)
      std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", grid.x[i],
                   phase, sl[0][i], sl[1][i], sl[2][i], sl[3][i], sl[4][i], sl[5][i]);
  }
  std::fclose(fp);
}

// plotdata.csv: w(x, phase) samples for heatmap rendering.
inline void write_plotdata_csv(const std::string& path, const Field& w,
                               const SpaceGrid& grid, const FrequencyLattice& lat,
                               int n_phases, const std::string& hash) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw ConfigError("cannot open '" + path + "' for writing");
  std::fprintf(fp, "# config=%s version=%s T=%.17g n_phases=%d\n", hash.c_str(), kVersion,
               lat.T, n_phases);
  std::fprintf(fp, "x,phase,w\n");
  for (int p = 0; p < n_phases; ++p) {
    double phase = double(p) / n_phases;
    std::vector<double> s = field_time_slice(w, lat.omega, phase * lat.T);
    for (int i = 0; i < grid.n_points; ++i)
      std::fprintf(fp, "%.17g,%.17g,%.17g\n", grid.x[i], phase, s[i]);
  }
  std::fclose(fp);
}

inline void write_solve_outputs(const std::string& dir, const SolveArtifacts& a) {
  ensure_dir(dir);
  const RunConfig& cfg = *a.cfg;
  std::string hash = config_hash(cfg);
  write_text_file(dir + "/report.json", solve_report_json(a).dump(2) + "\n");
  write_text_file(dir + "/residuals.json", solve_residuals_json(a).dump(2) + "\n");
  if (cfg.output.trace) write_trace_jsonl(dir + "/trace.jsonl", a.mp->trace);
  const auto& op = *a.op;
  write_coef_csv(dir + "/v.csv", a.mp->state.v, op.grid, op.lat, hash, "v");
  write_coef_csv(dir + "/u.csv", a.mp->state.u, op.grid, op.lat, hash, "u");
  if (a.w) write_coef_csv(dir + "/w.csv", *a.w, op.grid, op.lat, hash, "w");
  if (a.em && cfg.output.fields)
    write_fields_csv(dir + "/fields.csv", *a.em, op.grid, op.lat, cfg.output.n_phases,
                     hash);
  if (a.w && cfg.output.plotdata)
    write_plotdata_csv(dir + "/plotdata.csv", *a.w, op.grid, op.lat, cfg.output.n_phases,
                       hash);
}

// ---- coefficient CSV reader (verify command) ----

struct StoredField {
  Field f;
  double T = 0, omega = 0;
  int k_max = 0;
  double x_min = 0, x_max = 0;
  int n_points = 0;
  std::string name, config, version;
};

namespace detail {
inline std::map<std::string, std::string> parse_header_kv(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    auto eq = tok.find('=');
    if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}
}  // namespace detail

inline StoredField read_field_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open coefficient file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("# field=", 0) != 0)
    throw ConfigError("coefficient file '" + path + "': missing metadata header");
  StoredField sf;
  auto kv = detail::parse_header_kv(line.substr(2));
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end())
      throw ConfigError("coefficient file '" + path + "': header lacks '" +
                        std::string(key) + "'");
    return it->second;
  };
  sf.name = need("field");
  sf.T = std::stod(need("T"));
  sf.omega = std::stod(need("omega"));
  sf.k_max = std::stoi(need("k_max"));
  sf.x_min = std::stod(need("x_min"));
  sf.x_max = std::stod(need("x_max"));
  sf.n_points = std::stoi(need("n_points"));
  sf.config = need("config");
  sf.version = need("version");
  if (!std::getline(in, line) || line != "x,k,re,im")
    throw ConfigError("coefficient file '" + path + "': expected column header x,k,re,im");

  std::vector<int> ks;
  std::vector<double> re, im;
  int nx_seen = 0;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    double x, r, i;
    int k;
    if (std::sscanf(line.c_str(), "%lg,%d,%lg,%lg", &x, &k, &r, &i) != 4)
      throw ConfigError("coefficient file '" + path + "': malformed row " +
                        std::to_string(row));
    if (ks.empty() || ks.back() != k) {
      if (!ks.empty() && nx_seen != sf.n_points)
        throw ConfigError("coefficient file '" + path + "': mode k=" +
                          std::to_string(ks.back()) + " has " + std::to_string(nx_seen) +
                          " rows, expected " + std::to_string(sf.n_points));
      for (int prev : ks)
        if (prev == k)
          throw ConfigError("coefficient file '" + path + "': mode k=" +
                            std::to_string(k) + " appears twice");
      ks.push_back(k);
      nx_seen = 0;
    }
    re.push_back(r);
    im.push_back(i);
    ++nx_seen;
  }
  if (ks.empty()) throw ConfigError("coefficient file '" + path + "': no data rows");
  if (nx_seen != sf.n_points)
    throw ConfigError("coefficient file '" + path + "': truncated last mode block");
  sf.f = make_field(ks, sf.n_points);
  sf.f.re = std::move(re);
  sf.f.im = std::move(im);
  return sf;
}

}  // namespace breather
