#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "breather/dual_solver.hpp"
#include "breather/grid.hpp"
#include "breather/kernels.hpp"
#include "breather/util.hpp"
#include "breather/version.hpp"

namespace breather {

using nlohmann::json;

struct HConfig {
  std::string kind = "constant";  // constant | gaussian | split
  double value = 1.0;             // constant value or gaussian amplitude
  double width = 1.0;
  double center = 0.0;
  double floor = 0.0;   // gaussian offset (keeps h strictly positive)
  double h_per = 0.0;   // split: constant periodic part
  int sign = 1;
};

struct MaterialConfig {
  std::string kind = "step-thm12";  // step-thm12 | halfspace-thm13 | custom-steps
  std::string nu_kernel = "triangular-nu";
  std::string g1_kernel = "cosabs-g1";  // cosabs-g1 | none
  double T = 2.0 * M_PI;
  double c = 1.0;
  double theta = 0.25, X = 1.0;                                      // periodic cell
  double theta_minus = 0.25, X_minus = 1.0;                          // half-space, x < 0
  double theta_plus = 1.0 / 3.0, X_plus = 1.2;                       // half-space, x > 0
  std::vector<std::pair<double, double>> steps;                      // custom: (len, g0)
  double period = 0.0;                                               // custom cell period
  double g1_scale = 0.0;
  HConfig h;
  int polarization = 1;
};

struct DiscretizationConfig {
  double x_min = -9.375, x_max = 10.625;
  int n_points = 2401;
  int k_max = 9;
  int sublattice_m = 1;
  int oversampling = 8;
};

struct SolverConfig {
  double tol_grad = 1e-6, tol_id = 1e-6;
  double wave_tol_abs = 1e-6;  // wave tolerance: max(wave_tol_abs, wave_tol_dx2 * dx^2)
  double wave_tol_dx2 = 1.0;
  int path_nodes = 21;
  int max_path_sweeps = 200;
  int max_fp_iterations = 2000;
  int max_newton_iterations = 25;
  double tau = 0.5;
  std::uint64_t seed = 12345;
};

struct OutputConfig {
  std::string directory = "out";
  bool fields = true, plotdata = true, trace = true;
  int n_phases = 33;
  bool w1_norm = false;
  bool w1_allow_large = false;
};

struct RunConfig {
  MaterialConfig material;
  DiscretizationConfig discretization;
  SolverConfig solver;
  OutputConfig output;
};

// ---- parsing ----

namespace detail {
template <class T>
T get_or(const json& j, const char* key, T dflt) {
  if (!j.contains(key)) return dflt;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

inline void reject_odd_keys(const json& j, std::initializer_list<const char*> known,
                            const char* block) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok)
      throw ConfigError(std::string("config: unknown key '") + it.key() + "' in " + block);
  }
}
}  // namespace detail

inline RunConfig parse_config(const json& j) {
  RunConfig c;
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  detail::reject_odd_keys(j, {"material", "discretization", "solver", "output"}, "config");

  if (j.contains("material")) {
    const json& m = j.at("material");
    detail::reject_odd_keys(m,
                            {"kind", "nu_kernel", "g1_kernel", "T", "c", "theta", "X",
                             "theta_minus", "X_minus", "theta_plus", "X_plus", "steps",
                             "period", "g1_scale", "h", "polarization"},
                            "material");
    auto& mc = c.material;
    mc.kind = detail::get_or<std::string>(m, "kind", mc.kind);
    mc.nu_kernel = detail::get_or<std::string>(m, "nu_kernel", mc.nu_kernel);
    mc.g1_kernel = detail::get_or<std::string>(m, "g1_kernel", mc.g1_kernel);
    mc.T = detail::get_or(m, "T", mc.T);
    mc.c = detail::get_or(m, "c", mc.c);
    mc.theta = detail::get_or(m, "theta", mc.theta);
    mc.X = detail::get_or(m, "X", mc.X);
    mc.theta_minus = detail::get_or(m, "theta_minus", mc.theta_minus);
    mc.X_minus = detail::get_or(m, "X_minus", mc.X_minus);
    mc.theta_plus = detail::get_or(m, "theta_plus", mc.theta_plus);
    mc.X_plus = detail::get_or(m, "X_plus", mc.X_plus);
    mc.g1_scale = detail::get_or(m, "g1_scale", mc.g1_scale);
    mc.polarization = detail::get_or(m, "polarization", mc.polarization);
    mc.period = detail::get_or(m, "period", mc.period);
    if (m.contains("steps")) {
      for (const auto& s : m.at("steps")) {
        if (!s.is_array() || s.size() != 2)
          throw ConfigError("config: material.steps entries must be [length, g0] pairs");
        mc.steps.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
      }
    }
    if (m.contains("h")) {
      const json& h = m.at("h");
      detail::reject_odd_keys(
          h, {"kind", "value", "width", "center", "floor", "h_per", "sign"}, "material.h");
      mc.h.kind = detail::get_or<std::string>(h, "kind", mc.h.kind);
      mc.h.value = detail::get_or(h, "value", mc.h.value);
      mc.h.width = detail::get_or(h, "width", mc.h.width);
      mc.h.center = detail::get_or(h, "center", mc.h.center);
      mc.h.floor = detail::get_or(h, "floor", mc.h.floor);
      mc.h.h_per = detail::get_or(h, "h_per", mc.h.h_per);
      mc.h.sign = detail::get_or(h, "sign", mc.h.sign);
    }
  }
  if (j.contains("discretization")) {
    const json& d = j.at("discretization");
    detail::reject_odd_keys(
        d, {"x_min", "x_max", "n_points", "k_max", "sublattice_m", "oversampling"},
        "discretization");
    auto& dc = c.discretization;
    dc.x_min = detail::get_or(d, "x_min", dc.x_min);
    dc.x_max = detail::get_or(d, "x_max", dc.x_max);
    dc.n_points = detail::get_or(d, "n_points", dc.n_points);
    dc.k_max = detail::get_or(d, "k_max", dc.k_max);
    dc.sublattice_m = detail::get_or(d, "sublattice_m", dc.sublattice_m);
    dc.oversampling = detail::get_or(d, "oversampling", dc.oversampling);
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    detail::reject_odd_keys(s,
                            {"tol_grad", "tol_id", "wave_tol_abs", "wave_tol_dx2",
                             "path_nodes", "max_path_sweeps", "max_fp_iterations",
                             "max_newton_iterations", "tau", "seed"},
                            "solver");
    auto& sc = c.solver;
    sc.tol_grad = detail::get_or(s, "tol_grad", sc.tol_grad);
    sc.tol_id = detail::get_or(s, "tol_id", sc.tol_id);
    sc.wave_tol_abs = detail::get_or(s, "wave_tol_abs", sc.wave_tol_abs);
    sc.wave_tol_dx2 = detail::get_or(s, "wave_tol_dx2", sc.wave_tol_dx2);
    sc.path_nodes = detail::get_or(s, "path_nodes", sc.path_nodes);
    sc.max_path_sweeps = detail::get_or(s, "max_path_sweeps", sc.max_path_sweeps);
    sc.max_fp_iterations = detail::get_or(s, "max_fp_iterations", sc.max_fp_iterations);
    sc.max_newton_iterations =
        detail::get_or(s, "max_newton_iterations", sc.max_newton_iterations);
    sc.tau = detail::get_or(s, "tau", sc.tau);
    sc.seed = detail::get_or<std::uint64_t>(s, "seed", sc.seed);
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    detail::reject_odd_keys(o,
                            {"directory", "fields", "plotdata", "trace", "n_phases",
                             "w1_norm", "w1_allow_large"},
                            "output");
    auto& oc = c.output;
    oc.directory = detail::get_or<std::string>(o, "directory", oc.directory);
    oc.fields = detail::get_or(o, "fields", oc.fields);
    oc.plotdata = detail::get_or(o, "plotdata", oc.plotdata);
    oc.trace = detail::get_or(o, "trace", oc.trace);
    oc.n_phases = detail::get_or(o, "n_phases", oc.n_phases);
    oc.w1_norm = detail::get_or(o, "w1_norm", oc.w1_norm);
    oc.w1_allow_large = detail::get_or(o, "w1_allow_large", oc.w1_allow_large);
  }
  return c;
}

inline void validate_config(const RunConfig& c) {
  const auto& m = c.material;
  if (m.kind != "step-thm12" && m.kind != "halfspace-thm13" && m.kind != "custom-steps")
    throw ConfigError("config: material.kind must be step-thm12, halfspace-thm13, or "
                      "custom-steps (got '" + m.kind + "')");
  if (m.nu_kernel != "triangular-nu")
    throw ConfigError("config: material.nu_kernel must be triangular-nu");
  if (m.g1_kernel != "cosabs-g1" && m.g1_kernel != "none")
    throw ConfigError("config: material.g1_kernel must be cosabs-g1 or none");
  if (!(m.T > 0) || !(m.c > 0)) throw ConfigError("config: T and c must be positive");
  if (m.kind == "step-thm12") {
    if (!(m.theta > 0 && m.theta < 1))
      throw ConfigError("config: theta must lie strictly inside (0,1)");
    if (m.theta == 0.5)
      throw ConfigError("config: theta = 1/2 gives a gapless weight (equal quarter-wave "
                        "phases); choose theta != 1/2");
    if (!(m.X > 0)) throw ConfigError("config: X must be positive");
  } else if (m.kind == "halfspace-thm13") {
    if (!(m.theta_minus > 0 && m.theta_minus < 0.5 && m.theta_plus > 0 &&
          m.theta_plus < 0.5))
      throw ConfigError("config: half-space thetas must lie strictly inside (0, 1/2)");
    if (!(m.X_minus > 0 && m.X_plus > 0))
      throw ConfigError("config: half-space cell lengths must be positive");
  } else {
    if (m.steps.empty()) throw ConfigError("config: custom-steps needs a steps array");
    if (!(m.period > 0)) throw ConfigError("config: custom-steps needs a positive period");
  }
  if (m.polarization != 1 && m.polarization != 2)
    throw ConfigError("config: polarization must be 1 or 2");
  if (m.h.sign != 1 && m.h.sign != -1)
    throw ConfigError("config: h.sign must be +1 or -1");
  if (m.h.kind != "constant" && m.h.kind != "gaussian" && m.h.kind != "split")
    throw ConfigError("config: h.kind must be constant, gaussian, or split");
  if (!(m.h.value > 0))
    throw ConfigError("config: h.value must be positive (use h.sign = -1 for the "
                      "defocusing variant)");
  if (m.h.kind == "gaussian" && !(m.h.width > 0))
    throw ConfigError("config: h.width must be positive");
  if (m.h.kind == "gaussian" && m.h.floor < 0)
    throw ConfigError("config: h.floor must be nonnegative");
  if (m.h.kind == "split" && !(m.h.h_per > 0))
    throw ConfigError("config: split h needs a strictly positive periodic part h_per");
  if (m.g1_scale < 0) throw ConfigError("config: g1_scale must be nonnegative");

  const auto& d = c.discretization;
  if (!(d.x_max > d.x_min)) throw ConfigError("config: x_max must exceed x_min");
  if (d.n_points < 16) throw ConfigError("config: n_points must be at least 16");
  if (d.k_max < 1 || d.k_max % 2 == 0)
    throw ConfigError("config: k_max must be a positive odd integer");
  if (d.sublattice_m < 1 || d.sublattice_m % 2 == 0)
    throw ConfigError("config: sublattice_m must be a positive odd integer");
  if (d.sublattice_m > d.k_max)
    throw ConfigError("config: sublattice_m exceeds k_max (empty frequency set)");
  if (d.oversampling < 6)
    throw ConfigError("config: oversampling must be at least 6 (alias-free cubes)");

  const auto& s = c.solver;
  if (!(s.tol_grad > 0 && s.tol_id > 0 && s.wave_tol_abs > 0 && s.wave_tol_dx2 >= 0))
    throw ConfigError("config: tolerances must be positive");
  if (s.path_nodes < 5) throw ConfigError("config: path_nodes must be at least 5");
  if (!(s.tau > 0 && s.tau <= 1)) throw ConfigError("config: tau must lie in (0, 1]");
  if (c.output.n_phases < 1) throw ConfigError("config: n_phases must be positive");
}

// ---- serialization (canonical form; keys sorted by the JSON library) ----

inline json serialize_config(const RunConfig& c) {
  json m;
  m["kind"] = c.material.kind;
  m["nu_kernel"] = c.material.nu_kernel;
  m["g1_kernel"] = c.material.g1_kernel;
  m["T"] = c.material.T;
  m["c"] = c.material.c;
  if (c.material.kind == "step-thm12") {
    m["theta"] = c.material.theta;
    m["X"] = c.material.X;
  } else if (c.material.kind == "halfspace-thm13") {
    m["theta_minus"] = c.material.theta_minus;
    m["X_minus"] = c.material.X_minus;
    m["theta_plus"] = c.material.theta_plus;
    m["X_plus"] = c.material.X_plus;
  } else {
    json st = json::array();
    for (auto& p : c.material.steps) st.push_back({p.first, p.second});
    m["steps"] = st;
    m["period"] = c.material.period;
  }
  m["g1_scale"] = c.material.g1_scale;
  json h;
  h["kind"] = c.material.h.kind;
  h["value"] = c.material.h.value;
  if (c.material.h.kind == "gaussian" || c.material.h.kind == "split") {
    h["width"] = c.material.h.width;
    h["center"] = c.material.h.center;
  }
  if (c.material.h.kind == "gaussian") h["floor"] = c.material.h.floor;
  if (c.material.h.kind == "split") h["h_per"] = c.material.h.h_per;
  h["sign"] = c.material.h.sign;
  m["h"] = h;
  m["polarization"] = c.material.polarization;

  json d;
  d["x_min"] = c.discretization.x_min;
  d["x_max"] = c.discretization.x_max;
  d["n_points"] = c.discretization.n_points;
  d["k_max"] = c.discretization.k_max;
  d["sublattice_m"] = c.discretization.sublattice_m;
  d["oversampling"] = c.discretization.oversampling;

  json s;
  s["tol_grad"] = c.solver.tol_grad;
  s["tol_id"] = c.solver.tol_id;
  s["wave_tol_abs"] = c.solver.wave_tol_abs;
  s["wave_tol_dx2"] = c.solver.wave_tol_dx2;
  s["path_nodes"] = c.solver.path_nodes;
  s["max_path_sweeps"] = c.solver.max_path_sweeps;
  s["max_fp_iterations"] = c.solver.max_fp_iterations;
  s["max_newton_iterations"] = c.solver.max_newton_iterations;
  s["tau"] = c.solver.tau;
  s["seed"] = c.solver.seed;

  json o;
  o["directory"] = c.output.directory;
  o["fields"] = c.output.fields;
  o["plotdata"] = c.output.plotdata;
  o["trace"] = c.output.trace;
  o["n_phases"] = c.output.n_phases;
  o["w1_norm"] = c.output.w1_norm;
  o["w1_allow_large"] = c.output.w1_allow_large;

  return json{{"material", m}, {"discretization", d}, {"solver", s}, {"output", o}};
}

inline std::string config_hash(const RunConfig& c) {
  return hex64(fnv1a64(serialize_config(c).dump()));
}

// ---- builders: config -> numerical objects ----

inline StepWeight make_step_weight(const MaterialConfig& m) {
  if (m.kind == "step-thm12") return step_weight_thm12(m.T, m.c, m.theta, m.X);
  if (m.kind == "halfspace-thm13")
    return step_weight_halfspace(m.T, m.c, m.theta_minus, m.X_minus, m.theta_plus,
                                 m.X_plus);
  return step_weight_custom(m.steps, m.period, m.c);
}

inline NonlinearWeight make_h_weight(const MaterialConfig& m, const SpaceGrid& grid) {
  std::vector<double> h(grid.n_points), per, loc;
  if (m.h.kind == "constant") {
    std::fill(h.begin(), h.end(), m.h.value);
  } else if (m.h.kind == "gaussian") {
    for (int i = 0; i < grid.n_points; ++i) {
      double r = (grid.x[i] - m.h.center) / m.h.width;
      h[i] = m.h.floor + m.h.value * std::exp(-r * r);
    }
  } else {  // split
    per.assign(grid.n_points, m.h.h_per);
    loc.resize(grid.n_points);
    for (int i = 0; i < grid.n_points; ++i) {
      double r = (grid.x[i] - m.h.center) / m.h.width;
      loc[i] = m.h.value * std::exp(-r * r);
      h[i] = per[i] + loc[i];
    }
  }
  return make_nonlinear_weight(h, m.h.sign, per, loc);
}

inline KernelCoefficients make_kernel_coefficients(const MaterialConfig& m,
                                                   const SpaceGrid& grid, int k_extent) {
  std::vector<double> g1_profile;
  if (m.g1_kernel == "cosabs-g1" && m.g1_scale > 0)
    g1_profile.assign(grid.n_points, m.g1_scale);
  return kernel_coefficients_analytic(m.T, k_extent, g1_profile);
}

inline SolverParams make_solver_params(const RunConfig& c) {
  SolverParams p;
  p.tol_grad = c.solver.tol_grad;
  p.tol_id = c.solver.tol_id;
  p.path_nodes = c.solver.path_nodes;
  p.path_sweeps = c.solver.max_path_sweeps;
  p.fp_max_iter = c.solver.max_fp_iterations;
  p.newton_max = c.solver.max_newton_iterations;
  p.tau = c.solver.tau;
  p.seed = c.solver.seed;
  p.n_t = c.discretization.oversampling * c.discretization.k_max + 1;
  return p;
}

}  // namespace breather
