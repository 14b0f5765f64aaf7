#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "breather/kernels.hpp"
#include "breather/linalg.hpp"

namespace breather {

// ---- Floquet discriminant for -phi'' = lambda V phi, V piecewise constant ----

namespace detail {
// 2x2 propagator over one piece; for s -> 0 it degenerates to a shear.
inline std::array<double, 4> piece_matrix(double lambda, double v, double len) {
  double s2 = lambda * v;
  if (s2 <= 0) return {1.0, len, 0.0, 1.0};
  double s = std::sqrt(s2), ph = s * len;
  double cp = std::cos(ph), sp = std::sin(ph);
  return {cp, sp / s, -s * sp, cp};
}

inline std::array<double, 4> mat_mul(const std::array<double, 4>& a,
                                     const std::array<double, 4>& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
          a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}
}  // namespace detail

// Monodromy matrix over one period cell (pieces already carry V values).
inline std::array<double, 4> monodromy(const std::vector<std::pair<double, double>>& vpieces,
                                       double lambda) {
  if (lambda < 0) throw UsageError("discriminant: lambda must be >= 0 (L is nonnegative)");
  std::array<double, 4> M = {1, 0, 0, 1};
  for (const auto& [len, v] : vpieces) M = detail::mat_mul(detail::piece_matrix(lambda, v, len), M);
  return M;
}

inline double discriminant_cell(const std::vector<std::pair<double, double>>& vpieces,
                                double lambda) {
  auto M = monodromy(vpieces, lambda);
  return M[0] + M[3];
}

inline double discriminant(const StepWeight& w, double lambda) {
  if (w.halfspace)
    throw UsageError("discriminant: half-space weight has two cells; use the per-side form");
  return discriminant_cell(StepWeight::v_pieces(w.cell, w.baseline), lambda);
}

// ---- band structure ----

struct GapInfo {
  double lower = 0, upper = 0, margin = 0;
  bool certified = false;
};

struct BandCertificate {
  std::vector<std::pair<double, double>> bands;  // closed, increasing
  std::vector<double> touching;                  // zero-width gap locations
  std::map<int, GapInfo> gaps_at;
  std::vector<double> point_spectrum;
  double delta = 0, gamma = 1, delta_tilde = 0, gamma_tilde = 1;
  double gamma_raw = 0;  // uncapped log-log margin fit over active k
  bool all_active_certified = false;
  double lambda_max = 0;
  std::vector<double> scan_lambda, scan_disc;  // for bands.csv
};

namespace detail {

struct EdgeScan {
  std::vector<double> edges;     // |Delta| = 2 crossings (includes touching points)
  std::vector<double> touching;  // subset: interior tangencies
};

inline EdgeScan scan_edges(const std::vector<std::pair<double, double>>& vpieces,
                           double lambda_max, int resolution) {
  EdgeScan out;
  auto f = [&](double lam) { return std::abs(discriminant_cell(vpieces, lam)) - 2.0; };
  std::vector<double> lam(resolution), fv(resolution);
  for (int i = 0; i < resolution; ++i) {
    lam[i] = lambda_max * i / (resolution - 1);
    fv[i] = f(lam[i]);
  }
  if (std::abs(fv[0]) <= 1e-9) out.edges.push_back(0.0);
  for (int i = 0; i + 1 < resolution; ++i) {
    if (fv[i] == 0.0 && i > 0) {
      out.edges.push_back(lam[i]);
      continue;
    }
    if (fv[i] * fv[i + 1] < 0) {
      double a = lam[i], b = lam[i + 1];
      for (int it = 0; it < 200 && b - a > 1e-10; ++it) {
        double m2 = 0.5 * (a + b);
        if (f(a) * f(m2) <= 0)
          b = m2;
        else
          a = m2;
      }
      out.edges.push_back(0.5 * (a + b));
    }
  }
  // interior tangencies: |Delta| touches 2 without crossing (zero-width gap)
  for (int i = 1; i + 1 < resolution; ++i) {
    if (fv[i] >= -1e-6 && fv[i] < 0 && fv[i] >= fv[i - 1] && fv[i] >= fv[i + 1]) {
      double a = lam[i - 1], b = lam[i + 1];
      for (int it = 0; it < 120 && b - a > 1e-11; ++it) {
        double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
        if (f(m1) < f(m2))
          a = m1;
        else
          b = m2;
      }
      double lt = 0.5 * (a + b);
      if (f(lt) >= -1e-8) {
        bool dup = false;
        for (double e : out.edges) dup = dup || std::abs(e - lt) < 1e-7 * (1 + lt);
        if (!dup) {
          out.edges.push_back(lt);
          out.touching.push_back(lt);
        }
      }
    }
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

inline std::vector<std::pair<double, double>> bands_from_edges(
    const std::vector<std::pair<double, double>>& vpieces, const EdgeScan& es,
    double lambda_max) {
  auto f = [&](double lam) { return std::abs(discriminant_cell(vpieces, lam)) - 2.0; };
  std::vector<double> pts = es.edges;
  if (pts.empty() || pts.front() > 1e-12) pts.insert(pts.begin(), 0.0);
  if (pts.back() < lambda_max - 1e-12) pts.push_back(lambda_max);
  std::vector<std::pair<double, double>> bands;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double mid = 0.5 * (pts[i] + pts[i + 1]);
    if (f(mid) <= 0) bands.emplace_back(pts[i], pts[i + 1]);
  }
  return bands;
}

inline std::vector<std::pair<double, double>> merge_bands(
    std::vector<std::pair<double, double>> a,
    const std::vector<std::pair<double, double>>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  std::vector<std::pair<double, double>> out;
  for (auto& iv : a) {
    if (!out.empty() && iv.first <= out.back().second + 1e-12)
      out.back().second = std::max(out.back().second, iv.second);
    else
      out.push_back(iv);
  }
  return out;
}

}  // namespace detail

// Band edges by scan-and-bisect; self-validates by re-running at doubled
// resolution (matching edge counts), refining up to 8x before giving up.
inline BandCertificate compute_bands(const StepWeight& w, double lambda_max,
                                     int resolution = 200001) {
  if (!(lambda_max > 0)) throw ConfigError("compute_bands: lambda_max must be positive");
  if (resolution < 1000) resolution = 1000;
  BandCertificate cert;
  cert.lambda_max = lambda_max;

  std::vector<std::vector<std::pair<double, double>>> cells;
  if (w.halfspace) {
    cells.push_back(StepWeight::v_pieces(w.left, w.baseline));
    cells.push_back(StepWeight::v_pieces(w.right, w.baseline));
  } else {
    cells.push_back(StepWeight::v_pieces(w.cell, w.baseline));
  }

  std::vector<std::pair<double, double>> merged;
  for (auto& vp : cells) {
    detail::EdgeScan es;
    bool ok = false;
    for (int res = resolution, tries = 0; tries < 4; ++tries, res *= 2) {
      es = detail::scan_edges(vp, lambda_max, res);
      auto check = detail::scan_edges(vp, lambda_max, res * 2 + 1);
      if (es.edges.size() == check.edges.size()) {
        ok = true;
        break;
      }
    }
    if (!ok)
      throw CertificationError(
          "compute_bands: band edges failed to stabilize under scan refinement on "
          "[0, " + std::to_string(lambda_max) + "]; structure too fine for the scan");
    auto bands = detail::bands_from_edges(vp, es, lambda_max);
    merged = merged.empty() ? bands : detail::merge_bands(merged, bands);
    cert.touching.insert(cert.touching.end(), es.touching.begin(), es.touching.end());
  }
  cert.bands = merged;

  // scan trace for bands.csv (first cell for periodic; union plotted per side
  // would need two files, so the primary cell is recorded)
  auto& vp0 = cells[0];
  int plot_n = std::min(resolution, 20001);
  cert.scan_lambda.resize(plot_n);
  cert.scan_disc.resize(plot_n);
  for (int i = 0; i < plot_n; ++i) {
    cert.scan_lambda[i] = lambda_max * i / (plot_n - 1);
    cert.scan_disc[i] = discriminant_cell(vp0, cert.scan_lambda[i]);
  }
  return cert;
}

// Gap lookup for one spectral point.
inline GapInfo locate_gap(const std::vector<std::pair<double, double>>& bands, double pt) {
  GapInfo g;
  double below = 0, above = std::numeric_limits<double>::infinity();
  for (auto& [lo, hi] : bands) {
    if (pt >= lo && pt <= hi) return g;  // inside a band: uncertified
    if (hi < pt) below = std::max(below, hi);
    if (lo > pt) above = std::min(above, lo);
  }
  g.lower = below;
  g.upper = above;
  g.margin = std::min(pt - below, above - pt);
  g.certified = g.margin > 0;
  return g;
}

// Records per-k margins at omega^2 k^2 and fits delta, gamma. With
// tilde=true the range extends to all odd k <= 3 k_max (the non-resonant
// inversion range); per-k failure is recorded, not fatal.
inline void certify_gaps(BandCertificate& cert, const FrequencyLattice& lat, bool tilde) {
  std::vector<int> ks;
  if (tilde) {
    for (int k = 1; k <= 3 * lat.k_max; k += 2) ks.push_back(k);
  } else {
    ks = lat.active;
  }
  double w2 = lat.omega * lat.omega;
  for (int k : ks) {
    double pt = w2 * k * k;
    if (pt > cert.lambda_max)
      throw UsageError("certify_gaps: bands not computed past omega^2 k^2 for k=" +
                       std::to_string(k));
    cert.gaps_at[k] = locate_gap(cert.bands, pt);
  }
  // fits over the certified subset of the requested range
  auto fit = [&](const std::vector<int>& kk, double& delta_out, double& gamma_out,
                 double* raw_out) {
    std::vector<double> lk, lm;
    for (int k : kk) {
      auto& g = cert.gaps_at[k];
      if (g.certified) {
        lk.push_back(std::log(double(k)));
        lm.push_back(std::log(g.margin));
      }
    }
    double raw = 1.0;
    if (lk.size() >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < lk.size(); ++i) {
        sx += lk[i];
        sy += lm[i];
        sxx += lk[i] * lk[i];
        sxy += lk[i] * lm[i];
      }
      double n = double(lk.size());
      raw = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    if (raw_out) *raw_out = raw;
    gamma_out = std::min(1.0, raw);
    double dmin = std::numeric_limits<double>::infinity();
    for (int k : kk) {
      auto& g = cert.gaps_at[k];
      if (g.certified) dmin = std::min(dmin, g.margin / std::pow(double(k), gamma_out));
    }
    delta_out = std::isfinite(dmin) ? dmin : 0.0;
  };
  if (tilde) {
    fit(ks, cert.delta_tilde, cert.gamma_tilde, nullptr);
  } else {
    fit(ks, cert.delta, cert.gamma, &cert.gamma_raw);
    cert.all_active_certified = true;
    for (int k : lat.active)
      cert.all_active_certified = cert.all_active_certified && cert.gaps_at[k].certified;
  }
}

// Dirichlet-truncation point spectrum: generalized eigenproblem
// (-second difference) psi = lambda V psi on interior nodes, restricted to
// the given gap windows; eigenvectors must decay from peak to boundary by
// the threshold factor or they are discarded as truncation artifacts.
inline std::vector<double> point_spectrum_estimate(
    const std::vector<double>& V, const SpaceGrid& grid,
    const std::vector<std::pair<double, double>>& gap_windows, double decay_factor = 1e3) {
  int ni = grid.n_points - 2;
  if (ni < 3) return {};
  std::vector<double> diag(ni), off(ni - 1);
  double idx2 = 1.0 / (grid.dx * grid.dx);
  for (int i = 0; i < ni; ++i) diag[i] = 2.0 * idx2 / V[i + 1];
  for (int i = 0; i + 1 < ni; ++i) off[i] = -idx2 / std::sqrt(V[i + 1] * V[i + 2]);
  std::vector<double> found;
  for (auto& [lo, hi] : gap_windows) {
    if (!(hi > lo)) continue;
    for (double lam : tridiag_eigs_in(diag, off, lo, hi)) {
      std::vector<double> z = tridiag_eigvec(diag, off, lam);
      double peak = 0, boundary = 0;
      for (double v : z) peak = std::max(peak, std::abs(v));
      int bw = std::min(3, ni);
      for (int i = 0; i < bw; ++i) {
        boundary = std::max(boundary, std::abs(z[i]));
        boundary = std::max(boundary, std::abs(z[ni - 1 - i]));
      }
      if (peak >= decay_factor * boundary) found.push_back(lam);
    }
  }
  std::sort(found.begin(), found.end());
  return found;
}

// ---- assumption verification (certificates for (A1)-(A8)) ----

struct AssumptionCheck {
  bool pass = false;
  bool warning = false;
  double witness = 0;
  int k0 = 0;  // threshold frequency when the bound only holds for k >= k0
  std::string note;
};

struct AssumptionReport {
  AssumptionCheck a1, a2, a3, a4, a5, a6, a7, a8;
  int suggested_sublattice_m = 1;
  bool all_pass() const {
    return a1.pass && a2.pass && a3.pass && a4.pass && a5.pass && a6.pass && a7.pass &&
           a8.pass;
  }
};

inline AssumptionReport verify_assumptions(const KernelCoefficients& kc,
                                           const AssumptionParams& ap,
                                           const BandCertificate& bc,
                                           const std::vector<double>& V,
                                           const FrequencyLattice& lat,
                                           const NonlinearWeight* h = nullptr) {
  AssumptionReport rep;

  // (A1) h positive (sign handled by the negated-problem transform)
  if (h) {
    double mn = *std::min_element(h->h.begin(), h->h.end());
    rep.a1.pass = mn > 0;
    rep.a1.witness = mn;
    rep.a1.note = h->sign < 0 ? "negative-h variant (transformed problem)" : "";
  } else {
    rep.a1.pass = true;
    rep.a1.note = "h not supplied; positivity enforced at construction";
  }

  // (A2) |n_hat_k| <= C |k|^{-alpha}: report the empirical best constant
  double C2 = 0;
  for (auto& [k, v] : kc.n_hat)
    if (k >= 1) C2 = std::max(C2, std::abs(v) * std::pow(double(k), kc.alpha));
  rep.a2.pass = std::isfinite(C2);
  rep.a2.witness = C2;

  // (A3) V strictly positive
  double vmin = *std::min_element(V.begin(), V.end());
  rep.a3.pass = vmin > 0;
  rep.a3.witness = vmin;

  // (A4) gaps about omega^2 k^2 for active k, margin >= delta |k|^gamma
  rep.a4.pass = bc.all_active_certified && bc.delta > 0;
  rep.a4.witness = bc.delta;

  // (A5) alpha + gamma - 2 > beta
  double lhs = kc.alpha + bc.gamma - 2.0;
  rep.a5.pass = lhs > ap.beta;
  rep.a5.witness = lhs;

  // (A6) |Ghat_k(x)| <= d / (omega^2 |k|^{2-gamma}) V(x): smallest admissible
  // d over the active range; threshold k0 when it only holds for large k
  double w2 = lat.omega * lat.omega;
  double gv = 0;  // max_x |g1(x)| / V(x)
  if (!kc.g1_profile.empty())
    for (std::size_t i = 0; i < V.size(); ++i)
      gv = std::max(gv, std::abs(kc.g1_profile[i]) / V[i]);
  auto d_of_k = [&](int k, double gamma) {
    auto it = kc.g_factor.find(k);
    double gf = it == kc.g_factor.end() ? 0.0 : std::abs(it->second);
    return gf * gv * w2 * std::pow(double(k), 2.0 - gamma);
  };
  double d_active = 0;
  for (int k : lat.active) d_active = std::max(d_active, d_of_k(k, bc.gamma));
  rep.a6.witness = d_active;
  rep.a6.pass = d_active < bc.delta || gv == 0;
  if (!rep.a6.pass) {
    // bound may still hold from some k0 on
    for (int k0 = lat.active.front(); k0 <= 3 * lat.k_max; k0 += 2) {
      double dk = 0;
      for (int k : lat.active)
        if (k >= k0) dk = std::max(dk, d_of_k(k, bc.gamma));
      if (dk < bc.delta && dk > 0) {
        rep.a6.k0 = k0;
        rep.a6.warning = true;
        rep.a6.note = "holds only for k >= " + std::to_string(k0) +
                      "; consider sublattice restriction";
        rep.suggested_sublattice_m = std::max(rep.suggested_sublattice_m, k0 | 1);
        break;
      }
    }
  }

  // (A7) |n_hat_k| >= c |k|^{-s} on the active set plus tilde-gap
  // certificates on all odd k <= 3 k_max with d_tilde < delta_tilde
  double c7 = std::numeric_limits<double>::infinity();
  for (int k : lat.active) {
    double v = std::abs(kc.nhat(k));
    if (v == 0) c7 = 0;
    else c7 = std::min(c7, v * std::pow(double(k), kc.s_lower));
  }
  bool tilde_ok = true;
  double d_tilde = 0;
  for (int k = 1; k <= 3 * lat.k_max; k += 2) {
    auto it = bc.gaps_at.find(k);
    tilde_ok = tilde_ok && it != bc.gaps_at.end() && it->second.certified;
    d_tilde = std::max(d_tilde, d_of_k(k, bc.gamma_tilde));
  }
  rep.a7.witness = std::isfinite(c7) ? c7 : 0.0;
  rep.a7.pass = c7 > 0 && tilde_ok && (d_tilde < bc.delta_tilde || gv == 0);
  if (!tilde_ok) rep.a7.note = "tilde gap certification incomplete on odd k <= 3 k_max";

  // (A8) geometry of h: either pure decay or periodic + localized split
  if (h && h->has_split()) {
    bool perpos = true;
    for (double v : h->h_per) perpos = perpos && v > 0;
    rep.a8.pass = perpos;
    rep.a8.note = perpos ? "h = h_per + h_loc split valid"
                         : "h_per must be strictly positive";
  } else {
    rep.a8.pass = true;
    rep.a8.note = "no split declared; treated as localized-or-periodic whole";
  }

  return rep;
}

}  // namespace breather
