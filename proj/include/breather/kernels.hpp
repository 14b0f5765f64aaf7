#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "breather/grid.hpp"
#include "breather/util.hpp"

namespace breather {

// ---- memory-kernel Fourier coefficients (periodized, Haar time measure) ----

// Triangular kernel nu(t) = dist(t, TZ) on [0,T]: coefficients of its
// periodization.
inline double nu_hat_triangular(double T, int k) {
  if (k == 0) return T * T / 4.0;
  if (k % 2 == 0) return 0.0;
  double kk = static_cast<double>(k);
  return -T * T / (2.0 * kk * kk * std::numbers::pi * std::numbers::pi);
}

// Frequency factor of the cos|cos| kernel: Ghat_k(x) = g1per(x) * factor(k),
// k = 2n+1. Even k have zero coefficient.
inline double g_hat_cosabs(double T, int k) {
  int ka = std::abs(k);
  if (ka % 2 == 0) return 0.0;
  int n = (ka - 1) / 2;
  double kk = static_cast<double>(ka);
  double sgn = (n % 2 == 0) ? 1.0 : -1.0;
  return 4.0 * T * sgn / ((4.0 * kk - kk * kk * kk) * std::numbers::pi);
}

// Composite Simpson on [0, L] with n panels (n even) for tabulated kernels.
inline double simpson(const std::function<double(double)>& f, double L, int n = 2048) {
  if (n % 2 != 0) ++n;
  double h = L / n, s = f(0.0) + f(L);
  for (int i = 1; i < n; ++i) s += f(h * i) * ((i % 2) ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Coefficient of the periodization of a kernel supported on [0,T]:
// integral of kernel(t) e^{-i w k t} dt; evenness makes it real, and the
// imaginary part is returned for diagnostics.
inline double kernel_coefficient_tabulated(const std::function<double(double)>& kernel,
                                           double T, int k, int panels = 2048,
                                           double* imag_part = nullptr) {
  double w = 2.0 * std::numbers::pi / T;
  double re = simpson([&](double t) { return kernel(t) * std::cos(w * k * t); }, T, panels);
  if (imag_part)
    *imag_part =
        -simpson([&](double t) { return kernel(t) * std::sin(w * k * t); }, T, panels);
  return re;
}

// ---- piecewise-constant weight V(x) ----

struct StepWeight {
  struct Cell {
    std::vector<std::pair<double, double>> pieces;  // (length, value before baseline)
    double period = 0;
  };
  bool halfspace = false;
  Cell cell;         // periodic mode
  Cell left, right;  // half-space mode (left of / right of x = 0)
  double baseline = 0;
  double phase_check = 0;  // designed quarter-wave phase, recorded by builders

  // piece list with baseline folded in (these are the V values)
  static std::vector<std::pair<double, double>> v_pieces(const Cell& c, double baseline) {
    auto out = c.pieces;
    for (auto& p : out) p.second += baseline;
    return out;
  }

  double cell_value(const Cell& c, double x) const {
    double fx = x - std::floor(x / c.period) * c.period;
    const double eps = 1e-9;
    // jump nodes get the mean of the side limits
    double cum = 0;
    for (std::size_t i = 0; i < c.pieces.size(); ++i) {
      double lo = cum, hi = cum + c.pieces[i].first;
      cum = hi;
      if (std::abs(fx - lo) < eps) {
        double prev = (i == 0) ? c.pieces.back().second : c.pieces[i - 1].second;
        return baseline + 0.5 * (prev + c.pieces[i].second);
      }
      if (std::abs(fx - hi) < eps) {
        double next = (i + 1 == c.pieces.size()) ? c.pieces.front().second
                                                 : c.pieces[i + 1].second;
        return baseline + 0.5 * (c.pieces[i].second + next);
      }
      if (fx > lo && fx < hi) return baseline + c.pieces[i].second;
    }
    return baseline + c.pieces.back().second;
  }

  double value(double x) const {
    if (!halfspace) return cell_value(cell, x);
    const double eps = 1e-9;
    if (std::abs(x) < eps) {
      // junction: mean of the side limits
      return 0.5 * (cell_value(left, -eps * 10) + cell_value(right, eps * 10));
    }
    return x < 0 ? cell_value(left, x) : cell_value(right, x);
  }

  std::vector<double> sample(const SpaceGrid& grid) const {
    std::vector<double> out(grid.n_points);
    for (int i = 0; i < grid.n_points; ++i) out[i] = value(grid.x[i]);
    double mn = *std::min_element(out.begin(), out.end());
    if (!(mn > 0))
      throw ConfigError("step weight: sampled V must be strictly positive (min=" +
                        std::to_string(mn) + ")");
    return out;
  }
};

inline StepWeight::Cell quarter_wave_cell(double T, double theta, double X) {
  double V1 = T * T / (16.0 * theta * theta * X * X);
  double V2 = T * T / (16.0 * (1.0 - theta) * (1.0 - theta) * X * X);
  StepWeight::Cell c;
  c.period = X;
  c.pieces = {{theta * X, V1}, {(1.0 - theta) * X, V2}};
  return c;
}

// Periodic two-step weight with the designed phases sqrt(V1)*thetaX = T/4.
// The baseline 1 - 1/c^2 and the g0 steps are folded so the pieces carry V
// directly; c only fixes the traveling speed elsewhere.
inline StepWeight step_weight_thm12(double T, double c, double theta, double X) {
  if (!(T > 0 && X > 0 && c > 0)) throw ConfigError("step weight: T, X, c must be positive");
  if (!(theta > 0 && theta < 1) || theta == 0.5)
    throw ConfigError("step weight: theta must lie in (0,1) and differ from 1/2 "
                      "(no spectral gap opens at theta = 1/2)");
  StepWeight w;
  w.cell = quarter_wave_cell(T, theta, X);
  w.baseline = 0.0;
  w.phase_check = std::sqrt(w.cell.pieces[0].second) * theta * X;  // = T/4 by design
  return w;
}

// Half-space weight: independent quarter-wave cells left and right of x = 0.
inline StepWeight step_weight_halfspace(double T, double c, double theta_minus,
                                        double X_minus, double theta_plus,
                                        double X_plus) {
  if (!(theta_minus > 0 && theta_minus < 0.5 && theta_plus > 0 && theta_plus < 0.5))
    throw ConfigError("half-space weight: theta- and theta+ must lie in (0, 1/2)");
  if (!(T > 0 && X_minus > 0 && X_plus > 0 && c > 0))
    throw ConfigError("half-space weight: T, X-, X+, c must be positive");
  StepWeight w;
  w.halfspace = true;
  w.left = quarter_wave_cell(T, theta_minus, X_minus);
  w.right = quarter_wave_cell(T, theta_plus, X_plus);
  w.baseline = 0.0;
  w.phase_check = std::sqrt(w.left.pieces[0].second) * theta_minus * X_minus;
  return w;
}

// User-specified steps: raw g0 pieces plus baseline 1 - 1/c^2.
inline StepWeight step_weight_custom(std::vector<std::pair<double, double>> pieces,
                                     double period, double c) {
  if (pieces.empty()) throw ConfigError("step weight: need at least one piece");
  double sum = 0;
  for (auto& p : pieces) {
    if (!(p.first > 0)) throw ConfigError("step weight: piece lengths must be positive");
    sum += p.first;
  }
  if (std::abs(sum - period) > 1e-12 * std::max(1.0, period))
    throw ConfigError("step weight: piece lengths must sum to the period");
  StepWeight w;
  w.cell.pieces = std::move(pieces);
  w.cell.period = period;
  w.baseline = 1.0 - 1.0 / (c * c);
  for (auto& p : w.cell.pieces)
    if (!(w.baseline + p.second > 0))
      throw ConfigError("step weight: V = baseline + g0 must be strictly positive");
  return w;
}

// ---- kernel coefficient table ----

struct KernelCoefficients {
  std::map<int, double> n_hat;     // includes k = 0 and all odd k up to 3 k_max
  std::map<int, double> g_factor;  // gamma_k for odd k (0 when no g1 kernel)
  std::vector<double> g1_profile;  // g1per sampled on the grid (empty: no g1)
  double alpha = 2.0;              // decay exponent of |n_hat|
  double s_lower = 2.0;            // growth exponent of 1/|n_hat|

  double ghat(int k, int ix) const {
    if (g1_profile.empty()) return 0.0;
    auto it = g_factor.find(std::abs(k));
    return it == g_factor.end() ? 0.0 : it->second * g1_profile[ix];
  }
  double nhat(int k) const {
    auto it = n_hat.find(std::abs(k));
    return it == n_hat.end() ? 0.0 : it->second;
  }
};

inline KernelCoefficients kernel_coefficients_analytic(double T, int k_extent,
                                                       std::vector<double> g1_profile) {
  KernelCoefficients kc;
  kc.n_hat[0] = nu_hat_triangular(T, 0);
  for (int k = 1; k <= k_extent; k += 2) {
    kc.n_hat[k] = nu_hat_triangular(T, k);
    kc.g_factor[k] = g_hat_cosabs(T, k);
  }
  kc.g1_profile = std::move(g1_profile);
  kc.alpha = 2.0;
  kc.s_lower = 2.0;
  return kc;
}

inline KernelCoefficients kernel_coefficients_tabulated(
    const std::function<double(double)>& nu, const std::function<double(double)>& gt,
    double T, int k_extent, std::vector<double> g1_profile, int panels = 2048) {
  KernelCoefficients kc;
  kc.n_hat[0] = kernel_coefficient_tabulated(nu, T, 0, panels);
  for (int k = 1; k <= k_extent; k += 2) {
    double im = 0;
    kc.n_hat[k] = kernel_coefficient_tabulated(nu, T, k, panels, &im);
    if (std::abs(im) > 1e-8 * std::max(1.0, std::abs(kc.n_hat[k])))
      throw ConfigError("tabulated nu kernel is not even: imaginary coefficient at k=" +
                        std::to_string(k));
    kc.g_factor[k] = gt ? kernel_coefficient_tabulated(gt, T, k, panels) : 0.0;
  }
  kc.g1_profile = std::move(g1_profile);
  // empirical decay fit (log-log regression over odd k)
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (auto& [k, v] : kc.n_hat) {
    if (k < 1 || std::abs(v) < 1e-300) continue;
    double lx = std::log(double(k)), ly = std::log(std::abs(v));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n >= 2) {
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    kc.alpha = -slope;
    kc.s_lower = -slope;
  }
  return kc;
}

// ---- cubic nonlinearity weight ----

struct NonlinearWeight {
  std::vector<double> h;  // magnitudes, strictly positive
  int sign = +1;
  std::vector<double> h_per, h_loc;  // optional split, h = h_per + h_loc
  bool has_split() const { return !h_per.empty(); }
};

inline NonlinearWeight make_nonlinear_weight(std::vector<double> h, int sign,
                                             std::vector<double> h_per = {},
                                             std::vector<double> h_loc = {}) {
  if (sign != 1 && sign != -1) throw ConfigError("nonlinear weight: sign must be +1 or -1");
  for (double v : h)
    if (!(v > 0))
      throw ConfigError("nonlinear weight: h must be strictly positive everywhere "
                        "(use sign=-1 for the negative-h variant)");
  NonlinearWeight w;
  w.h = std::move(h);
  w.sign = sign;
  if (!h_per.empty() || !h_loc.empty()) {
    if (h_per.size() != w.h.size() || h_loc.size() != w.h.size())
      throw ConfigError("nonlinear weight: split parts must match the grid");
    for (std::size_t i = 0; i < w.h.size(); ++i) {
      if (h_loc[i] < 0) throw ConfigError("nonlinear weight: h_loc must be >= 0");
      if (std::abs(h_per[i] + h_loc[i] - w.h[i]) > 1e-12 * std::max(1.0, w.h[i]))
        throw ConfigError("nonlinear weight: h_per + h_loc must equal h");
    }
    w.h_per = std::move(h_per);
    w.h_loc = std::move(h_loc);
  }
  return w;
}

// ---- declared assumption exponents ----

struct AssumptionParams {
  double alpha = 2.0, beta = 0.5, gamma = 1.0, delta = 0.0, d = 0.0;
  double gamma_tilde = 1.0, delta_tilde = 0.0, d_tilde = 0.0;
  double s_lower = 2.0;

  void validate() const {
    if (!(alpha > 1)) throw ConfigError("assumptions: alpha must be > 1");
    if (!(beta >= 0.5 && beta < 2)) throw ConfigError("assumptions: beta must be in [1/2, 2)");
    if (!(gamma <= 1)) throw ConfigError("assumptions: gamma must be <= 1");
  }
};

}  // namespace breather
