#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "breather/util.hpp"

namespace breather {

// Uniform grid on [x_min, x_max], nodes include both endpoints.
// Trapezoid quadrature weights in wq.
struct SpaceGrid {
  double x_min = 0, x_max = 0, dx = 0;
  int n_points = 0;
  std::vector<double> x, wq;
};

inline SpaceGrid make_grid(double x_min, double x_max, int n_points) {
  if (n_points < 3) throw ConfigError("grid: n_points must be >= 3");
  if (!(x_min < x_max)) throw ConfigError("grid: x_min must be < x_max");
  SpaceGrid g;
  g.x_min = x_min;
  g.x_max = x_max;
  g.n_points = n_points;
  g.dx = (x_max - x_min) / (n_points - 1);
  g.x.resize(n_points);
  g.wq.assign(n_points, g.dx);
  for (int i = 0; i < n_points; ++i) g.x[i] = x_min + g.dx * i;
  g.wq.front() = g.wq.back() = 0.5 * g.dx;
  return g;
}

// Odd-frequency lattice. active holds the solver frequencies (odd multiples
// of m up to k_max); ext extends to 3*k_max and carries cubes of active
// fields exactly.
struct FrequencyLattice {
  double T = 0, omega = 0;
  int k_max = 1, m = 1;
  std::vector<int> active, ext;
  int n_active() const { return static_cast<int>(active.size()); }
};

inline FrequencyLattice make_lattice(double T, int k_max, int m = 1) {
  if (!(T > 0)) throw ConfigError("lattice: period T must be positive");
  if (k_max < 1 || k_max % 2 == 0) throw ConfigError("lattice: k_max must be odd and >= 1");
  if (m < 1 || m % 2 == 0) throw ConfigError("lattice: sublattice_m must be odd and >= 1");
  FrequencyLattice lat;
  lat.T = T;
  lat.omega = 2.0 * std::numbers::pi / T;
  lat.k_max = k_max;
  lat.m = m;
  for (int k = 1; k <= 3 * k_max; k += 2) {
    if (k % m != 0) continue;
    lat.ext.push_back(k);
    if (k <= k_max) lat.active.push_back(k);
  }
  if (lat.active.empty())
    throw ConfigError("lattice: sublattice m=" + std::to_string(m) +
                      " has no frequencies <= k_max=" + std::to_string(k_max));
  return lat;
}

// Space-time field as complex Fourier coefficients on the carried odd
// frequencies; negative k implied by conjugation, so the synthesized signal
// w(x,t) = sum_k 2[re_k(x) cos(k w t) - im_k(x) sin(k w t)] is real.
struct Field {
  std::vector<int> ks;
  int nx = 0;
  std::vector<double> re, im;

  int nk() const { return static_cast<int>(ks.size()); }
  double& cre(int ik, int ix) { return re[std::size_t(ik) * nx + ix]; }
  double& cim(int ik, int ix) { return im[std::size_t(ik) * nx + ix]; }
  double cre(int ik, int ix) const { return re[std::size_t(ik) * nx + ix]; }
  double cim(int ik, int ix) const { return im[std::size_t(ik) * nx + ix]; }
  void zero() {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
  }
};

inline Field make_field(std::vector<int> ks, int nx) {
  Field f;
  f.ks = std::move(ks);
  f.nx = nx;
  f.re.assign(f.ks.size() * std::size_t(nx), 0.0);
  f.im.assign(f.ks.size() * std::size_t(nx), 0.0);
  return f;
}

inline void check_same_shape(const Field& a, const Field& b, const char* what) {
  if (a.nx != b.nx || a.ks != b.ks)
    throw UsageError(std::string(what) + ": fields have mismatched grid or lattice");
}

inline void axpy(Field& y, double a, const Field& x) {
  check_same_shape(y, x, "axpy");
  for (std::size_t i = 0; i < y.re.size(); ++i) {
    y.re[i] += a * x.re[i];
    y.im[i] += a * x.im[i];
  }
}

inline void scal(Field& f, double a) {
  for (std::size_t i = 0; i < f.re.size(); ++i) {
    f.re[i] *= a;
    f.im[i] *= a;
  }
}

inline Field lincomb(double a, const Field& x, double b, const Field& y) {
  check_same_shape(x, y, "lincomb");
  Field out = x;
  for (std::size_t i = 0; i < out.re.size(); ++i) {
    out.re[i] = a * x.re[i] + b * y.re[i];
    out.im[i] = a * x.im[i] + b * y.im[i];
  }
  return out;
}

// Embed a field carried on a subset of frequencies into a larger lattice.
inline Field embed(const Field& f, const std::vector<int>& ks_out) {
  Field out = make_field(ks_out, f.nx);
  for (int ik = 0; ik < f.nk(); ++ik) {
    auto it = std::find(ks_out.begin(), ks_out.end(), f.ks[ik]);
    if (it == ks_out.end()) throw UsageError("embed: target lattice misses a frequency");
    int jk = static_cast<int>(it - ks_out.begin());
    std::copy(f.re.begin() + std::size_t(ik) * f.nx, f.re.begin() + std::size_t(ik + 1) * f.nx,
              out.re.begin() + std::size_t(jk) * f.nx);
    std::copy(f.im.begin() + std::size_t(ik) * f.nx, f.im.begin() + std::size_t(ik + 1) * f.nx,
              out.im.begin() + std::size_t(jk) * f.nx);
  }
  return out;
}

// Restrict to a frequency subset (discards the rest).
inline Field restrict_to(const Field& f, const std::vector<int>& ks_out) {
  Field out = make_field(ks_out, f.nx);
  for (int jk = 0; jk < out.nk(); ++jk) {
    auto it = std::find(f.ks.begin(), f.ks.end(), ks_out[jk]);
    if (it == f.ks.end()) continue;
    int ik = static_cast<int>(it - f.ks.begin());
    std::copy(f.re.begin() + std::size_t(ik) * f.nx, f.re.begin() + std::size_t(ik + 1) * f.nx,
              out.re.begin() + std::size_t(jk) * f.nx);
    std::copy(f.im.begin() + std::size_t(ik) * f.nx, f.im.begin() + std::size_t(ik + 1) * f.nx,
              out.im.begin() + std::size_t(jk) * f.nx);
  }
  return out;
}

// L2-type pairing with a spatial weight: 2 sum_k Re<u_k, v_k*>_w, spatial
// integral by trapezoid; equals the space-time integral of f*g*weight under
// the Haar-normalized time measure.
inline double inner_product_l2(const Field& f, const Field& g, const SpaceGrid& grid,
                               const std::vector<double>* weight = nullptr) {
  check_same_shape(f, g, "inner_product_l2");
  if (f.nx != grid.n_points) throw UsageError("inner_product_l2: grid mismatch");
  double s = 0;
  for (int ik = 0; ik < f.nk(); ++ik) {
    const double* fr = &f.re[std::size_t(ik) * f.nx];
    const double* fi = &f.im[std::size_t(ik) * f.nx];
    const double* gr = &g.re[std::size_t(ik) * g.nx];
    const double* gi = &g.im[std::size_t(ik) * g.nx];
    double acc = 0;
    for (int x = 0; x < f.nx; ++x) {
      double w = grid.wq[x] * (weight ? (*weight)[x] : 1.0);
      acc += w * (fr[x] * gr[x] + fi[x] * gi[x]);
    }
    s += acc;
  }
  return 2.0 * s;
}

inline double field_norm(const Field& f, const SpaceGrid& grid) {
  return std::sqrt(std::max(inner_product_l2(f, f, grid), 0.0));
}

// Per-mode L2 mass keyed by frequency, used for support/tail diagnostics.
inline std::map<int, double> mode_masses(const Field& f, const SpaceGrid& grid) {
  std::map<int, double> out;
  for (int ik = 0; ik < f.nk(); ++ik) {
    double acc = 0;
    for (int x = 0; x < f.nx; ++x)
      acc += grid.wq[x] * (f.cre(ik, x) * f.cre(ik, x) + f.cim(ik, x) * f.cim(ik, x));
    out[f.ks[ik]] = std::sqrt(2.0 * acc);
  }
  return out;
}

// Fourier multiplier symbol m_k (complex); Hermitian extension to -k implied.
struct MultiplierSymbol {
  std::map<int, std::complex<double>> values;
};

inline Field apply_multiplier(const Field& f, const MultiplierSymbol& m) {
  Field out = f;
  for (int ik = 0; ik < f.nk(); ++ik) {
    auto it = m.values.find(f.ks[ik]);
    if (it == m.values.end())
      throw ConfigError("apply_multiplier: symbol missing frequency k=" +
                        std::to_string(f.ks[ik]));
    double mr = it->second.real(), mi = it->second.imag();
    for (int x = 0; x < f.nx; ++x) {
      double a = f.cre(ik, x), b = f.cim(ik, x);
      out.cre(ik, x) = a * mr - b * mi;
      out.cim(ik, x) = a * mi + b * mr;
    }
  }
  return out;
}

// Precomputed time-collocation tables for a fixed frequency list.
// Synthesis/analysis are exact inverses when n_t exceeds twice the largest
// carried frequency (no aliasing among carried modes).
struct Collocation {
  std::vector<int> ks;
  int n_t = 0;
  double omega = 0;
  std::vector<double> cosT, sinT;  // [ik*n_t + j]
};

inline Collocation make_collocation(const std::vector<int>& ks, double T, int n_t) {
  int kmax = ks.empty() ? 0 : *std::max_element(ks.begin(), ks.end());
  if (n_t < 2 * kmax + 1)
    throw UsageError("collocation: n_t=" + std::to_string(n_t) +
                     " undersamples frequencies up to " + std::to_string(kmax));
  Collocation c;
  c.ks = ks;
  c.n_t = n_t;
  c.omega = 2.0 * std::numbers::pi / T;
  c.cosT.resize(ks.size() * std::size_t(n_t));
  c.sinT.resize(ks.size() * std::size_t(n_t));
  for (std::size_t ik = 0; ik < ks.size(); ++ik)
    for (int j = 0; j < n_t; ++j) {
      double ph = 2.0 * std::numbers::pi * ks[ik] * j / n_t;
      c.cosT[ik * n_t + j] = std::cos(ph);
      c.sinT[ik * n_t + j] = std::sin(ph);
    }
  return c;
}

// Synthesis onto the collocation times; layout time-major [j*nx + x].
inline std::vector<double> to_time(const Field& f, const Collocation& c) {
  if (f.ks != c.ks) throw UsageError("to_time: collocation built for a different lattice");
  std::vector<double> out(std::size_t(c.n_t) * f.nx, 0.0);
  for (int ik = 0; ik < f.nk(); ++ik) {
    const double* fr = &f.re[std::size_t(ik) * f.nx];
    const double* fi = &f.im[std::size_t(ik) * f.nx];
    for (int j = 0; j < c.n_t; ++j) {
      double cj = 2.0 * c.cosT[std::size_t(ik) * c.n_t + j];
      double sj = 2.0 * c.sinT[std::size_t(ik) * c.n_t + j];
      double* row = &out[std::size_t(j) * f.nx];
      for (int x = 0; x < f.nx; ++x) row[x] += cj * fr[x] - sj * fi[x];
    }
  }
  return out;
}

// Analysis of time samples back to coefficients on the collocation lattice.
inline Field to_coef(const std::vector<double>& samples, int nx, const Collocation& c) {
  Field out = make_field(c.ks, nx);
  for (int ik = 0; ik < out.nk(); ++ik) {
    double* fr = &out.re[std::size_t(ik) * nx];
    double* fi = &out.im[std::size_t(ik) * nx];
    for (int j = 0; j < c.n_t; ++j) {
      double cj = c.cosT[std::size_t(ik) * c.n_t + j] / c.n_t;
      double sj = -c.sinT[std::size_t(ik) * c.n_t + j] / c.n_t;
      const double* row = &samples[std::size_t(j) * nx];
      for (int x = 0; x < nx; ++x) {
        fr[x] += cj * row[x];
        fi[x] += sj * row[x];
      }
    }
  }
  return out;
}

// w(x_i, t_j) over t_samples uniform times; shape (n_points x t_samples).
inline std::vector<double> evaluate_field(const Field& f, double T, int t_samples) {
  if (t_samples < 1) throw UsageError("evaluate_field: t_samples must be >= 1");
  // direct synthesis at the requested times; synthesis alone has no alias
  // constraint (analysis does)
  std::vector<double> out(std::size_t(f.nx) * t_samples, 0.0);
  double w = 2.0 * std::numbers::pi / T;
  for (int ik = 0; ik < f.nk(); ++ik)
    for (int j = 0; j < t_samples; ++j) {
      double ph = w * f.ks[ik] * (T * j / t_samples);
      double cj = 2.0 * std::cos(ph), sj = 2.0 * std::sin(ph);
      for (int x = 0; x < f.nx; ++x)
        out[std::size_t(x) * t_samples + j] += cj * f.cre(ik, x) - sj * f.cim(ik, x);
    }
  return out;
}

// Exact Fourier coefficients of w^3 on ks_out, by oversampled collocation.
// Requires n_t to resolve both the cube content (3*max input k) and the
// output lattice without aliasing; refuses undersampling.
inline Field pointwise_cube(const Field& f, double T, const std::vector<int>& ks_out,
                            int n_t = 0) {
  int kin = f.ks.empty() ? 0 : *std::max_element(f.ks.begin(), f.ks.end());
  int kout = ks_out.empty() ? 0 : *std::max_element(ks_out.begin(), ks_out.end());
  int need = 3 * kin + kout + 1;  // alias k' -> k requires k' + k < n_t
  if (n_t == 0) n_t = need;
  if (n_t < need)
    throw UsageError("pointwise_cube: n_t=" + std::to_string(n_t) +
                     " aliases cube content (need >= " + std::to_string(need) + ")");
  Collocation cin = make_collocation(f.ks, T, n_t);
  std::vector<double> w = to_time(f, cin);
  for (double& v : w) v = v * v * v;
  Collocation cout = make_collocation(ks_out, T, n_t);
  return to_coef(w, f.nx, cout);
}

// Signed cube root in collocation space, projected onto ks_out. Not
// band-limited, so n_t controls the quadrature of the projection; the
// default matches the dual-solver convention (8 k_max + 1 on the extended
// lattice).
inline Field pointwise_cbrt(const Field& f, double T, const std::vector<int>& ks_out,
                            int n_t) {
  Collocation cin = make_collocation(f.ks, T, n_t);
  std::vector<double> w = to_time(f, cin);
  for (double& v : w) v = std::cbrt(v);
  Collocation cout = make_collocation(ks_out, T, n_t);
  return to_coef(w, f.nx, cout);
}

// ||f||_{4/3}^{4/3} with the same collocation quadrature.
inline double q43_norm(const Field& f, const SpaceGrid& grid, double T, int n_t) {
  Collocation c = make_collocation(f.ks, T, n_t);
  std::vector<double> w = to_time(f, c);
  double acc = 0;
  for (int j = 0; j < n_t; ++j) {
    const double* row = &w[std::size_t(j) * f.nx];
    double rowacc = 0;
    for (int x = 0; x < f.nx; ++x)
      rowacc += grid.wq[x] * std::pow(std::abs(row[x]), 4.0 / 3.0);
    acc += rowacc;
  }
  return acc / n_t;
}

// ---- CSV serialization: columns x, k, Re, Im; header carries metadata ----

inline void write_field_csv(std::FILE* fp, const Field& f, const SpaceGrid& grid,
                            const FrequencyLattice& lat, const std::string& config_hash,
                            const std::string& version, const char* name) {
  std::fprintf(fp,
               "# field=%s T=%.17g omega=%.17g k_max=%d x_min=%.17g x_max=%.17g "
               "n_points=%d config=%s version=%s\n",
               name, lat.T, lat.omega, lat.k_max, grid.x_min, grid.x_max, grid.n_points,
               config_hash.c_str(), version.c_str());
  std::fprintf(fp, "x,k,re,im\n");
  for (int ik = 0; ik < f.nk(); ++ik)
    for (int x = 0; x < f.nx; ++x)
      std::fprintf(fp, "%.17g,%d,%.17g,%.17g\n", grid.x[x], f.ks[ik], f.cre(ik, x),
                   f.cim(ik, x));
}

}  // namespace breather
