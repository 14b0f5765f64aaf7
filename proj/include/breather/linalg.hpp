#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "breather/util.hpp"

namespace breather {

// Symmetric tridiagonal matrix: diag[i] on the diagonal, off[i] coupling
// (i, i+1).
struct Tridiag {
  std::vector<double> diag;
  std::vector<double> off;
  int n() const { return static_cast<int>(diag.size()); }
};

inline std::vector<double> tri_apply(const Tridiag& A, const std::vector<double>& x) {
  int n = A.n();
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = A.diag[i] * x[i];
  for (int i = 0; i + 1 < n; ++i) {
    y[i] += A.off[i] * x[i + 1];
    y[i + 1] += A.off[i] * x[i];
  }
  return y;
}

// LU factorization with partial pivoting (the blocks are indefinite, where an
// unpivoted elimination can blow up). Fill-in adds one extra superdiagonal.
struct TriFactor {
  std::vector<double> l;    // multipliers
  std::vector<double> d;    // pivots
  std::vector<double> u1;   // first superdiagonal
  std::vector<double> u2;   // fill-in second superdiagonal
  std::vector<char> piv;    // row i swapped with i+1
  double min_abs_pivot = std::numeric_limits<double>::infinity();
};

inline TriFactor tri_factor(const Tridiag& A) {
  int n = A.n();
  TriFactor F;
  F.d = A.diag;
  F.u1 = A.off;
  F.l.assign(n > 0 ? n - 1 : 0, 0.0);
  F.u2.assign(n > 2 ? n - 2 : 0, 0.0);
  F.piv.assign(n > 0 ? n - 1 : 0, 0);
  std::vector<double> dl = A.off;  // subdiagonal (symmetric input)
  for (int i = 0; i + 1 < n; ++i) {
    if (std::abs(F.d[i]) >= std::abs(dl[i])) {
      double fact = F.d[i] != 0.0 ? dl[i] / F.d[i] : 0.0;
      F.l[i] = fact;
      F.d[i + 1] -= fact * F.u1[i];
    } else {
      double fact = F.d[i] / dl[i];
      F.d[i] = dl[i];
      F.l[i] = fact;
      double t = F.u1[i];
      F.u1[i] = F.d[i + 1];
      F.d[i + 1] = t - fact * F.d[i + 1];
      if (i + 2 < n) {
        F.u2[i] = F.u1[i + 1];
        F.u1[i + 1] = -fact * F.u1[i + 1];
      }
      F.piv[i] = 1;
    }
  }
  for (int i = 0; i < n; ++i) F.min_abs_pivot = std::min(F.min_abs_pivot, std::abs(F.d[i]));
  return F;
}

inline void tri_solve_inplace(const TriFactor& F, std::vector<double>& b) {
  int n = static_cast<int>(F.d.size());
  for (int i = 0; i + 1 < n; ++i) {
    if (F.piv[i]) std::swap(b[i], b[i + 1]);
    b[i + 1] -= F.l[i] * b[i];
  }
  if (n == 0) return;
  b[n - 1] = F.d[n - 1] != 0.0 ? b[n - 1] / F.d[n - 1] : 0.0;
  if (n > 1)
    b[n - 2] = F.d[n - 2] != 0.0 ? (b[n - 2] - F.u1[n - 2] * b[n - 1]) / F.d[n - 2] : 0.0;
  for (int i = n - 3; i >= 0; --i)
    b[i] = F.d[i] != 0.0
               ? (b[i] - F.u1[i] * b[i + 1] - F.u2[i] * b[i + 2]) / F.d[i]
               : 0.0;
}

// Direct solve plus one step of iterative refinement; returns the relative
// residual of the refined solution.
inline double tri_solve_refined(const Tridiag& A, const TriFactor& F,
                                const std::vector<double>& b, std::vector<double>& x,
                                int max_rounds = 3) {
  double bn = 0;
  for (double v : b) bn = std::max(bn, std::abs(v));
  x = b;
  tri_solve_inplace(F, x);
  if (bn == 0) return 0.0;
  auto residual = [&](const std::vector<double>& y, std::vector<double>& r) {
    r = tri_apply(A, y);
    double rn = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      r[i] = b[i] - r[i];
      rn = std::max(rn, std::abs(r[i]));
    }
    return rn / bn;
  };
  std::vector<double> r;
  double best_rel = residual(x, r);
  std::vector<double> best_x = x;
  for (int round = 0; round < max_rounds && best_rel > 1e-15; ++round) {
    tri_solve_inplace(F, r);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += r[i];
    double rel = residual(x, r);
    if (rel < best_rel) {
      best_rel = rel;
      best_x = x;
    } else {
      break;
    }
  }
  x = std::move(best_x);
  return best_rel;
}

inline double tri_norm1(const Tridiag& A) {
  int n = A.n();
  double m = 0;
  for (int i = 0; i < n; ++i) {
    double s = std::abs(A.diag[i]);
    if (i > 0) s += std::abs(A.off[i - 1]);
    if (i + 1 < n) s += std::abs(A.off[i]);
    m = std::max(m, s);
  }
  return m;
}

// Hager-style 1-norm estimate of A^{-1} (A symmetric, so 1-norm = inf-norm).
inline double tri_invnorm1_estimate(const TriFactor& F) {
  int n = static_cast<int>(F.d.size());
  if (n == 0) return 0;
  std::vector<double> x(n, 1.0 / n);
  double est = 0;
  for (int pass = 0; pass < 5; ++pass) {
    tri_solve_inplace(F, x);
    double nrm = 0;
    for (double v : x) nrm += std::abs(v);
    est = std::max(est, nrm);
    for (double& v : x) v = (v >= 0 ? 1.0 : -1.0);
    tri_solve_inplace(F, x);
    int jmax = 0;
    double vmax = 0;
    for (int i = 0; i < n; ++i)
      if (std::abs(x[i]) > vmax) {
        vmax = std::abs(x[i]);
        jmax = i;
      }
    if (vmax <= nrm * (1 + 1e-12)) break;
    std::fill(x.begin(), x.end(), 0.0);
    x[jmax] = 1.0;
  }
  return est;
}

inline double tri_cond1_estimate(const Tridiag& A, const TriFactor& F) {
  return tri_norm1(A) * tri_invnorm1_estimate(F);
}

// ---- symmetric tridiagonal eigen tools (Sturm bisection + inverse
// iteration); used for gap-window eigenpairs so no dense O(n^3) work ----

// Number of eigenvalues of (diag, off) strictly below x.
inline int sturm_count_below(const std::vector<double>& diag,
                             const std::vector<double>& off, double x) {
  int n = static_cast<int>(diag.size());
  int cnt = 0;
  double d = 1.0;
  const double tiny = std::numeric_limits<double>::min() * 4;
  for (int i = 0; i < n; ++i) {
    double o2 = (i > 0) ? off[i - 1] * off[i - 1] : 0.0;
    d = diag[i] - x - (i > 0 ? o2 / d : 0.0);
    if (std::abs(d) < tiny) d = -tiny;
    if (d < 0) ++cnt;
  }
  return cnt;
}

// All eigenvalues in (lo, hi), each found by index bisection.
inline std::vector<double> tridiag_eigs_in(const std::vector<double>& diag,
                                           const std::vector<double>& off, double lo,
                                           double hi, double tol = 1e-12) {
  std::vector<double> out;
  int clo = sturm_count_below(diag, off, lo);
  int chi = sturm_count_below(diag, off, hi);
  for (int idx = clo; idx < chi; ++idx) {
    double a = lo, b = hi;
    while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
      double m = 0.5 * (a + b);
      if (sturm_count_below(diag, off, m) <= idx)
        a = m;
      else
        b = m;
    }
    out.push_back(0.5 * (a + b));
  }
  return out;
}

// Inverse iteration for the eigenvector at (approximately) lam.
inline std::vector<double> tridiag_eigvec(const std::vector<double>& diag,
                                          const std::vector<double>& off, double lam) {
  int n = static_cast<int>(diag.size());
  double scale = 0;
  for (double v : diag) scale = std::max(scale, std::abs(v));
  scale = std::max(scale, std::abs(lam));
  Tridiag S;
  S.diag.resize(n);
  S.off = off;
  double shift = lam + 1e-12 * scale;
  TriFactor F;
  for (int attempt = 0; attempt < 4; ++attempt) {
    for (int i = 0; i < n; ++i) S.diag[i] = diag[i] - shift;
    F = tri_factor(S);
    if (F.min_abs_pivot > 1e-14 * scale) break;
    shift += std::pow(10.0, attempt) * 1e-11 * scale;
  }
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * std::sin(0.7 * (i + 1));
  for (int it = 0; it < 5; ++it) {
    tri_solve_inplace(F, v);
    double nrm = 0;
    for (double y : v) nrm += y * y;
    nrm = std::sqrt(nrm);
    if (!(nrm > 0) || !std::isfinite(nrm)) {
      std::fill(v.begin(), v.end(), 1.0 / std::sqrt(double(n)));
      continue;
    }
    for (double& y : v) y /= nrm;
  }
  // sign convention: largest-magnitude entry positive
  int jm = 0;
  for (int i = 0; i < n; ++i)
    if (std::abs(v[i]) > std::abs(v[jm])) jm = i;
  if (v[jm] < 0)
    for (double& y : v) y = -y;
  return v;
}

// ---- generic iterative tools over flat vectors with a caller-supplied
// inner product ----

using Vec = std::vector<double>;
using MatVecFn = std::function<Vec(const Vec&)>;
using IpFn = std::function<double(const Vec&, const Vec&)>;

struct GmresOptions {
  int max_dim = 60;
  double tol = 1e-11;
};

inline Vec gmres(const MatVecFn& amul, const Vec& b, const IpFn& ip,
                 const GmresOptions& opt = {}) {
  auto norm = [&](const Vec& v) { return std::sqrt(std::max(ip(v, v), 0.0)); };
  double n0 = norm(b);
  if (n0 == 0) return Vec(b.size(), 0.0);
  int m = opt.max_dim;
  std::vector<Vec> Q;
  Q.push_back(b);
  for (double& v : Q[0]) v /= n0;
  std::vector<std::vector<double>> H(m + 1, std::vector<double>(m, 0.0));
  std::vector<double> cs(m, 0), sn(m, 0), g(m + 1, 0);
  g[0] = n0;
  for (int j = 0; j < m; ++j) {
    Vec w = amul(Q[j]);
    for (int i = 0; i <= j; ++i) {
      H[i][j] = ip(w, Q[i]);
      for (std::size_t t = 0; t < w.size(); ++t) w[t] -= H[i][j] * Q[i][t];
    }
    H[j + 1][j] = norm(w);
    bool breakdown = !(H[j + 1][j] > 1e-300);
    if (!breakdown) {
      for (double& v : w) v /= H[j + 1][j];
      Q.push_back(std::move(w));
    }
    for (int i = 0; i < j; ++i) {
      double t = cs[i] * H[i][j] + sn[i] * H[i + 1][j];
      H[i + 1][j] = -sn[i] * H[i][j] + cs[i] * H[i + 1][j];
      H[i][j] = t;
    }
    double r = std::hypot(H[j][j], H[j + 1][j]);
    cs[j] = H[j][j] / r;
    sn[j] = H[j + 1][j] / r;
    H[j][j] = r;
    H[j + 1][j] = 0;
    g[j + 1] = -sn[j] * g[j];
    g[j] = cs[j] * g[j];
    if (std::abs(g[j + 1]) / n0 < opt.tol || j == m - 1 || breakdown) {
      std::vector<double> y(j + 1);
      for (int i = j; i >= 0; --i) {
        double s = g[i];
        for (int t = i + 1; t <= j; ++t) s -= H[i][t] * y[t];
        y[i] = s / H[i][i];
      }
      Vec out(b.size(), 0.0);
      for (int i = 0; i <= j; ++i)
        for (std::size_t t = 0; t < out.size(); ++t) out[t] += y[i] * Q[i][t];
      return out;
    }
  }
  return Vec(b.size(), 0.0);
}

struct PowerIterResult {
  double value = 0;  // |lambda|_max estimate
  bool converged = false;
  int iterations = 0;
};

// Power iteration for a symmetric operator in the given inner product.
inline PowerIterResult power_iteration(const MatVecFn& amul, const IpFn& ip, Vec x0,
                                       int max_iter = 500, double tol = 1e-10) {
  PowerIterResult res;
  auto norm = [&](const Vec& v) { return std::sqrt(std::max(ip(v, v), 0.0)); };
  double nx = norm(x0);
  if (!(nx > 0)) return res;
  for (double& v : x0) v /= nx;
  double prev = 0;
  for (int it = 1; it <= max_iter; ++it) {
    Vec y = amul(x0);
    double lam = std::abs(ip(y, x0));
    double ny = norm(y);
    res.iterations = it;
    if (!(ny > 0)) {
      res.value = 0;
      res.converged = true;  // operator annihilates the iterate: norm 0
      return res;
    }
    for (std::size_t t = 0; t < y.size(); ++t) y[t] /= ny;
    x0 = std::move(y);
    res.value = lam;
    if (it > 2 && std::abs(lam - prev) <= tol * std::max(1.0, lam)) {
      res.converged = true;
      return res;
    }
    prev = lam;
  }
  return res;
}

}  // namespace breather
