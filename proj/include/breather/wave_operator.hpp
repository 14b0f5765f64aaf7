#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "breather/grid.hpp"
#include "breather/kernels.hpp"
#include "breather/linalg.hpp"
#include "breather/util.hpp"

namespace breather {

// Frequency-diagonal effective operator: for each lattice frequency k the
// spatial block is A_k = -d^2/dx^2 - omega^2 k^2 (V(x) + Ghat_k(x)) with
// Dirichlet ends, scaled by s_k = 1 / (omega^2 k^2 nhat_k) on the active set.
// Blocks for the full extended lattice are kept because the cubic pushes
// content up to three times the active cutoff.
struct EffectiveOperator {
  SpaceGrid grid;
  FrequencyLattice lat;
  std::vector<double> V;  // full grid samples
  KernelCoefficients kc;  // nhat, g-factors, g1 spatial profile
  NonlinearWeight weight;
  int sign = 1;  // -1 solves the negated-operator transform of a negative h

  std::map<int, Tridiag> A;      // all extended k
  std::map<int, Tridiag> A0;     // active k, V only (reference metric)
  std::map<int, TriFactor> F;    // factorization of A_k
  std::map<int, double> cond1;   // 1-norm condition estimate of A_k
  std::map<int, double> s_k;     // active k only
  std::vector<double> h4;        // h^{1/4}, full grid

  int ni() const { return grid.n_points - 2; }
};

inline EffectiveOperator build_effective_operator(const SpaceGrid& grid,
                                                  const FrequencyLattice& lat,
                                                  const std::vector<double>& V,
                                                  const KernelCoefficients& kc,
                                                  const NonlinearWeight& weight) {
  if ((int)V.size() != grid.n_points)
    throw ConfigError("operator: weight sample size does not match grid");
  if ((int)weight.h.size() != grid.n_points)
    throw ConfigError("operator: nonlinear weight size does not match grid");
  if (!kc.g1_profile.empty() && (int)kc.g1_profile.size() != grid.n_points)
    throw ConfigError("operator: retarded-kernel profile size does not match grid");

  EffectiveOperator op;
  op.grid = grid;
  op.lat = lat;
  op.V = V;
  op.kc = kc;
  op.weight = weight;
  op.sign = weight.sign;

  int n = op.ni();
  double idx2 = 1.0 / (grid.dx * grid.dx);
  double w2 = lat.omega * lat.omega;

  for (int k : lat.ext) {
    Tridiag Ak;
    Ak.diag.resize(n);
    Ak.off.assign(n - 1, -idx2);
    for (int i = 0; i < n; ++i)
      Ak.diag[i] = 2.0 * idx2 - w2 * k * k * (V[i + 1] + kc.ghat(k, i + 1));
    TriFactor fk = tri_factor(Ak);
    op.cond1[k] = tri_cond1_estimate(Ak, fk);
    op.F[k] = std::move(fk);
    op.A[k] = std::move(Ak);
  }
  for (int k : lat.active) {
    double nh = kc.nhat(k);
    if (nh == 0.0)
      throw ConfigError("operator: kernel coefficient vanishes at active frequency k=" +
                        std::to_string(k));
    op.s_k[k] = 1.0 / (w2 * k * k * nh);
    Tridiag A0k;
    A0k.diag.resize(n);
    A0k.off.assign(n - 1, -idx2);
    for (int i = 0; i < n; ++i) A0k.diag[i] = 2.0 * idx2 - w2 * k * k * V[i + 1];
    op.A0[k] = std::move(A0k);
  }
  op.h4.resize(grid.n_points);
  for (int i = 0; i < grid.n_points; ++i) op.h4[i] = std::pow(weight.h[i], 0.25);
  return op;
}

namespace detail {
inline void gather_interior(const Field& f, int ik, std::vector<double>& re,
                            std::vector<double>& im) {
  int nx = f.nx, n = nx - 2;
  re.resize(n);
  im.resize(n);
  const double* pr = &f.re[std::size_t(ik) * nx];
  const double* pi = &f.im[std::size_t(ik) * nx];
  for (int i = 0; i < n; ++i) {
    re[i] = pr[i + 1];
    im[i] = pi[i + 1];
  }
}

inline void scatter_interior(Field& f, int ik, const std::vector<double>& re,
                             const std::vector<double>& im, double scale) {
  int nx = f.nx;
  double* pr = &f.re[std::size_t(ik) * nx];
  double* pi = &f.im[std::size_t(ik) * nx];
  pr[0] = pi[0] = pr[nx - 1] = pi[nx - 1] = 0.0;
  for (int i = 0; i + 2 < nx; ++i) {
    pr[i + 1] = scale * re[i];
    pi[i + 1] = scale * im[i];
  }
}
}  // namespace detail

// W u: per active frequency, sign * s_k * A_k applied blockwise.
inline Field apply_W(const EffectiveOperator& op, const Field& f) {
  if (f.ks != op.lat.active) throw UsageError("apply_W: field must live on the active lattice");
  Field out = make_field(f.ks, f.nx);
  parallel_for(f.nk(), [&](int ik) {
    std::vector<double> re, im, wre, wim;
    detail::gather_interior(f, ik, re, im);
    int k = f.ks[ik];
    const Tridiag& Ak = op.A.at(k);
    wre = tri_apply(Ak, re);
    wim = tri_apply(Ak, im);
    detail::scatter_interior(out, ik, wre, wim, op.sign * op.s_k.at(k));
  });
  return out;
}

// V-only and retarded-only parts, W = W0 + W1 (diagnostics and tests).
inline Field apply_W0(const EffectiveOperator& op, const Field& f) {
  if (f.ks != op.lat.active) throw UsageError("apply_W0: field must live on the active lattice");
  Field out = make_field(f.ks, f.nx);
  parallel_for(f.nk(), [&](int ik) {
    std::vector<double> re, im;
    detail::gather_interior(f, ik, re, im);
    int k = f.ks[ik];
    auto wre = tri_apply(op.A0.at(k), re);
    auto wim = tri_apply(op.A0.at(k), im);
    detail::scatter_interior(out, ik, wre, wim, op.sign * op.s_k.at(k));
  });
  return out;
}

inline Field apply_W1(const EffectiveOperator& op, const Field& f) {
  if (f.ks != op.lat.active) throw UsageError("apply_W1: field must live on the active lattice");
  Field out = make_field(f.ks, f.nx);
  double w2 = op.lat.omega * op.lat.omega;
  parallel_for(f.nk(), [&](int ik) {
    int k = f.ks[ik];
    double c = -op.sign * op.s_k.at(k) * w2 * k * k;
    for (int i = 1; i + 1 < f.nx; ++i) {
      double g = op.kc.ghat(k, i);
      out.re[std::size_t(ik) * f.nx + i] = c * g * f.cre(ik, i);
      out.im[std::size_t(ik) * f.nx + i] = c * g * f.cim(ik, i);
    }
  });
  return out;
}

// Solve W x = f blockwise. Factorizations are reused; each block gets one
// step of iterative refinement and must reach 1e-12 relative residual.
inline Field solve_W(const EffectiveOperator& op, const Field& f,
                     double cond_limit = 1e14) {
  if (f.ks != op.lat.active) throw UsageError("solve_W: field must live on the active lattice");
  for (int k : f.ks) {
    if (op.cond1.at(k) > cond_limit)
      throw SolverError("solve_W: block k=" + std::to_string(k) +
                        " is numerically singular (cond ~ " +
                        std::to_string(op.cond1.at(k)) +
                        "); spectral point sits too close to a band");
  }
  Field out = make_field(f.ks, f.nx);
  std::vector<double> worst(f.nk(), 0.0);
  parallel_for(f.nk(), [&](int ik) {
    std::vector<double> re, im, xre, xim;
    detail::gather_interior(f, ik, re, im);
    int k = f.ks[ik];
    double inv = 1.0 / (op.sign * op.s_k.at(k));
    for (auto& v : re) v *= inv;
    for (auto& v : im) v *= inv;
    const Tridiag& Ak = op.A.at(k);
    const TriFactor& Fk = op.F.at(k);
    double r1 = tri_solve_refined(Ak, Fk, re, xre);
    double r2 = tri_solve_refined(Ak, Fk, im, xim);
    worst[ik] = std::max(r1, r2);
    detail::scatter_interior(out, ik, xre, xim, 1.0);
  });
  for (int ik = 0; ik < f.nk(); ++ik) {
    // attainable backward error scales with the block conditioning when the
    // right-hand side excites the near-null direction
    double tol = std::max(1e-12, 1e-13 * op.cond1.at(f.ks[ik]));
    if (worst[ik] > tol) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "solve_W: block k=%d residual %.3g exceeds %.3g after refinement",
                    f.ks[ik], worst[ik], tol);
      throw SolverError(msg);
    }
  }
  return out;
}

// K v = h^{1/4} W^{-1} h^{1/4} Pi v on the extended lattice.
inline Field apply_K(const EffectiveOperator& op, const Field& v) {
  if (v.ks != op.lat.ext) throw UsageError("apply_K: field must live on the extended lattice");
  Field a = restrict_to(v, op.lat.active);
  for (int ik = 0; ik < a.nk(); ++ik)
    for (int i = 0; i < a.nx; ++i) {
      a.re[std::size_t(ik) * a.nx + i] *= op.h4[i];
      a.im[std::size_t(ik) * a.nx + i] *= op.h4[i];
    }
  Field s = solve_W(op, a);
  for (int ik = 0; ik < s.nk(); ++ik)
    for (int i = 0; i < s.nx; ++i) {
      s.re[std::size_t(ik) * s.nx + i] *= op.h4[i];
      s.im[std::size_t(ik) * s.nx + i] *= op.h4[i];
    }
  return embed(s, op.lat.ext);
}

// ---- relative bound of the retarded part against the V-only part ----

struct W1Estimate {
  double sigma = 0;
  bool converged = true;
  bool skipped = false;
  int argmax_k = 0;
  double last_value = 0;
  std::string note;
};

// sigma = max_k || |A0_k|^{-1/2} (-omega^2 k^2 Ghat_k) |A0_k|^{-1/2} ||_2.
// The s_k scaling cancels between the two factors. Dense eigenwork grows
// as n^3, so large interior sizes are refused unless allow_large is set.
inline W1Estimate estimate_W1_norm(const EffectiveOperator& op, bool allow_large = false) {
  W1Estimate est;
  int n = op.ni();
  if (n > 1600 && !allow_large) {
    est.skipped = true;
    est.note = "interior size " + std::to_string(n) +
               " exceeds the dense-eigensolve guard; rerun with the override "
               "or a coarser certification grid";
    return est;
  }
  bool any_g = false;
  for (int k : op.lat.active)
    for (int i = 0; i < op.grid.n_points && !any_g; ++i) any_g = op.kc.ghat(k, i) != 0.0;
  if (!any_g) return est;  // sigma = 0 exactly

  double w2 = op.lat.omega * op.lat.omega;
  for (int k : op.lat.active) {
    const Tridiag& A0k = op.A0.at(k);
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(A0k.diag.data(), n);
    Eigen::VectorXd sub = Eigen::Map<const Eigen::VectorXd>(A0k.off.data(), n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(d, sub);
    if (es.info() != Eigen::Success)
      throw SolverError("estimate_W1_norm: tridiagonal eigensolve failed at k=" +
                        std::to_string(k));
    Eigen::VectorXd isq = es.eigenvalues().array().abs().sqrt().inverse().matrix();
    const Eigen::MatrixXd& Q = es.eigenvectors();
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b[i] = -w2 * k * k * op.kc.ghat(k, i + 1);

    auto amul = [&](const Vec& x) {
      Eigen::VectorXd ex = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
      Eigen::VectorXd t = Q.transpose() * ex;
      t = t.cwiseProduct(isq);
      t = Q * t;
      t = t.cwiseProduct(b);
      Eigen::VectorXd t2 = Q.transpose() * t;
      t2 = t2.cwiseProduct(isq);
      t = Q * t2;
      return Vec(t.data(), t.data() + n);
    };
    auto ip = [](const Vec& a, const Vec& bb) {
      double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * bb[i];
      return s;
    };
    Vec x0(n);
    for (int i = 0; i < n; ++i) x0[i] = 1.0 + 1e-3 * std::sin(0.7 * (i + 1));
    auto pr = power_iteration(amul, ip, x0, 500, 1e-10);
    if (!pr.converged) {
      est.converged = false;
      est.note = "power iteration did not converge at k=" + std::to_string(k) +
                 "; last Rayleigh quotient " + std::to_string(pr.value);
    }
    est.last_value = pr.value;
    if (pr.value > est.sigma) {
      est.sigma = pr.value;
      est.argmax_k = k;
    }
  }
  return est;
}

// ---- localized pencil modes (anchor seeds and sign witnesses) ----

struct PencilMode {
  double lambda = 0;
  std::vector<double> phi;  // full grid, zero ends, max-abs normalized
};

// Eigenpairs of -phi'' - omega^2 k^2 Ghat_k phi = lambda V phi in (lo, hi),
// symmetrized by the substitution z = sqrt(V) phi.
inline std::vector<PencilMode> pencil_modes(const EffectiveOperator& op, int k, double lo,
                                            double hi) {
  int n = op.ni();
  double idx2 = 1.0 / (op.grid.dx * op.grid.dx);
  double w2 = op.lat.omega * op.lat.omega;
  std::vector<double> diag(n), off(n - 1);
  for (int i = 0; i < n; ++i)
    diag[i] = (2.0 * idx2 - w2 * k * k * op.kc.ghat(k, i + 1)) / op.V[i + 1];
  for (int i = 0; i + 1 < n; ++i) off[i] = -idx2 / std::sqrt(op.V[i + 1] * op.V[i + 2]);
  std::vector<PencilMode> out;
  for (double lam : tridiag_eigs_in(diag, off, lo, hi)) {
    auto z = tridiag_eigvec(diag, off, lam);
    PencilMode m;
    m.lambda = lam;
    m.phi.assign(op.grid.n_points, 0.0);
    double amax = 0;
    int arg = 0;
    for (int i = 0; i < n; ++i) {
      m.phi[i + 1] = z[i] / std::sqrt(op.V[i + 1]);
      if (std::abs(m.phi[i + 1]) > amax) {
        amax = std::abs(m.phi[i + 1]);
        arg = i + 1;
      }
    }
    if (amax > 0) {
      double sc = (m.phi[arg] > 0 ? 1.0 : -1.0) / amax;
      for (auto& v : m.phi) v *= sc;
    }
    out.push_back(std::move(m));
  }
  return out;
}

struct WitnessPair {
  Field below, above;  // single-mode fields on the active lattice
  double lambda_below = 0, lambda_above = 0;
};

// Two single-frequency fields whose quadratic forms <W u, u> carry opposite
// signs: pencil modes just below and just above omega^2 k^2.
inline WitnessPair witness_fields(const EffectiveOperator& op, int k) {
  bool is_active = false;
  for (int ka : op.lat.active) is_active = is_active || ka == k;
  if (!is_active) throw UsageError("witness_fields: k is not an active frequency");
  double lam0 = op.lat.omega * op.lat.omega * k * k;
  double win = 3.0 * k + 3.0;
  std::optional<PencilMode> lo_mode, hi_mode;
  for (int t = 0; t < 4 && (!lo_mode || !hi_mode); ++t, win *= 2) {
    auto modes = pencil_modes(op, k, std::max(0.0, lam0 - win), lam0 + win);
    for (auto& m : modes) {
      if (m.lambda < lam0) lo_mode = m;  // keep the last one below
      if (m.lambda > lam0 && !hi_mode) hi_mode = m;
    }
  }
  if (!lo_mode || !hi_mode)
    throw CertificationError("witness_fields: no pencil modes found around k=" +
                             std::to_string(k));
  WitnessPair wp;
  wp.lambda_below = lo_mode->lambda;
  wp.lambda_above = hi_mode->lambda;
  wp.below = make_field(op.lat.active, op.grid.n_points);
  wp.above = make_field(op.lat.active, op.grid.n_points);
  int ik = 0;
  while (op.lat.active[ik] != k) ++ik;
  for (int i = 0; i < op.grid.n_points; ++i) {
    wp.below.re[std::size_t(ik) * op.grid.n_points + i] = lo_mode->phi[i];
    wp.above.re[std::size_t(ik) * op.grid.n_points + i] = hi_mode->phi[i];
  }
  return wp;
}

}  // namespace breather
