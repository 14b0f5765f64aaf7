#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "breather/dual_solver.hpp"
#include "breather/grid.hpp"
#include "breather/wave_operator.hpp"

namespace breather {

// ---- primal state from the dual state, two independent routes ----
// (i)  u = h^{-1/4} v^{1/3}   (pointwise cube root)
// (ii) u = W^{-1}(h^{1/4} Pi v)  (resolvent route)
// The two agree exactly at critical points; their gap is a convergence check.

struct PrimalPair {
  Field u;      // route (i), used downstream
  Field u_alt;  // route (ii)
  double route_gap = 0;
  bool consistent = true;
};

inline PrimalPair primal_pair(const EffectiveOperator& op, const Field& v, int n_t,
                              double tol = 1e-6) {
  PrimalPair pp;
  pp.u = primal_from_v(op, v, n_t);
  Field a = restrict_to(v, op.lat.active);
  for (int ik = 0; ik < a.nk(); ++ik)
    for (int i = 0; i < a.nx; ++i) {
      a.re[std::size_t(ik) * a.nx + i] *= op.h4[i];
      a.im[std::size_t(ik) * a.nx + i] *= op.h4[i];
    }
  pp.u_alt = solve_W(op, a);
  Field d = lincomb(1.0, pp.u, -1.0, pp.u_alt);
  double un = field_norm(pp.u, op.grid);
  pp.route_gap = field_norm(d, op.grid) / (un > 0 ? un : 1.0);
  pp.consistent = pp.route_gap <= tol;
  return pp;
}

// ---- wave profile from the variational solution ----
// First polarization: w = u. Second polarization: the active components
// invert the kernel convolution, w_k = u_k / nhat_k, and the inactive
// extended components solve the linear blocks A_k w_k = omega^2 k^2 h (u^3)_k.

struct WaveField {
  Field w;  // extended lattice
  bool second_polarization = false;
  std::vector<int> uncertified;  // blocks skipped because cond(A_k) was too large
};

inline WaveField reconstruct_w(const EffectiveOperator& op, const Field& u,
                               bool second_polarization, bool allow_uncertified = false,
                               double cond_limit = 1e14) {
  if (u.ks != op.lat.active)
    throw UsageError("reconstruct_w: u must live on the active lattice");
  WaveField wf;
  wf.second_polarization = second_polarization;
  if (!second_polarization) {
    wf.w = embed(u, op.lat.ext);
    return wf;
  }

  int n_t = 8 * op.lat.k_max + 1;
  Field cu = pointwise_cube(u, op.lat.T, op.lat.ext, n_t);
  wf.w = make_field(op.lat.ext, u.nx);
  double w2 = op.lat.omega * op.lat.omega;

  std::vector<int> bad;
  for (int k : op.lat.ext) {
    bool active = std::find(op.lat.active.begin(), op.lat.active.end(), k) !=
                  op.lat.active.end();
    if (!active && op.cond1.at(k) > cond_limit) bad.push_back(k);
  }
  if (!bad.empty() && !allow_uncertified) {
    std::string ks;
    for (int k : bad) ks += (ks.empty() ? "" : ", ") + std::to_string(k);
    throw CertificationError(
        "reconstruct_w: linear blocks at k = {" + ks +
        "} are numerically singular; the spectral points are not certified away "
        "from the bands");
  }
  wf.uncertified = bad;

  for (int ik = 0; ik < wf.w.nk(); ++ik) {
    int k = wf.w.ks[ik];
    bool active = std::find(op.lat.active.begin(), op.lat.active.end(), k) !=
                  op.lat.active.end();
    if (active) {
      double inv = 1.0 / op.kc.nhat(k);
      int ia = 0;
      while (op.lat.active[ia] != k) ++ia;
      for (int i = 0; i < u.nx; ++i) {
        wf.w.re[std::size_t(ik) * u.nx + i] = inv * u.cre(ia, i);
        wf.w.im[std::size_t(ik) * u.nx + i] = inv * u.cim(ia, i);
      }
      continue;
    }
    if (std::find(bad.begin(), bad.end(), k) != bad.end()) continue;  // stays zero
    std::vector<double> re(op.ni()), im(op.ni());
    for (int i = 0; i < op.ni(); ++i) {
      double f = w2 * k * k * op.sign * op.weight.h[i + 1];
      re[i] = f * cu.cre(ik, i + 1);
      im[i] = f * cu.cim(ik, i + 1);
    }
    std::vector<double> xre, xim;
    double r1 = tri_solve_refined(op.A.at(k), op.F.at(k), re, xre);
    double r2 = tri_solve_refined(op.A.at(k), op.F.at(k), im, xim);
    if (std::max(r1, r2) > 1e-10)
      throw SolverError("reconstruct_w: block k=" + std::to_string(k) +
                        " solve residual " + std::to_string(std::max(r1, r2)));
    for (int i = 0; i < op.ni(); ++i) {
      wf.w.re[std::size_t(ik) * u.nx + i + 1] = xre[i];
      wf.w.im[std::size_t(ik) * u.nx + i + 1] = xim[i];
    }
  }
  return wf;
}

// ---- nonlinear polarization content on a frequency set ----
// First polarization: NL_k = nhat_k (w^3)_k; second: NL_k = ((N * w)^3)_k.

inline Field nonlinear_field(const EffectiveOperator& op, const Field& w,
                             bool second_polarization, const std::vector<int>& ks_out,
                             int n_t) {
  if (!second_polarization) {
    Field c = pointwise_cube(w, op.lat.T, ks_out, n_t);
    for (int ik = 0; ik < c.nk(); ++ik) {
      double nh = op.kc.nhat(c.ks[ik]);
      for (int i = 0; i < c.nx; ++i) {
        c.re[std::size_t(ik) * c.nx + i] *= nh;
        c.im[std::size_t(ik) * c.nx + i] *= nh;
      }
    }
    return c;
  }
  Field nw = w;
  for (int ik = 0; ik < nw.nk(); ++ik) {
    double nh = op.kc.nhat(nw.ks[ik]);
    for (int i = 0; i < nw.nx; ++i) {
      nw.re[std::size_t(ik) * nw.nx + i] *= nh;
      nw.im[std::size_t(ik) * nw.nx + i] *= nh;
    }
  }
  return pointwise_cube(nw, op.lat.T, ks_out, n_t);
}

// ---- wave-equation residual, frequency by frequency ----
// r_k = A_k w_k - omega^2 k^2 h NL_k, evaluated with a direct second-difference
// stencil (independent of the tridiagonal path used by the solver).

struct ResidualRow {
  int k = 0;
  double residual_norm = 0, forcing_norm = 0, rel = 0;
};

struct WaveResidualReport {
  std::vector<ResidualRow> rows;
  double total_rel = 0;
  double tail_rel = 0;          // forcing content beyond the extended lattice
  double stencil_agreement = 0; // direct stencil vs tridiagonal apply (max rel gap)
};

namespace detail {
// interior L2 norm (squared) of one mode with the grid quadrature
inline double mode_interior_sq(const std::vector<double>& re, const std::vector<double>& im,
                               const SpaceGrid& g) {
  double s = 0;
  for (int i = 1; i + 1 < g.n_points; ++i) s += g.wq[i] * (re[i] * re[i] + im[i] * im[i]);
  return 2.0 * s;
}
}  // namespace detail

inline WaveResidualReport wave_residual(const EffectiveOperator& op, const Field& w,
                                        bool second_polarization) {
  if (w.ks != op.lat.ext) throw UsageError("wave_residual: w must live on the extended lattice");
  const auto& g = op.grid;
  int kmax = op.lat.k_max;
  int n_t = second_polarization ? 16 * kmax + 7 : 12 * kmax + 3;
  Field nl = nonlinear_field(op, w, second_polarization, op.lat.ext, n_t);

  double w2 = op.lat.omega * op.lat.omega;
  double idx2 = 1.0 / (g.dx * g.dx);
  WaveResidualReport rep;
  double rsum = 0, fsum = 0;
  std::vector<double> rre(g.n_points, 0.0), rim(g.n_points, 0.0);
  std::vector<double> fre(g.n_points, 0.0), fim(g.n_points, 0.0);
  for (int ik = 0; ik < w.nk(); ++ik) {
    int k = w.ks[ik];
    std::fill(rre.begin(), rre.end(), 0.0);
    std::fill(rim.begin(), rim.end(), 0.0);
    for (int i = 1; i + 1 < g.n_points; ++i) {
      double pot = w2 * k * k * (op.V[i] + op.kc.ghat(k, i));
      double lre = -(w.cre(ik, i + 1) - 2.0 * w.cre(ik, i) + w.cre(ik, i - 1)) * idx2 -
                   pot * w.cre(ik, i);
      double lim = -(w.cim(ik, i + 1) - 2.0 * w.cim(ik, i) + w.cim(ik, i - 1)) * idx2 -
                   pot * w.cim(ik, i);
      // the nonlinear coefficient is the SIGNED weight sign*h
      fre[i] = w2 * k * k * op.sign * op.weight.h[i] * nl.cre(ik, i);
      fim[i] = w2 * k * k * op.sign * op.weight.h[i] * nl.cim(ik, i);
      rre[i] = lre - fre[i];
      rim[i] = lim - fim[i];
    }
    ResidualRow row;
    row.k = k;
    row.residual_norm = std::sqrt(detail::mode_interior_sq(rre, rim, g));
    row.forcing_norm = std::sqrt(detail::mode_interior_sq(fre, fim, g));
    row.rel = row.forcing_norm > 0 ? row.residual_norm / row.forcing_norm : 0.0;
    rsum += row.residual_norm * row.residual_norm;
    fsum += row.forcing_norm * row.forcing_norm;
    rep.rows.push_back(row);
  }
  rep.total_rel = fsum > 0 ? std::sqrt(rsum / fsum) : 0.0;

  // cross-check the stencil against the tridiagonal operator on active blocks
  for (int k : op.lat.active) {
    int ik = 0;
    while (w.ks[ik] != k) ++ik;
    std::vector<double> re, im;
    detail::gather_interior(w, ik, re, im);
    auto ar = tri_apply(op.A.at(k), re);
    double num = 0, den = 0;
    for (int i = 0; i < op.ni(); ++i) {
      double pot = w2 * k * k * (op.V[i + 1] + op.kc.ghat(k, i + 1));
      double sten = -(w.cre(ik, i + 2) - 2.0 * w.cre(ik, i + 1) + w.cre(ik, i)) * idx2 -
                    pot * w.cre(ik, i + 1);
      num += (sten - ar[i]) * (sten - ar[i]);
      den += ar[i] * ar[i];
    }
    if (den > 0) rep.stencil_agreement = std::max(rep.stencil_agreement, std::sqrt(num / den));
  }

  // forcing that the extended lattice cannot represent (model truncation)
  std::vector<int> tail;
  for (int k = op.lat.ext.back() + 2; k <= 9 * kmax; k += 2) tail.push_back(k);
  if (!tail.empty()) {
    int n_t_tail = 18 * kmax + 3;
    Field nlt = nonlinear_field(op, w, second_polarization, tail, n_t_tail);
    double tsum = 0;
    std::vector<double> tre(g.n_points), tim(g.n_points);
    for (int ik = 0; ik < nlt.nk(); ++ik) {
      int k = nlt.ks[ik];
      for (int i = 0; i < g.n_points; ++i) {
        tre[i] = w2 * k * k * op.sign * op.weight.h[i] * nlt.cre(ik, i);
        tim[i] = w2 * k * k * op.sign * op.weight.h[i] * nlt.cim(ik, i);
      }
      tsum += detail::mode_interior_sq(tre, tim, g);
    }
    rep.tail_rel = fsum > 0 ? std::sqrt(tsum / fsum) : 0.0;
  }
  return rep;
}

// ---- coefficient-space derivative helpers ----

// d/dt: multiply by i omega k.
inline Field dt_field(const Field& f, double omega) {
  Field out = f;
  for (int ik = 0; ik < f.nk(); ++ik) {
    double wk = omega * f.ks[ik];
    for (int i = 0; i < f.nx; ++i) {
      out.re[std::size_t(ik) * f.nx + i] = -wk * f.cim(ik, i);
      out.im[std::size_t(ik) * f.nx + i] = wk * f.cre(ik, i);
    }
  }
  return out;
}

// (d/dt)^{-1}: multiply by 1 / (i omega k); well-defined on zero-mean content.
inline Field antiderivative_field(const Field& f, double omega) {
  Field out = f;
  for (int ik = 0; ik < f.nk(); ++ik) {
    int k = f.ks[ik];
    if (k == 0) throw UsageError("antiderivative: zero frequency has no antiderivative");
    double wk = omega * k;
    for (int i = 0; i < f.nx; ++i) {
      out.re[std::size_t(ik) * f.nx + i] = f.cim(ik, i) / wk;
      out.im[std::size_t(ik) * f.nx + i] = -f.cre(ik, i) / wk;
    }
  }
  return out;
}

// d/dx: central differences inside, one-sided second order at the ends.
inline Field dx_field(const Field& f, const SpaceGrid& g) {
  Field out = make_field(f.ks, f.nx);
  double i2 = 1.0 / (2.0 * g.dx);
  for (int ik = 0; ik < f.nk(); ++ik) {
    auto d1 = [&](const double* p, int i) {
      if (i == 0) return (-3.0 * p[0] + 4.0 * p[1] - p[2]) * i2;
      if (i == f.nx - 1) return (3.0 * p[i] - 4.0 * p[i - 1] + p[i - 2]) * i2;
      return (p[i + 1] - p[i - 1]) * i2;
    };
    const double* pr = &f.re[std::size_t(ik) * f.nx];
    const double* pi = &f.im[std::size_t(ik) * f.nx];
    for (int i = 0; i < f.nx; ++i) {
      out.re[std::size_t(ik) * f.nx + i] = d1(pr, i);
      out.im[std::size_t(ik) * f.nx + i] = d1(pi, i);
    }
  }
  return out;
}

// ---- electromagnetic field assembly ----
// E = w e_y traveling in z with speed c; B = -(w/c, 0, d/dx of the time
// antiderivative of w); H = B / mu0; D = eps0 (E + P(E)). Vacuum constants
// are normalized, eps0 = mu0 = 1.

struct EMFields {
  Field E_y, B_x, B_z, H_x, H_z, D_y, W_anti;
  double c = 1, eps0 = 1, mu0 = 1;
  bool second_polarization = false;
};

inline EMFields assemble_fields(const EffectiveOperator& op, const Field& w,
                                bool second_polarization, double c) {
  if (w.ks != op.lat.ext)
    throw UsageError("assemble_fields: w must live on the extended lattice");
  EMFields em;
  em.c = c;
  em.second_polarization = second_polarization;
  em.E_y = w;
  em.W_anti = antiderivative_field(w, op.lat.omega);
  em.B_x = w;
  scal(em.B_x, -1.0 / c);
  em.B_z = dx_field(em.W_anti, op.grid);
  scal(em.B_z, -1.0);
  em.H_x = em.B_x;
  em.H_z = em.B_z;  // mu0 = 1

  int kmax = op.lat.k_max;
  int n_t = second_polarization ? 16 * kmax + 7 : 12 * kmax + 3;
  Field nl = nonlinear_field(op, w, second_polarization, op.lat.ext, n_t);
  em.D_y = make_field(op.lat.ext, w.nx);
  double ic2 = 1.0 / (c * c);
  for (int ik = 0; ik < w.nk(); ++ik) {
    int k = w.ks[ik];
    for (int i = 0; i < w.nx; ++i) {
      double lin = op.V[i] + ic2 + op.kc.ghat(k, i);  // 1 + g0 + Ghat_k
      double hs = op.sign * op.weight.h[i];            // signed cubic coefficient
      em.D_y.re[std::size_t(ik) * w.nx + i] =
          em.eps0 * (lin * w.cre(ik, i) + hs * nl.cre(ik, i));
      em.D_y.im[std::size_t(ik) * w.nx + i] =
          em.eps0 * (lin * w.cim(ik, i) + hs * nl.cim(ik, i));
    }
  }
  return em;
}

// ---- Maxwell residuals on the assembled fields ----
// Everything is evaluated in coefficient space with the same derivative
// stencils used during assembly; residuals are relative to ||dD_y/dt||.

struct MaxwellReport {
  double faraday_x = 0, faraday_y = 0, faraday_z = 0;
  double ampere_x = 0, ampere_y = 0, ampere_z = 0;
  double div_b = 0, div_d = 0;
  double scale = 0;
  double worst() const {
    return std::max({faraday_x, faraday_y, faraday_z, ampere_x, ampere_y, ampere_z,
                     div_b, div_d});
  }
};

inline MaxwellReport maxwell_residuals(const EffectiveOperator& op, const EMFields& em) {
  const auto& g = op.grid;
  double omega = op.lat.omega;
  MaxwellReport rep;
  Field dtD = dt_field(em.D_y, omega);
  rep.scale = field_norm(dtD, g);
  double s = rep.scale > 0 ? rep.scale : 1.0;

  // Faraday, x: (curl E)_x = -dE_y/dz = (1/c) dE_y/dt; plus dB_x/dt
  {
    Field ce = dt_field(em.E_y, omega);
    scal(ce, 1.0 / em.c);
    Field r = lincomb(1.0, ce, 1.0, dt_field(em.B_x, omega));
    rep.faraday_x = field_norm(r, g) / s;
  }
  // Faraday, y: both sides vanish for this ansatz
  rep.faraday_y = 0.0;
  // Faraday, z: (curl E)_z = dE_y/dx; plus dB_z/dt
  {
    Field r = lincomb(1.0, dx_field(em.E_y, g), 1.0, dt_field(em.B_z, omega));
    rep.faraday_z = field_norm(r, g) / s;
  }
  // div B = dB_x/dx + dB_z/dz
  {
    Field dzBz = dt_field(em.B_z, omega);
    scal(dzBz, -1.0 / em.c);
    Field r = lincomb(1.0, dx_field(em.B_x, g), 1.0, dzBz);
    rep.div_b = field_norm(r, g) / s;
  }
  // div D = dD_y/dy = 0 identically (no y dependence)
  rep.div_d = 0.0;
  // Ampere, y: (curl H)_y = dH_x/dz - dH_z/dx; minus dD_y/dt
  {
    Field dzHx = dt_field(em.H_x, omega);
    scal(dzHx, -1.0 / em.c);
    Field curl_y = lincomb(1.0, dzHx, -1.0, dx_field(em.H_z, g));
    Field r = lincomb(1.0, curl_y, -1.0, dtD);
    rep.ampere_y = field_norm(r, g) / s;
  }
  // Ampere, x and z: all contributing components vanish for this ansatz
  rep.ampere_x = 0.0;
  rep.ampere_z = 0.0;
  return rep;
}

// ---- energy transport diagnostic ----
// Time-averaged Poynting vector S = E x H: <S_x> = <E_y H_z>, <S_z> = -<E_y H_x>.

struct PoyntingReport {
  std::vector<double> Sx_avg, Sz_avg;  // profiles over x
  double flux_z = 0;                   // integral of <S_z>
};

inline PoyntingReport poynting(const EMFields& em, const SpaceGrid& g) {
  PoyntingReport rep;
  rep.Sx_avg.assign(g.n_points, 0.0);
  rep.Sz_avg.assign(g.n_points, 0.0);
  for (int ik = 0; ik < em.E_y.nk(); ++ik)
    for (int i = 0; i < g.n_points; ++i) {
      rep.Sx_avg[i] += 2.0 * (em.E_y.cre(ik, i) * em.H_z.cre(ik, i) +
                              em.E_y.cim(ik, i) * em.H_z.cim(ik, i));
      rep.Sz_avg[i] -= 2.0 * (em.E_y.cre(ik, i) * em.H_x.cre(ik, i) +
                              em.E_y.cim(ik, i) * em.H_x.cim(ik, i));
    }
  for (int i = 0; i < g.n_points; ++i) rep.flux_z += g.wq[i] * rep.Sz_avg[i];
  return rep;
}

// ---- nested-grid interpolation for refinement checks ----
// The refined grid has 2n-1 points (old nodes kept). New midpoints are
// interpolated cubically inside each constant piece of V and linearly across
// discontinuities (where the profile is only C^1).

inline Field refine_field_piecewise(const Field& f, const SpaceGrid& g_old,
                                    const SpaceGrid& g_new,
                                    const std::vector<double>& V_old) {
  int n = g_old.n_points;
  if (g_new.n_points != 2 * n - 1)
    throw UsageError("refine_field_piecewise: refined grid must have 2n-1 nested points");
  double vscale = 0;
  for (double v : V_old) vscale = std::max(vscale, std::abs(v));
  double tol = 1e-9 * std::max(1.0, vscale);
  std::vector<int> run(n, 0);
  for (int i = 1; i < n; ++i)
    run[i] = run[i - 1] + (std::abs(V_old[i] - V_old[i - 1]) > tol ? 1 : 0);

  Field out = make_field(f.ks, g_new.n_points);
  for (int ik = 0; ik < f.nk(); ++ik) {
    const double* pr = &f.re[std::size_t(ik) * n];
    const double* pi = &f.im[std::size_t(ik) * n];
    double* qr = &out.re[std::size_t(ik) * g_new.n_points];
    double* qi = &out.im[std::size_t(ik) * g_new.n_points];
    for (int i = 0; i < n; ++i) {
      qr[2 * i] = pr[i];
      qi[2 * i] = pi[i];
    }
    auto mid = [&](const double* p, int i) {
      if (run[i] != run[i + 1]) return 0.5 * (p[i] + p[i + 1]);  // across a jump: C^1 only
      bool left_ok = i - 1 >= 0 && run[i - 1] == run[i];
      bool right_ok = i + 2 < n && run[i + 2] == run[i];
      if (left_ok && right_ok)
        return (-p[i - 1] + 9.0 * p[i] + 9.0 * p[i + 1] - p[i + 2]) / 16.0;
      if (right_ok) return (3.0 * p[i] + 6.0 * p[i + 1] - p[i + 2]) / 8.0;
      if (left_ok) return (-p[i - 1] + 6.0 * p[i] + 3.0 * p[i + 1]) / 8.0;
      return 0.5 * (p[i] + p[i + 1]);
    };
    for (int i = 0; i + 1 < n; ++i) {
      qr[2 * i + 1] = mid(pr, i);
      qi[2 * i + 1] = mid(pi, i);
    }
  }
  return out;
}

// Synthesize one time slice of a coefficient field.
inline std::vector<double> field_time_slice(const Field& f, double omega, double t) {
  std::vector<double> out(f.nx, 0.0);
  for (int ik = 0; ik < f.nk(); ++ik) {
    double ph = omega * f.ks[ik] * t;
    double cp = std::cos(ph), sp = std::sin(ph);
    for (int i = 0; i < f.nx; ++i)
      out[i] += 2.0 * (f.cre(ik, i) * cp - f.cim(ik, i) * sp);
  }
  return out;
}

}  // namespace breather
