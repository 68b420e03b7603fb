#include "caloron/hymflow.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>

#include "stencil.hpp"

namespace caloron {

using stencil::Strides;
using stencil::axis_diff;
using stencil::metric_du;
using stencil::metric_dw;
using stencil::phi_diff;

namespace {

constexpr cplx kI{0.0, 1.0};

double sigma_fast(const CMat& h1, const CMat& h2) {
  int n = static_cast<int>(h1.rows());
  CMat a = h1.inverse() * h2;
  return a.trace().real() + a.inverse().trace().real() - 2.0 * n;
}

// 2x2 register kernels for the hot loops: no dynamic-size dispatch, no
// temporaries. Layout [a b; c d].
struct M2 {
  cplx a, b, c, d;
};
template <typename MapT>
inline M2 load2(const MapT& m) {
  return {m(0, 0), m(0, 1), m(1, 0), m(1, 1)};
}
inline void store2(CMap m, const M2& x) {
  m(0, 0) = x.a;
  m(0, 1) = x.b;
  m(1, 0) = x.c;
  m(1, 1) = x.d;
}
inline M2 operator+(const M2& x, const M2& y) {
  return {x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d};
}
inline M2 operator-(const M2& x, const M2& y) {
  return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d};
}
inline M2 operator*(cplx s, const M2& x) { return {s * x.a, s * x.b, s * x.c, s * x.d}; }
inline M2 mul2(const M2& x, const M2& y) {
  return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c,
          x.c * y.b + x.d * y.d};
}
inline M2 adj2(const M2& x) {
  return {std::conj(x.a), std::conj(x.c), std::conj(x.b), std::conj(x.d)};
}
inline M2 inv2(const M2& x) {
  cplx det = x.a * x.d - x.b * x.c;
  return {x.d / det, -x.b / det, -x.c / det, x.a / det};
}
// spectral log of a Hermitian positive definite M2
inline M2 logpd2(const M2& s) {
  double m = 0.5 * (s.a.real() + s.d.real());
  double dh = 0.5 * (s.a.real() - s.d.real());
  double q = std::sqrt(dh * dh + std::norm(s.b));
  if (q < 1e-14 * m) {
    double lm = std::log(m);
    return {lm + (s.a.real() - m) / m, s.b / m, s.c / m, lm + (s.d.real() - m) / m};
  }
  double l1 = std::log(m + q), l2 = std::log(m - q);
  double avg = 0.5 * (l1 + l2), sl = 0.5 * (l1 - l2) / q;
  return {avg + sl * (s.a.real() - m), sl * s.b, sl * s.c, avg + sl * (s.d.real() - m)};
}
// exp(X) = e^t (cosh(q) I + sinh(q)/q (X - t I)), t = tr/2, q^2 = t^2 - det
inline M2 exp2(const M2& x) {
  cplx tm = 0.5 * (x.a + x.d);
  cplx det = x.a * x.d - x.b * x.c;
  cplx q = std::sqrt(tm * tm - det);
  cplx ch, shq;
  if (std::abs(q) < 1e-4) {
    cplx q2 = q * q;
    ch = 1.0 + q2 * (0.5 + q2 / 24.0);
    shq = 1.0 + q2 * (1.0 / 6.0 + q2 / 120.0);
  } else {
    ch = std::cosh(q);
    shq = std::sinh(q) / q;
  }
  cplx em = std::exp(tm);
  return {em * (ch + shq * (x.a - tm)), em * shq * x.b, em * shq * x.c,
          em * (ch + shq * (x.d - tm))};
}

// n = 2 specialization of the flow tensor; numerically identical to the
// generic path, entirely in register kernels.
//
// The principal (Laplacian) part uses compact half-point fluxes
// ((H_i + H_{i+1})/2)^{-1} (H_{i+1} - H_i)/h differenced over adjacent
// cells: a wide nested-central form has odd-even null modes that the flow
// cannot damp, and the resulting checkerboard component of H dominates the
// curvature error. The first-order cross terms and the eta coupling keep
// node-centered central differences.
MatrixField hym_tensor2(const MatrixField& h, const EtaCache& cache) {
  const ProductGrid& g = h.grid();
  const int nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  const Strides st(g);
  const bool ez = cache.zero();
  const cplx half(0.5, 0.0), ihalf(0.0, 0.5), mihalf(0.0, -0.5);
  const double hw = g.hw(), hu = g.hu(), hf = g.hphi();
  const double ihw = 1.0 / (2.0 * hw), ihu = 1.0 / (2.0 * hu), ihf = 1.0 / (2.0 * hf);
  const std::vector<double>& a = cache.a();
  // exponential u-ghost factors exp(+-(a_r + a_c) h_u) entrywise
  M2 gup, gdn;
  {
    double s00 = 2.0 * a[0] * hu, s01 = (a[0] + a[1]) * hu, s11 = 2.0 * a[1] * hu;
    gup = {std::exp(s00), std::exp(s01), std::exp(s01), std::exp(s11)};
    gdn = {std::exp(-s00), std::exp(-s01), std::exp(-s01), std::exp(-s11)};
  }
  auto had = [](const M2& x, const M2& y) -> M2 {
    return {x.a * y.a, x.b * y.b, x.c * y.c, x.d * y.d};
  };

  MatrixField vx(g, 2), vy(g, 2), vu(g, 2), vf(g, 2), gf(g, 2);
  MatrixField sx(g, 2), sy(g, 2), su(g, 2), sf(g, 2);
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < nw; ++i)
    for (int j = 0; j < nw; ++j)
      for (int k = 0; k < nu; ++k)
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          M2 hm = load2(h.at(id));
          M2 hinv = inv2(hm);
          M2 lox = (i > 0) ? load2(h.at(id - st.si)) : hm;
          M2 hix = (i < nw - 1) ? load2(h.at(id + st.si)) : hm;
          M2 loy = (j > 0) ? load2(h.at(id - st.sj)) : hm;
          M2 hiy = (j < nw - 1) ? load2(h.at(id + st.sj)) : hm;
          M2 lou = (k > 0) ? load2(h.at(id - st.sk)) : had(hm, gdn);
          M2 hiu = (k < nu - 1) ? load2(h.at(id + st.sk)) : had(hm, gup);
          int lm = (l + nphi - 1) % nphi, lp = (l + 1) % nphi;
          M2 lof = load2(h.at(g.idx(i, j, k, lm)));
          M2 hif = load2(h.at(g.idx(i, j, k, lp)));
          store2(vx.at(id), mul2(hinv, cplx(ihw) * (hix - lox)));
          store2(vy.at(id), mul2(hinv, cplx(ihw) * (hiy - loy)));
          store2(vu.at(id), mul2(hinv, cplx(ihu) * (hiu - lou)));
          store2(vf.at(id), mul2(hinv, cplx(ihf) * (hif - lof)));
          if (!ez)
            store2(gf.at(id), mul2(hinv, mul2(adj2(load2(cache.eta().at(id))), hm)));
          auto flux = [&](const M2& nb, double hh) -> M2 {
            return mul2(inv2(half * (hm + nb)), cplx(1.0 / hh) * (nb - hm));
          };
          if (i < nw - 1) store2(sx.at(id), flux(hix, hw));
          if (j < nw - 1) store2(sy.at(id), flux(hiy, hw));
          if (k < nu - 1) store2(su.at(id), flux(hiu, hu));
          store2(sf.at(id), flux(hif, hf));
        }

  MatrixField b(g, 2);
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 1; i < nw - 1; ++i)
    for (int j = 1; j < nw - 1; ++j) {
      const cplx cw(g.sphere_factor(i, j), 0.0);
      for (int k = 1; k < nu - 1; ++k) {
        const double uu = g.u(k);
        const cplx q(0.25 * uu * uu, 0.0);
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          int lm = (l + nphi - 1) % nphi, lp = (l + 1) % nphi;
          size_t idm = g.idx(i, j, k, lm), idp = g.idx(i, j, k, lp);
          // u^2/4 [ (d_u V_u + d_f V_f) + i (d_f V_u - d_u V_f) ]
          M2 lap_z = cplx(1.0 / hu) * (load2(su.at(id)) - load2(su.at(id - st.sk))) +
                     cplx(1.0 / hf) * (load2(sf.at(id)) - load2(sf.at(idm)));
          M2 cross_z = cplx(ihf) * (load2(vu.at(idp)) - load2(vu.at(idm))) -
                       cplx(ihu) * (load2(vf.at(id + st.sk)) - load2(vf.at(id - st.sk)));
          M2 zterm = q * (lap_z + kI * cross_z);
          // 1/4 [ (d_x V_x + d_y V_y) + i (d_y V_x - d_x V_y) ]
          M2 lap_w = cplx(1.0 / hw) * ((load2(sx.at(id)) - load2(sx.at(id - st.si))) +
                                       (load2(sy.at(id)) - load2(sy.at(id - st.sj))));
          M2 cross_w =
              cplx(ihw) * ((load2(vx.at(id + st.sj)) - load2(vx.at(id - st.sj))) -
                           (load2(vy.at(id + st.si)) - load2(vy.at(id - st.si))));
          M2 dwbar_vw = cplx(0.25) * (lap_w + kI * cross_w);
          if (ez) {
            store2(b.at(id), zterm + cw * dwbar_vw);
            continue;
          }
          M2 dg_x = cplx(ihw) * (load2(gf.at(id + st.si)) - load2(gf.at(id - st.si)));
          M2 dg_y = cplx(ihw) * (load2(gf.at(id + st.sj)) - load2(gf.at(id - st.sj)));
          M2 dwbar_g = half * dg_x + ihalf * dg_y;
          M2 eta = load2(cache.eta().at(id));
          M2 vwn = half * load2(vx.at(id)) + mihalf * load2(vy.at(id));
          M2 ca = vwn - load2(gf.at(id));
          M2 br = mul2(eta, ca) - mul2(ca, eta);
          store2(b.at(id),
                 zterm + cw * (dwbar_vw - dwbar_g - load2(cache.deta_dw().at(id)) + br));
        }
      }
    }
  return b;
}

double dist_fast(const CMat& h1, const CMat& h2) {
  Eigen::LLT<CMat> llt(h1);
  CMat l = llt.matrixL();
  CMat s = l.triangularView<Eigen::Lower>().solve(h2);
  s = l.triangularView<Eigen::Lower>().solve(CMat(s.adjoint())).adjoint();
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(s), Eigen::EigenvaluesOnly);
  double acc = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double lg = std::log(std::max(es.eigenvalues()[i], 1e-300));
    acc += lg * lg;
  }
  return std::sqrt(acc);
}

}  // namespace

EtaCache::EtaCache(const ProductGrid& g, const EtaField& e)
    : eta_(g, e.dim), deta_(g, e.dim), a_(e.a), zero_(e.is_zero()) {
  a_.resize(static_cast<size_t>(e.dim), 0.0);
  if (zero_) return;
  const int nw = g.nw(), nu = g.nu(), nphi = g.nphi();
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < nw; ++i)
    for (int j = 0; j < nw; ++j) {
      std::vector<CMat> ck(static_cast<size_t>(e.K) + 1), dk(static_cast<size_t>(e.K) + 1);
      for (int k = 0; k <= e.K; ++k) {
        ck[static_cast<size_t>(k)] = e.coeff_eval(k, g.w(i, j));
        dk[static_cast<size_t>(k)] = e.coeff_dw_eval(k, g.w(i, j));
      }
      for (int k = 0; k < nu; ++k)
        for (int l = 0; l < nphi; ++l) {
          cplx z = g.z(k, l);
          CMat v = ck[static_cast<size_t>(e.K)], dv = dk[static_cast<size_t>(e.K)];
          for (int m = e.K - 1; m >= 0; --m) {
            v = v * z + ck[static_cast<size_t>(m)];
            dv = dv * z + dk[static_cast<size_t>(m)];
          }
          eta_.at(i, j, k, l) = v;
          deta_.at(i, j, k, l) = dv;
        }
    }
}

MatrixField initial_metric(const std::vector<double>& a, const ProductGrid& g) {
  const int n = static_cast<int>(a.size());
  MatrixField h(g, n);
  const int nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  for (int i = 0; i < nw; ++i)
    for (int j = 0; j < nw; ++j)
      for (int k = 0; k < nu; ++k) {
        CMat m = CMat::Zero(n, n);
        for (int d = 0; d < n; ++d) m(d, d) = std::exp(2.0 * a[static_cast<size_t>(d)] * g.u(k));
        for (int l = 0; l < nphi; ++l) h.at(i, j, k, l) = m;
      }
  return h;
}

MatrixField initial_metric(const LoopAlgebraElement& xi0, const ProductGrid& g) {
  xi0.validate();
  if (!xi0.is_constant())
    throw std::invalid_argument("initial_metric: xi0 must be constant (use orbit_canonical)");
  const CMat& m = xi0.mode(0);
  std::vector<double> a(static_cast<size_t>(xi0.dim));
  for (int r = 0; r < xi0.dim; ++r)
    for (int c = 0; c < xi0.dim; ++c) {
      if (r != c && std::abs(m(r, c)) > 1e-12)
        throw std::invalid_argument("initial_metric: xi0 must be diagonal");
      if (r == c) a[static_cast<size_t>(r)] = (kI * m(r, c)).real();
    }
  return initial_metric(a, g);
}

MatrixField hym_tensor(const MatrixField& h, const EtaCache& cache) {
  if (h.n() == 2) return hym_tensor2(h, cache);
  const ProductGrid& g = h.grid();
  const int n = h.n(), nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  const Strides st(g);
  const double hw = g.hw(), hu = g.hu(), hf = g.hphi();

  MatrixField vx(g, n), vy(g, n), vu(g, n), vf(g, n), gf(g, n);
  MatrixField sx(g, n), sy(g, n), su(g, n), sf(g, n);
  const bool ez = cache.zero();

  // Pass 1: node-centered log-derivatives V_mu = H^{-1} d_mu H (ghost
  // extension past the Dirichlet edges) for the first-order cross terms and
  // the eta coupling, plus compact half-point fluxes
  // ((H_i + H_{i+1})/2)^{-1} (H_{i+1} - H_i)/h for the principal part —
  // the wide nested-central form has odd-even null modes that leave an
  // undamped checkerboard component in the converged metric.
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < nw; ++i)
    for (int j = 0; j < nw; ++j)
      for (int k = 0; k < nu; ++k)
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          CMat hm = h.at(id);
          CMat hinv = hm.inverse();
          vx.at(id) = hinv * metric_dw(h, id, st.si, i, nw, hw);
          vy.at(id) = hinv * metric_dw(h, id, st.sj, j, nw, hw);
          vu.at(id) = hinv * metric_du(h, id, st.sk, k, nu, hu, cache.a());
          vf.at(id) = hinv * phi_diff(h, g, i, j, k, l);
          if (!ez) gf.at(id) = hinv * (CMat(cache.eta().at(id)).adjoint() * hm);
          auto flux = [&](size_t nb, double hh) {
            CMat hn = h.at(nb);
            return CMat(CMat(0.5 * (hm + hn)).inverse() * ((hn - hm) / hh));
          };
          if (i < nw - 1) sx.at(id) = flux(id + st.si, hw);
          if (j < nw - 1) sy.at(id) = flux(id + st.sj, hw);
          if (k < nu - 1) su.at(id) = flux(id + st.sk, hu);
          sf.at(id) = flux(g.idx(i, j, k, (l + 1) % nphi), hf);
        }

  // Pass 2: assemble B at interior nodes.
  MatrixField b(g, n);
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 1; i < nw - 1; ++i)
    for (int j = 1; j < nw - 1; ++j) {
      const double cw = g.sphere_factor(i, j);
      for (int k = 1; k < nu - 1; ++k) {
        const double uu = g.u(k);
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          size_t idm = g.idx(i, j, k, (l + nphi - 1) % nphi);
          // u^2/4 [ (d_u V_u + d_f V_f) + i (d_f V_u - d_u V_f) ]
          CMat lap_z = (CMat(su.at(id)) - CMat(su.at(id - st.sk))) / hu +
                       (CMat(sf.at(id)) - CMat(sf.at(idm))) / hf;
          CMat cross_z = phi_diff(vu, g, i, j, k, l) - axis_diff(vf, id, st.sk, k, nu, hu);
          CMat zterm = (0.25 * uu * uu) * (lap_z + kI * cross_z);
          // 1/4 [ (d_x V_x + d_y V_y) + i (d_y V_x - d_x V_y) ]
          CMat lap_w = ((CMat(sx.at(id)) - CMat(sx.at(id - st.si))) +
                        (CMat(sy.at(id)) - CMat(sy.at(id - st.sj)))) /
                       hw;
          CMat cross_w = axis_diff(vx, id, st.sj, j, nw, hw) -
                         axis_diff(vy, id, st.si, i, nw, hw);
          CMat dwbar_vw = 0.25 * (lap_w + kI * cross_w);
          if (ez) {
            b.at(id) = zterm + cw * dwbar_vw;
            continue;
          }
          CMat dg_x = axis_diff(gf, id, st.si, i, nw, hw);
          CMat dg_y = axis_diff(gf, id, st.sj, j, nw, hw);
          CMat dwbar_g = 0.5 * (dg_x + kI * dg_y);
          CMat eta = cache.eta().at(id);
          CMat vwn = 0.5 * (CMat(vx.at(id)) - kI * CMat(vy.at(id)));
          CMat comm_arg = vwn - CMat(gf.at(id));
          CMat br = eta * comm_arg - comm_arg * eta;
          b.at(id) = zterm + cw * (dwbar_vw - dwbar_g - CMat(cache.deta_dw().at(id)) + br);
        }
      }
    }
  return b;
}

double cfl_coefficient_max(const ProductGrid& g) {
  double cmax = 0.0;
  const double ihu2 = 1.0 / (g.hu() * g.hu());
  const double ihf2 = 1.0 / (g.hphi() * g.hphi());
  const double ihw2 = 1.0 / (g.hw() * g.hw());
  for (int i = 0; i < g.nw(); ++i)
    for (int j = 0; j < g.nw(); ++j)
      for (int k = 0; k < g.nu(); ++k) {
        double c =
            4.0 * (g.u(k) * g.u(k) * (ihu2 + ihf2) + g.sphere_factor(i, j) * ihw2);
        cmax = std::max(cmax, c);
      }
  return cmax;
}

namespace {

// Applies one explicit update given a precomputed B field. Returns the sup
// of |B|_H over interior nodes (measured before the update) and accumulates
// int |B|^2 dvol. dt_for(id) supplies the (possibly node-local) step.
template <typename DtFn>
double apply_step(MatrixField& h, const MatrixField& b, double& energy, DtFn dt_for) {
  const ProductGrid& g = h.grid();
  const int nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  double sup = 0.0;
  double en = 0.0;
#pragma omp parallel for collapse(2) schedule(static) reduction(max : sup) reduction(+ : en)
  for (int i = 1; i < nw - 1; ++i)
    for (int j = 1; j < nw - 1; ++j)
      for (int k = 1; k < nu - 1; ++k) {
        double vol = g.volume_weight(i, j, k);
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          CMat hm = h.at(id);
          CMat bm = b.at(id);
          CMat bhat = 0.5 * (bm + hm.inverse() * bm.adjoint() * hm);
          double b2 = std::max(0.0, (bhat * bhat).trace().real());
          sup = std::max(sup, b2);
          en += b2 * vol;
          double dt = dt_for(i, j, k);
          if (dt != 0.0) h.at(id) = hermitize(hm * expm(dt * bhat));
        }
      }
  energy = en;
  return std::sqrt(sup);
}

// Spectral log of a Hermitian positive definite matrix, no validity checks
// (hot path of the accelerated solver; inputs are products of PD factors).
CMat herm_log_fast(const CMat& s) {
  const int n = static_cast<int>(s.rows());
  if (n == 2) {
    double m = 0.5 * (s(0, 0).real() + s(1, 1).real());
    double dh = 0.5 * (s(0, 0).real() - s(1, 1).real());
    double q = std::sqrt(dh * dh + std::norm(s(0, 1)));
    CMat out(2, 2);
    if (q < 1e-14 * m) {
      // nearly scalar: log(S) = log(m) I + (S - m I)/m to first order
      out = (s - m * CMat::Identity(2, 2)) / m;
      out(0, 0) += std::log(m);
      out(1, 1) += std::log(m);
      return out;
    }
    double l1 = std::log(m + q), l2 = std::log(m - q);
    double avg = 0.5 * (l1 + l2), slope = 0.5 * (l1 - l2) / q;
    out = slope * (s - m * CMat::Identity(2, 2));
    out(0, 0) += avg;
    out(1, 1) += avg;
    return hermitize(out);
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(s);
  return hermitize(es.eigenvectors() *
                   es.eigenvalues().array().log().matrix().asDiagonal() *
                   es.eigenvectors().adjoint());
}

// One backward step of the flow solved by momentum-accelerated node-local
// relaxation of G(H) = B(H) - Q/dt, Q = log(H_n^{-1} H) evaluated as
// H_n^{-1/2} log(H_n^{-1/2} H H_n^{-1/2}) H_n^{1/2} (exactly H-self-adjoint,
// so the multiplicative update preserves positivity). The shift 1/dt enters
// the local step size; momentum accelerates the smooth error modes.
struct ProxWorkspace {
  MatrixField sq, isq, mom;
  ProxWorkspace(const ProductGrid& g, int n) : sq(g, n), isq(g, n), mom(g, n) {}
};

long prox_backward_step(MatrixField& h, const MatrixField& base, const EtaCache& cache,
                        ProxWorkspace& ws, double dt, double inner_tol, long max_inner) {
  const ProductGrid& g = h.grid();
  const int nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  const double ihu2 = 1.0 / (g.hu() * g.hu());
  const double ihf2 = 1.0 / (g.hphi() * g.hphi());
  const double ihw2 = 1.0 / (g.hw() * g.hw());
  const double omega = 0.9, beta = 0.9;

  // The momentum field is deliberately left warm across outer steps; the
  // inner objective changes smoothly with dt and the carried direction
  // saves most of the re-acceleration cost on stiff grids.
#pragma omp parallel for schedule(static)
  for (long id = 0; id < static_cast<long>(g.num_nodes()); ++id) {
    size_t s = static_cast<size_t>(id);
    CMat l = herm_log_fast(base.at(s));
    ws.sq.at(s) = herm_exp(0.5 * l);
    ws.isq.at(s) = herm_exp(-0.5 * l);
  }

  const bool two = h.n() == 2;
  long inner = 0;
  double first_g = 0.0;
  while (inner < max_inner) {
    MatrixField b = hym_tensor(h, cache);
    double supg = 0.0;
#pragma omp parallel for collapse(2) schedule(static) reduction(max : supg)
    for (int i = 1; i < nw - 1; ++i)
      for (int j = 1; j < nw - 1; ++j)
        for (int k = 1; k < nu - 1; ++k) {
          double uu = g.u(k);
          double diag = g.sphere_factor(i, j) * ihw2 + 2.0 * uu * uu * (ihu2 + ihf2);
          double dloc = omega / (diag + 1.0 / dt);
          double idt = 1.0 / dt;
          for (int l = 0; l < nphi; ++l) {
            size_t id = g.idx(i, j, k, l);
            if (two) {
              M2 hm = load2(h.at(id));
              M2 bm = load2(b.at(id));
              M2 bh = mul2(inv2(hm), mul2(adj2(bm), hm));
              M2 is = load2(ws.isq.at(id));
              M2 qm = mul2(is, mul2(logpd2(mul2(is, mul2(hm, is))), load2(ws.sq.at(id))));
              M2 gm = {0.5 * (bm.a + bh.a) - idt * qm.a, 0.5 * (bm.b + bh.b) - idt * qm.b,
                       0.5 * (bm.c + bh.c) - idt * qm.c, 0.5 * (bm.d + bh.d) - idt * qm.d};
              double g2 = (gm.a * gm.a + 2.0 * gm.b * gm.c + gm.d * gm.d).real();
              if (!std::isfinite(g2)) g2 = std::numeric_limits<double>::infinity();
              supg = std::max(supg, g2);
              M2 mom = load2(ws.mom.at(id));
              M2 pn = {beta * mom.a + dloc * gm.a, beta * mom.b + dloc * gm.b,
                       beta * mom.c + dloc * gm.c, beta * mom.d + dloc * gm.d};
              store2(ws.mom.at(id), pn);
              M2 hn = mul2(hm, exp2(pn));
              store2(h.at(id), {cplx(hn.a.real(), 0.0), 0.5 * (hn.b + std::conj(hn.c)),
                                0.5 * (hn.c + std::conj(hn.b)), cplx(hn.d.real(), 0.0)});
            } else {
              CMat hm = h.at(id);
              CMat bm = b.at(id);
              CMat bhat = 0.5 * (bm + hm.inverse() * bm.adjoint() * hm);
              CMat is = ws.isq.at(id);
              CMat q = is * herm_log_fast(CMat(is * hm * is)) * CMat(ws.sq.at(id));
              CMat gm = bhat - q / dt;
              double g2 = (gm * gm).trace().real();
              if (!std::isfinite(g2)) g2 = std::numeric_limits<double>::infinity();
              supg = std::max(supg, g2);
              CMat pn = beta * CMat(ws.mom.at(id)) + dloc * gm;
              ws.mom.at(id) = pn;
              h.at(id) = hermitize(hm * expm(pn));
            }
          }
        }
    ++inner;
    // signal inner divergence (overflow or runaway growth); H is poisoned
    // past this point, so the caller must restore from base and retry
    if (inner == 1) first_g = std::sqrt(supg);
    if (!std::isfinite(supg) || std::sqrt(supg) > 1e8 * (first_g + 1e-300)) return -inner;
    if (std::sqrt(supg) < inner_tol) break;
  }
  return inner;
}

FlowDiagnostics run_flow_accelerated(MetricField& h, const EtaCache& cache,
                                     const FlowConfig& cfg,
                                     const std::function<void(double, double)>& sample,
                                     FlowDiagnostics& diag,
                                     const std::function<std::pair<double, double>()>& measure) {
  const ProductGrid& g = h.h.grid();
  ProxWorkspace ws(g, h.h.n());
  const bool trace = std::getenv("CALORON_FLOW_TRACE") != nullptr;
  double dt = 0.5;
  double prev_sup = std::numeric_limits<double>::infinity();
  int rising = 0;
  bool first = true;
  while (h.iter < cfg.max_iters && h.t < cfg.t_max * (1.0 - 1e-12)) {
    auto [sup, en] = measure();
    if (trace)
      std::fprintf(stderr, "flow: t=%.3f iter=%ld sup|B|=%.3e next_dt=%.1f\n", h.t,
                   h.iter, sup, dt);
    if (!first) {
      sample(sup, en);
      if (sup < cfg.tol_b) {
        diag.converged = true;
        return diag;
      }
      if (sup > prev_sup * (1.0 + 1e-12)) {
        if (++rising >= 3) {
          diag.abort_reason = "divergence: sup|B| grew for 3 consecutive checks";
          return diag;
        }
      } else {
        rising = 0;
      }
      prev_sup = sup;
    }
    first = false;
    double step = std::min(dt, cfg.t_max - h.t);
    double inner_tol = std::max(0.02 * sup, 0.3 * cfg.tol_b);
    MatrixField base = h.h;
    long used = prox_backward_step(h.h, base, cache, ws, step, inner_tol,
                                   cfg.max_iters - h.iter);
    if (used < 0) {
      // inner relaxation diverged: roll back, drop the stale momentum, and
      // retry the interval with a quarter of the step
      h.iter += -used;
      h.h = base;
      ws.mom.fill(CMat::Zero(h.h.n(), h.h.n()));
      dt *= 0.25;
      if (dt < 1e-3) {
        diag.abort_reason = "inner relaxation diverged at the minimum step size";
        return diag;
      }
      continue;
    }
    h.iter += used;
    h.t += step;
    dt *= 2.0;
  }
  auto [sup, en] = measure();
  sample(sup, en);
  diag.converged = sup < cfg.tol_b;
  if (!diag.converged) diag.abort_reason = "t_max or max_iters reached before convergence";
  return diag;
}

}  // namespace

MetricField flow_step(const MetricField& h, const EtaCache& cache, double dt) {
  MetricField out;
  out.h = h.h;
  out.t = h.t + dt;
  out.iter = h.iter + 1;
  MatrixField b = hym_tensor(h.h, cache);
  double en = 0.0;
  apply_step(out.h, b, en, [dt](int, int, int) { return dt; });
  return out;
}

FlowDiagnostics run_flow(MetricField& h, const EtaCache& cache,
                         const std::vector<double>& a, const FlowConfig& cfg) {
  const ProductGrid& g = h.h.grid();
  FlowDiagnostics diag;

  const double cmax = cfl_coefficient_max(g);
  const double dt_global = cfg.dt > 0.0 ? cfg.dt : cfg.cfl_safety / cmax;
  if (cfg.dt > 0.0 && cfg.dt > cfg.cfl_safety / cmax * (1.0 + 1e-12) && !cfg.accelerated)
    throw std::invalid_argument("run_flow: dt above the CFL bound");

  MatrixField snapshot = h.h;
  double prev_sup = std::numeric_limits<double>::infinity();
  int rising = 0;

  auto check_positivity = [&]() {
    for (size_t id = 0; id < g.num_nodes(); ++id) {
      CMat m = h.h.at(id);
      if (!is_hermitian(m, 1e-10 * std::max(1.0, m.norm())) ||
          Eigen::LLT<CMat>(m).info() != Eigen::Success)
        throw std::runtime_error("flow: positivity loss at node " + std::to_string(id) +
                                 ", t=" + std::to_string(h.t));
    }
  };

  auto sample_monitors = [&](double sup_b, double energy_b) {
    check_positivity();
    FlowSample s;
    s.t = h.t;
    s.iter = h.iter;
    s.sup_b = sup_b;
    s.energy_b = energy_b;
    s.sigma_drift = sup_sigma(h.h, snapshot);
    s.dist_ratio = dist_ratio(h.h, a);
    diag.series.push_back(s);
    snapshot = h.h;
  };

  // eta == 0 starting from H_xi: already stationary, verify and return.
  // A perturbed start still flows through the main loop below.
  if (cache.zero()) {
    MatrixField b = hym_tensor(h.h, cache);
    double en = 0.0;
    double sup = apply_step(h.h, b, en, [](int, int, int) { return 0.0; });
    if (sup < std::max(cfg.tol_b, 1e-12)) {
      sample_monitors(sup, en);
      diag.converged = true;
      return diag;
    }
  }

  if (cfg.accelerated) {
    auto measure = [&]() {
      MatrixField b = hym_tensor(h.h, cache);
      double en = 0.0;
      double sup = apply_step(h.h, b, en, [](int, int, int) { return 0.0; });
      return std::pair<double, double>{sup, en};
    };
    // Outer steps lengthen geometrically, so the drift monitor cannot use
    // consecutive samples; it needs a fixed lag tau to be comparable along
    // the series. H(t+tau) is approximated by one exponential move.
    const double tau = 0.5;
    auto sample_fixed_lag = [&](double sup_b, double energy_b) {
      check_positivity();
      FlowSample s;
      s.t = h.t;
      s.iter = h.iter;
      s.sup_b = sup_b;
      s.energy_b = energy_b;
      MetricField ahead = flow_step(h, cache, tau);
      s.sigma_drift = sup_sigma(h.h, ahead.h);
      s.dist_ratio = dist_ratio(h.h, a);
      diag.series.push_back(s);
    };
    return run_flow_accelerated(h, cache, cfg, sample_fixed_lag, diag, measure);
  }

  while (h.iter < cfg.max_iters && h.t < cfg.t_max) {
    MatrixField b = hym_tensor(h.h, cache);
    double en = 0.0;
    double sup = apply_step(h.h, b, en, [&](int, int, int) { return dt_global; });
    h.iter += 1;
    h.t += dt_global;

    if (h.iter % cfg.check_every == 0) {
      sample_monitors(sup, en);
      if (sup < cfg.tol_b) {
        diag.converged = true;
        return diag;
      }
      if (sup > prev_sup * (1.0 + 1e-12)) {
        if (++rising >= 3) {
          diag.abort_reason = "divergence: sup|B| grew for 3 consecutive checks";
          return diag;
        }
      } else {
        rising = 0;
      }
      prev_sup = sup;
    }
  }
  // Final residual.
  MatrixField b = hym_tensor(h.h, cache);
  double en = 0.0;
  double sup = apply_step(h.h, b, en, [](int, int, int) { return 0.0; });
  sample_monitors(sup, en);
  diag.converged = sup < cfg.tol_b;
  if (!diag.converged) diag.abort_reason = "t_max or max_iters reached before convergence";
  return diag;
}

std::pair<MetricField, FlowDiagnostics> run_flow(const EtaField& e,
                                                 const std::vector<double>& a,
                                                 const ProductGrid& g,
                                                 const FlowConfig& cfg) {
  MetricField h;
  h.h = initial_metric(a, g);
  EtaCache cache(g, e);
  FlowDiagnostics d = run_flow(h, cache, a, cfg);
  return {std::move(h), std::move(d)};
}

double sup_sigma(const MatrixField& h1, const MatrixField& h2) {
  const ProductGrid& g = h1.grid();
  const int nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  double sup = 0.0;
#pragma omp parallel for collapse(2) schedule(static) reduction(max : sup)
  for (int i = 1; i < nw - 1; ++i)
    for (int j = 1; j < nw - 1; ++j)
      for (int k = 1; k < nu - 1; ++k)
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          sup = std::max(sup, sigma_fast(h1.at(id), h2.at(id)));
        }
  return sup;
}

double dist_ratio(const MatrixField& h, const std::vector<double>& a) {
  const ProductGrid& g = h.grid();
  const int nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  const int n = h.n();
  double sup = 0.0;
#pragma omp parallel for collapse(2) schedule(static) reduction(max : sup)
  for (int i = 1; i < nw - 1; ++i)
    for (int j = 1; j < nw - 1; ++j)
      for (int k = 1; k < nu - 1; ++k) {
        CMat hxi = CMat::Zero(n, n);
        for (int d = 0; d < n; ++d)
          hxi(d, d) = std::exp(2.0 * a[static_cast<size_t>(d)] * g.u(k));
        double denom = std::log(1.0 - g.u(k));
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          sup = std::max(sup, dist_fast(hxi, h.at(id)) / denom);
        }
      }
  return sup;
}

ExhaustReport exhaust(const EtaField& e, const std::vector<double>& a,
                      const GridSpec& base, const std::vector<std::pair<double, double>>& schedule,
                      const FlowConfig& cfg) {
  if (schedule.empty()) throw std::invalid_argument("exhaust: empty schedule");
  ProductGrid gbase(base);
  const double hu = gbase.hu();
  const double anchor = std::log(base.delta);

  ExhaustReport report;
  std::vector<GridSpec> specs;
  std::vector<MatrixField> sols;
  std::vector<ProductGrid> grids;
  grids.reserve(schedule.size());

  double prev_eps = std::numeric_limits<double>::max();
  double prev_delta = 0.0;
  for (auto [eps, delta] : schedule) {
    if (eps >= prev_eps || delta < prev_delta)
      throw std::invalid_argument("exhaust: schedule must decrease eps and not decrease delta");
    prev_eps = eps;
    prev_delta = delta;
    GridSpec s = base;
    double umax = anchor + std::round((std::log(delta) - anchor) / hu) * hu;
    long nint = std::lround((umax - std::log(eps)) / hu);
    s.delta = std::exp(umax);
    s.eps = std::exp(umax - nint * hu);
    s.nu = static_cast<int>(nint) + 1;
    specs.push_back(s);
  }

  for (const auto& s : specs) {
    grids.emplace_back(s);
    auto [h, diag] = run_flow(e, a, grids.back(), cfg);
    if (!diag.converged)
      throw std::runtime_error("exhaust: member run failed to converge (eps=" +
                               std::to_string(s.eps) + ")");
    ExhaustMember m;
    m.spec = s;
    m.diag = std::move(diag);
    m.sup_dist_ratio = dist_ratio(h.h, a);
    report.members.push_back(std::move(m));
    sols.push_back(std::move(h.h));
  }

  for (size_t p = 0; p + 1 < sols.size(); ++p) {
    const ProductGrid& ga = grids[p];
    const ProductGrid& gb = grids[p + 1];
    long shift = std::lround((ga.u(0) - gb.u(0)) / hu);
    ExhaustPairReport pr;
    double ring = 0.0;
    long ring_k = std::lround((std::log(specs[p].delta) - gb.u(0)) / hu) - 1;
    for (int i = 1; i < ga.nw() - 1; ++i)
      for (int j = 1; j < ga.nw() - 1; ++j) {
        for (int k = 1; k < ga.nu() - 1; ++k)
          for (int l = 0; l < ga.nphi(); ++l) {
            double sg = sigma_fast(sols[p].at(ga.idx(i, j, k, l)),
                                   sols[p + 1].at(gb.idx(i, j, static_cast<int>(k + shift), l)));
            pr.sup_sigma = std::max(pr.sup_sigma, sg);
          }
        const int n = static_cast<int>(a.size());
        CMat hxi = CMat::Zero(n, n);
        for (int d = 0; d < n; ++d)
          hxi(d, d) = std::exp(2.0 * a[static_cast<size_t>(d)] * gb.u(static_cast<int>(ring_k)));
        for (int l = 0; l < gb.nphi(); ++l)
          ring = std::max(ring, sigma_fast(hxi, sols[p + 1].at(gb.idx(i, j, static_cast<int>(ring_k), l))));
      }
    pr.ratio = pr.sup_sigma / std::abs(std::log(specs[p].eps));
    pr.delta_ring_sigma = ring;
    report.pairs.push_back(pr);
  }
  return report;
}

void write_checkpoint(const std::string& path, const GridSpec& spec, const MetricField& h) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  const char magic[8] = {'C', 'A', 'L', 'C', 'K', 'P', 'T', '1'};
  os.write(magic, 8);
  int n = h.h.n();
  os.write(reinterpret_cast<const char*>(&spec.nw), sizeof spec.nw);
  os.write(reinterpret_cast<const char*>(&spec.rw), sizeof spec.rw);
  os.write(reinterpret_cast<const char*>(&spec.nu), sizeof spec.nu);
  os.write(reinterpret_cast<const char*>(&spec.nphi), sizeof spec.nphi);
  os.write(reinterpret_cast<const char*>(&spec.eps), sizeof spec.eps);
  os.write(reinterpret_cast<const char*>(&spec.delta), sizeof spec.delta);
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  os.write(reinterpret_cast<const char*>(&h.t), sizeof h.t);
  os.write(reinterpret_cast<const char*>(&h.iter), sizeof h.iter);
  os.write(reinterpret_cast<const char*>(h.h.raw().data()),
           static_cast<std::streamsize>(h.h.raw().size() * sizeof(cplx)));
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "CALCKPT1", 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  Checkpoint c;
  is.read(reinterpret_cast<char*>(&c.spec.nw), sizeof c.spec.nw);
  is.read(reinterpret_cast<char*>(&c.spec.rw), sizeof c.spec.rw);
  is.read(reinterpret_cast<char*>(&c.spec.nu), sizeof c.spec.nu);
  is.read(reinterpret_cast<char*>(&c.spec.nphi), sizeof c.spec.nphi);
  is.read(reinterpret_cast<char*>(&c.spec.eps), sizeof c.spec.eps);
  is.read(reinterpret_cast<char*>(&c.spec.delta), sizeof c.spec.delta);
  is.read(reinterpret_cast<char*>(&c.n), sizeof c.n);
  is.read(reinterpret_cast<char*>(&c.t), sizeof c.t);
  is.read(reinterpret_cast<char*>(&c.iter), sizeof c.iter);
  if (!is) throw std::runtime_error("checkpoint: truncated header in '" + path + "'");
  c.spec.validate();
  if (c.n < 1 || c.n > 8) throw std::runtime_error("checkpoint: bad matrix dimension");
  size_t count = static_cast<size_t>(c.spec.nw) * c.spec.nw * c.spec.nu * c.spec.nphi *
                 static_cast<size_t>(c.n) * c.n;
  c.data.resize(count);
  is.read(reinterpret_cast<char*>(c.data.data()),
          static_cast<std::streamsize>(count * sizeof(cplx)));
  if (!is) throw std::runtime_error("checkpoint: truncated data in '" + path + "'");
  return c;
}

MetricField checkpoint_field(const Checkpoint& c, const ProductGrid& g) {
  if (g.num_nodes() * static_cast<size_t>(c.n) * c.n != c.data.size())
    throw std::invalid_argument("checkpoint_field: grid does not match checkpoint");
  MetricField h;
  h.h = MatrixField(g, c.n);
  h.h.raw() = c.data;
  h.t = c.t;
  h.iter = c.iter;
  return h;
}

}  // namespace caloron
