#include "caloron/instanton.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stencil.hpp"

namespace caloron {

using stencil::Strides;
using stencil::axis_diff;
using stencil::metric_du;
using stencil::metric_dw;
using stencil::phi_diff;

namespace {

using std::numbers::pi;
constexpr cplx kI{0.0, 1.0};

CMat logm_eigen(const CMat& m) {
  Eigen::ComplexEigenSolver<CMat> es(m);
  CMat d = CMat::Zero(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i) d(i, i) = std::log(es.eigenvalues()[i]);
  return es.eigenvectors() * d * es.eigenvectors().inverse();
}

inline CMat antiherm(const CMat& m) { return 0.5 * (m - CMat(m.adjoint())); }

// Orthonormal-frame components against the weights matched to the tensor B:
// l1^2 = 1/(1+|w|^2)^2 on the sphere factor, l2^2 = 1/u^2 on the annulus, so
// that Fh12 + Fh34 = 2i B identically.
struct FrameComps {
  CMat f12, f13, f14, f23, f24, f34;
};

FrameComps frame_comps(const CurvatureField& f, const ProductGrid& g, int i, int j, int k,
                       int l) {
  size_t id = g.idx(i, j, k, l);
  double cw = g.sphere_factor(i, j);
  double sw = std::sqrt(cw);
  double au = std::abs(g.u(k));
  FrameComps c;
  c.f12 = cw * CMat(f.f12.at(id));
  c.f34 = au * au * CMat(f.f34.at(id));
  c.f13 = sw * au * CMat(f.f13.at(id));
  c.f14 = sw * au * CMat(f.f14.at(id));
  c.f23 = sw * au * CMat(f.f23.at(id));
  c.f24 = sw * au * CMat(f.f24.at(id));
  return c;
}

// Volume element of the same weights per node.
inline double vol_b(const ProductGrid& g, int i, int j, int k) {
  double uu = g.u(k);
  return g.hw() * g.hw() * g.hu() * g.hphi() / (g.sphere_factor(i, j) * uu * uu);
}

inline double h_norm2(const CMat& hinv, const CMat& h, const CMat& m) {
  return std::max(0.0, (hinv * m.adjoint() * h * m).trace().real());
}

}  // namespace

ConnectionField connection_from_pair(const MatrixField& h, const EtaCache& cache) {
  const ProductGrid& g = h.grid();
  const int n = h.n(), nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  const Strides st(g);
  ConnectionField a;
  a.aw = MatrixField(g, n);
  a.awbar = MatrixField(g, n);
  a.az = MatrixField(g, n);
  a.azbar = MatrixField(g, n);
  const bool ez = cache.zero();
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < nw; ++i)
    for (int j = 0; j < nw; ++j)
      for (int k = 0; k < nu; ++k)
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          CMat hm = h.at(id);
          CMat hinv = hm.inverse();
          CMat dx = metric_dw(h, id, st.si, i, nw, g.hw());
          CMat dy = metric_dw(h, id, st.sj, j, nw, g.hw());
          CMat du = metric_du(h, id, st.sk, k, nu, g.hu(), cache.a());
          CMat df = phi_diff(h, g, i, j, k, l);
          CMat vw = hinv * (0.5 * (dx - kI * dy));
          a.az.at(id) = hinv * (0.5 * (du - kI * df));
          if (ez) {
            a.aw.at(id) = vw;
          } else {
            CMat eta = cache.eta().at(id);
            a.awbar.at(id) = eta;
            a.aw.at(id) = vw - hinv * (eta.adjoint() * hm);
          }
        }
  return a;
}

ConnectionField approx_connection(const std::vector<double>& a0, const EtaCache& cache) {
  const ProductGrid& g = cache.eta().grid();
  const int n = cache.n(), nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  ConnectionField a;
  a.aw = MatrixField(g, n);
  a.awbar = MatrixField(g, n);
  a.az = MatrixField(g, n);
  a.azbar = MatrixField(g, n);
  CMat ixi = CMat::Zero(n, n);
  for (int d = 0; d < n; ++d) ixi(d, d) = a0[static_cast<size_t>(d)];
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < nw; ++i)
    for (int j = 0; j < nw; ++j)
      for (int k = 0; k < nu; ++k) {
        double uu = g.u(k);
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          a.az.at(id) = ixi;
          if (cache.zero()) continue;
          CMat eta = cache.eta().at(id);
          a.awbar.at(id) = eta;
          CMat m(n, n);
          for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
              m(r, c) = -std::exp(2.0 * (a0[static_cast<size_t>(c)] -
                                         a0[static_cast<size_t>(r)]) * uu) *
                        std::conj(eta(c, r));
          a.aw.at(id) = m;
        }
      }
  return a;
}

CurvatureField curvature(const ConnectionField& a) {
  const ProductGrid& g = a.grid();
  const int n = a.n(), nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  const Strides st(g);

  // Real components q = (x, y, u, phi).
  MatrixField a1(g, n), a2(g, n), a3(g, n), a4(g, n);
#pragma omp parallel for schedule(static)
  for (long id = 0; id < static_cast<long>(g.num_nodes()); ++id) {
    size_t s = static_cast<size_t>(id);
    CMat aw = a.aw.at(s), awb = a.awbar.at(s), az = a.az.at(s), azb = a.azbar.at(s);
    a1.at(s) = aw + awb;
    a2.at(s) = kI * (aw - awb);
    a3.at(s) = az + azb;
    a4.at(s) = kI * (az - azb);
  }

  CurvatureField f{MatrixField(g, n), MatrixField(g, n), MatrixField(g, n),
                   MatrixField(g, n), MatrixField(g, n), MatrixField(g, n)};
  const MatrixField* comp[4] = {&a1, &a2, &a3, &a4};
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < nw; ++i)
    for (int j = 0; j < nw; ++j)
      for (int k = 0; k < nu; ++k)
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          CMat d[4][4];  // d[a][b] = d_a A_b
          for (int b = 0; b < 4; ++b) {
            d[0][b] = axis_diff(*comp[b], id, st.si, i, nw, g.hw());
            d[1][b] = axis_diff(*comp[b], id, st.sj, j, nw, g.hw());
            d[2][b] = axis_diff(*comp[b], id, st.sk, k, nu, g.hu());
            d[3][b] = phi_diff(*comp[b], g, i, j, k, l);
          }
          auto fab = [&](int p, int q) {
            CMat ap = comp[p]->at(id), aq = comp[q]->at(id);
            return CMat(d[p][q] - d[q][p] + ap * aq - aq * ap);
          };
          f.f12.at(id) = fab(0, 1);
          f.f13.at(id) = fab(0, 2);
          f.f14.at(id) = fab(0, 3);
          f.f23.at(id) = fab(1, 2);
          f.f24.at(id) = fab(1, 3);
          f.f34.at(id) = fab(2, 3);
        }
  return f;
}

AsdResidual asd_residual(const CurvatureField& f, const MatrixField& h, const EtaCache& cache) {
  const ProductGrid& g = f.grid();
  const int nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  MatrixField b = hym_tensor(h, cache);
  AsdResidual r;
  double sup = 0.0, l2 = 0.0, gap = 0.0;
#pragma omp parallel for collapse(2) schedule(static) reduction(max : sup, gap) reduction(+ : l2)
  for (int i = 1; i < nw - 1; ++i)
    for (int j = 1; j < nw - 1; ++j)
      for (int k = 1; k < nu - 1; ++k) {
        double vol = vol_b(g, i, j, k);
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          FrameComps c = frame_comps(f, g, i, j, k, l);
          CMat hm = h.at(id);
          CMat hinv = hm.inverse();
          CMat p1 = 0.5 * (c.f12 + c.f34);
          CMat p2 = 0.5 * (c.f13 - c.f24);
          CMat p3 = 0.5 * (c.f14 + c.f23);
          double n2 = 2.0 * (h_norm2(hinv, hm, p1) + h_norm2(hinv, hm, p2) +
                             h_norm2(hinv, hm, p3));
          sup = std::max(sup, n2);
          l2 += n2 * vol;
          CMat dev = p1 - kI * CMat(b.at(id));
          gap = std::max(gap, h_norm2(hinv, hm, dev));
        }
      }
  r.sup = std::sqrt(sup);
  r.l2 = std::sqrt(l2);
  r.hym_gap = std::sqrt(gap);
  return r;
}

QuadResult charge(const EtaField& e, const SphereQuad& q) {
  if (e.is_zero()) return {};
  auto density = [&](cplx w) {
    double acc = 0.0;
    for (int k = 1; k <= e.K; ++k) {
      CMat m = e.coeff_eval(k, w);
      acc += k * m.squaredNorm();
    }
    return acc;
  };
  QuadResult r = sphere_integral(density, q);
  r.value /= pi;
  r.error /= pi;
  return r;
}

double charge_density(const CurvatureField& f) {
  const ProductGrid& g = f.grid();
  const int nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  double acc = 0.0;
#pragma omp parallel for collapse(2) schedule(static) reduction(+ : acc)
  for (int i = 1; i < nw - 1; ++i)
    for (int j = 1; j < nw - 1; ++j)
      for (int k = 1; k < nu - 1; ++k)
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          cplx t = (CMat(f.f12.at(id)) * CMat(f.f34.at(id))).trace() -
                   (CMat(f.f13.at(id)) * CMat(f.f24.at(id))).trace() +
                   (CMat(f.f14.at(id)) * CMat(f.f23.at(id))).trace();
          acc += 2.0 * t.real();
        }
  return acc * g.hw() * g.hw() * g.hu() * g.hphi() / (8.0 * pi * pi);
}

EnergyReport energy(const CurvatureField& f, const MatrixField& h, const EtaCache& cache) {
  (void)cache;
  const ProductGrid& g = f.grid();
  const int nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  double en = 0.0, sd = 0.0;
#pragma omp parallel for collapse(2) schedule(static) reduction(+ : en, sd)
  for (int i = 1; i < nw - 1; ++i)
    for (int j = 1; j < nw - 1; ++j)
      for (int k = 1; k < nu - 1; ++k) {
        double vol = vol_b(g, i, j, k);
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, k, l);
          FrameComps c = frame_comps(f, g, i, j, k, l);
          CMat hm = h.at(id);
          CMat hinv = hm.inverse();
          double tot = h_norm2(hinv, hm, c.f12) + h_norm2(hinv, hm, c.f13) +
                       h_norm2(hinv, hm, c.f14) + h_norm2(hinv, hm, c.f23) +
                       h_norm2(hinv, hm, c.f24) + h_norm2(hinv, hm, c.f34);
          CMat p1 = 0.5 * (c.f12 + c.f34);
          CMat p2 = 0.5 * (c.f13 - c.f24);
          CMat p3 = 0.5 * (c.f14 + c.f23);
          double plus = 2.0 * (h_norm2(hinv, hm, p1) + h_norm2(hinv, hm, p2) +
                               h_norm2(hinv, hm, p3));
          en += tot * vol;
          sd += 2.0 * plus * vol;
        }
      }
  EnergyReport r;
  r.energy = en;
  r.sd_energy = sd;
  r.charge_4d = charge_density(f);
  r.identity_gap = std::abs(en - sd - 8.0 * pi * pi * r.charge_4d) / std::max(en, 1e-300);
  return r;
}

CaloronSample caloron_fields(const MatrixField& h, const EtaCache& cache,
                             const std::vector<double>& a, double mu,
                             const CurvatureField* f) {
  const ProductGrid& g = h.grid();
  const int n = h.n(), nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  ConnectionField conn = connection_from_pair(h, cache);

  CaloronSample s;
  s.mu = mu;
  for (int i = 1; i < nw - 1; ++i)
    for (int j = 1; j < nw - 1; ++j)
      for (int k = 1; k < nu - 1; ++k) {
        cplx w = g.w(i, j);
        cplx z = g.z(k, 0);
        s.points.push_back(to_caloron_coords(w, z, mu));
        s.r.push_back(-g.u(k) / mu);

        // phi-circle transport of A_phi = i a_z, conjugated into the
        // H-unitary frame at the base point; midpoint products, second order.
        CMat m = CMat::Identity(n, n);
        for (int l = 0; l < nphi; ++l) {
          int lp = (l + 1) % nphi;
          CMat af = 0.5 * kI *
                    (CMat(conn.az.at(i, j, k, l)) + CMat(conn.az.at(i, j, k, lp)));
          m = expm(g.hphi() * af) * m;
        }
        CMat sq = herm_exp(0.5 * herm_log(h.at(i, j, k, 0)));
        CMat mu_frame = sq * m * sq.inverse();
        s.phi.push_back(-antiherm(logm_eigen(mu_frame)) / (2.0 * pi));

        // Spatial components from the coordinate Jacobian at phi = 0.
        auto nvec = stereo_direction(w);
        double r = s.r.back();
        std::array<cplx, 3> dwdx;
        double d3 = 1.0 + nvec[2];
        for (int q = 0; q < 3; ++q) {
          // dn_p/dx_q = (delta_pq - n_p n_q)/r, w = (n1 + i n2)/(1 + n3)
          double dn1 = ((q == 0) - nvec[0] * nvec[q]) / r;
          double dn2 = ((q == 1) - nvec[1] * nvec[q]) / r;
          double dn3 = ((q == 2) - nvec[2] * nvec[q]) / r;
          dwdx[static_cast<size_t>(q)] =
              (cplx(dn1, dn2) - cplx(nvec[0], nvec[1]) * dn3 / d3) / d3;
        }
        std::array<CMat, 3> a3;
        CMat aw = conn.aw.at(i, j, k, 0), awb = conn.awbar.at(i, j, k, 0);
        CMat au = CMat(conn.az.at(i, j, k, 0)) + CMat(conn.azbar.at(i, j, k, 0));
        for (int q = 0; q < 3; ++q)
          a3[static_cast<size_t>(q)] = aw * dwdx[static_cast<size_t>(q)] +
                                       awb * std::conj(dwdx[static_cast<size_t>(q)]) -
                                       mu * nvec[q] * au;
        s.a3.push_back(a3);

        if (f) {
          double fmin = std::numeric_limits<double>::max(), fmax = 0.0, f0 = 0.0;
          for (int l = 0; l < nphi; ++l) {
            FrameComps c = frame_comps(*f, g, i, j, k, l);
            CMat hm = h.at(i, j, k, l);
            CMat hinv = hm.inverse();
            double n2 = h_norm2(hinv, hm, c.f12) + h_norm2(hinv, hm, c.f13) +
                        h_norm2(hinv, hm, c.f14) + h_norm2(hinv, hm, c.f23) +
                        h_norm2(hinv, hm, c.f24) + h_norm2(hinv, hm, c.f34);
            double v = std::sqrt(n2);
            fmin = std::min(fmin, v);
            fmax = std::max(fmax, v);
            if (l == 0) f0 = v;
          }
          s.f_norm.push_back(f0);
          s.f_spread.push_back(fmax - fmin);
        } else {
          s.f_norm.push_back(0.0);
          s.f_spread.push_back(0.0);
        }
      }
  (void)a;
  return s;
}

namespace {

DecayFit fit_power_law(const std::vector<double>& r, const std::vector<double>& y) {
  DecayFit fit;
  std::vector<double> lx, ly;
  for (size_t i = 0; i < r.size(); ++i)
    if (y[i] > 1e-14 && r[i] > 0.0) {
      lx.push_back(std::log(r[i]));
      ly.push_back(std::log(y[i]));
    }
  fit.npoints = static_cast<int>(lx.size());
  if (fit.npoints < 3) return fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  double m = static_cast<double>(fit.npoints);
  double denom = m * sxx - sx * sx;
  fit.exponent = (m * sxy - sx * sy) / denom;
  fit.log_c = (sy - fit.exponent * sx) / m;
  double ss = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    double res = ly[i] - fit.exponent * lx[i] - fit.log_c;
    ss += res * res;
  }
  if (fit.npoints > 2)
    fit.stderr_exp = std::sqrt(ss / (m - 2.0) / (sxx - sx * sx / m));
  return fit;
}

}  // namespace

DecayReport decay_report(const CaloronSample& s, const std::vector<double>& a) {
  DecayReport rep;
  if (s.r.empty()) return rep;
  const int n = s.phi.empty() ? 0 : static_cast<int>(s.phi.front().rows());
  std::vector<double> asort(a);
  std::sort(asort.begin(), asort.end(), std::greater<double>());

  // Bin by radius (r takes one value per u-node).
  std::vector<double> rs;
  std::vector<double> phi_dev, fmax, fspread;
  for (size_t p = 0; p < s.r.size(); ++p) {
    double r = s.r[p];
    size_t bin = rs.size();
    for (size_t b = 0; b < rs.size(); ++b)
      if (std::abs(rs[b] - r) < 1e-12 * std::max(1.0, r)) {
        bin = b;
        break;
      }
    if (bin == rs.size()) {
      rs.push_back(r);
      phi_dev.push_back(0.0);
      fmax.push_back(0.0);
      fspread.push_back(0.0);
    }
    // Spectral deviation of Phi from xi0: sorted eigenvalues of i Phi vs a.
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(kI * s.phi[p]), Eigen::EigenvaluesOnly);
    double dev2 = 0.0;
    for (int d = 0; d < n; ++d) {
      double diff = es.eigenvalues()[n - 1 - d] - asort[static_cast<size_t>(d)];
      dev2 += diff * diff;
    }
    phi_dev[bin] = std::max(phi_dev[bin], std::sqrt(dev2));
    fmax[bin] = std::max(fmax[bin], s.f_norm[p]);
    fspread[bin] = std::max(fspread[bin], s.f_spread[p]);
  }
  rep.phi_dev = fit_power_law(rs, phi_dev);
  rep.f_norm = fit_power_law(rs, fmax);
  rep.r_min = *std::min_element(rs.begin(), rs.end());
  rep.r_max = *std::max_element(rs.begin(), rs.end());
  rep.theta_spread = *std::max_element(fspread.begin(), fspread.end());
  return rep;
}

ShiftProbeReport shift_equivalence_probe(const EtaField& e, const std::vector<int>& k,
                                         const ProductGrid& g, const FlowConfig& cfg) {
  EtaField e2 = lattice_shift(e, k);

  auto [h1, d1] = run_flow(e, e.a, g, cfg);
  auto [h2, d2] = run_flow(e2, e2.a, g, cfg);

  EtaCache c1(g, e);
  EtaCache c2(g, e2);
  CurvatureField f1 = curvature(connection_from_pair(h1.h, c1));
  CurvatureField f2 = curvature(connection_from_pair(h2.h, c2));

  ShiftProbeReport rep;
  rep.both_converged = d1.converged && d2.converged;
  const int nw = g.nw(), nu = g.nu(), nphi = g.nphi();
  double max_trff = 0.0, max_f2 = 0.0;
  for (int i = 1; i < nw - 1; ++i)
    for (int j = 1; j < nw - 1; ++j)
      for (int kk = 1; kk < nu - 1; ++kk)
        for (int l = 0; l < nphi; ++l) {
          size_t id = g.idx(i, j, kk, l);
          auto trff = [&](const CurvatureField& f) {
            cplx t = (CMat(f.f12.at(id)) * CMat(f.f34.at(id))).trace() -
                     (CMat(f.f13.at(id)) * CMat(f.f24.at(id))).trace() +
                     (CMat(f.f14.at(id)) * CMat(f.f23.at(id))).trace();
            return 2.0 * t.real();
          };
          auto fnorm2 = [&](const CurvatureField& f, const MatrixField& h) {
            FrameComps c = frame_comps(f, g, i, j, kk, l);
            CMat hm = h.at(id);
            CMat hinv = hm.inverse();
            return h_norm2(hinv, hm, c.f12) + h_norm2(hinv, hm, c.f13) +
                   h_norm2(hinv, hm, c.f14) + h_norm2(hinv, hm, c.f23) +
                   h_norm2(hinv, hm, c.f24) + h_norm2(hinv, hm, c.f34);
          };
          double t1 = trff(f1), t2 = trff(f2);
          double n1 = fnorm2(f1, h1.h), n2 = fnorm2(f2, h2.h);
          rep.sup_trff = std::max(rep.sup_trff, std::abs(t1 - t2));
          rep.sup_f2 = std::max(rep.sup_f2, std::abs(n1 - n2));
          max_trff = std::max({max_trff, std::abs(t1), std::abs(t2)});
          max_f2 = std::max({max_f2, n1, n2});
        }
  rep.rel_trff = rep.sup_trff / std::max(max_trff, 1e-300);
  rep.rel_f2 = rep.sup_f2 / std::max(max_f2, 1e-300);
  return rep;
}

}  // namespace caloron
