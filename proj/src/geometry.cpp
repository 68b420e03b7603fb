#include "caloron/geometry.hpp"

#include <cmath>
#include <numbers>

namespace caloron {

using std::numbers::pi;

void GridSpec::validate() const {
  if (nw < 4 || nu < 4 || nphi < 4)
    throw std::invalid_argument("grid: need at least 4 nodes per axis");
  if (rw <= 0.0) throw std::invalid_argument("grid: rw must be positive");
  if (!(eps > 0.0 && eps < delta && delta < 1.0))
    throw std::invalid_argument("grid: need 0 < eps < delta < 1");
}

ProductGrid::ProductGrid(const GridSpec& s) : spec_(s) {
  s.validate();
  hw_ = 2.0 * s.rw / (s.nw - 1);
  u_min_ = std::log(s.eps);
  u_max_ = std::log(s.delta);
  hu_ = (u_max_ - u_min_) / (s.nu - 1);
  hphi_ = 2.0 * pi / s.nphi;
  total_ = static_cast<size_t>(s.nw) * s.nw * s.nu * s.nphi;
}

void ProductGrid::unpack(size_t id, int& i, int& j, int& k, int& l) const {
  l = static_cast<int>(id % spec_.nphi);
  id /= spec_.nphi;
  k = static_cast<int>(id % spec_.nu);
  id /= spec_.nu;
  j = static_cast<int>(id % spec_.nw);
  i = static_cast<int>(id / spec_.nw);
}

double ProductGrid::volume_weight(int i, int j, int k) const {
  double uu = u(k);
  return 4.0 / (sphere_factor(i, j) * uu * uu) * hw_ * hw_ * hu_ * hphi_;
}

MatrixField::MatrixField(const ProductGrid& g, int n) : grid_(&g), n_(n) {
  data_.assign(g.num_nodes() * static_cast<size_t>(n) * n, cplx(0.0));
}

void MatrixField::fill(const CMat& m) {
  for (size_t id = 0; id < grid_->num_nodes(); ++id) at(id) = m;
}

MatrixField laplacian_apply(const MatrixField& f) {
  const ProductGrid& g = f.grid();
  const int nw = g.nw(), nu = g.nu(), nphi = g.nphi(), n = f.n();
  const int nn = n * n;
  const double ihw2 = 1.0 / (g.hw() * g.hw());
  const double ihu2 = 1.0 / (g.hu() * g.hu());
  const double ihf2 = 1.0 / (g.hphi() * g.hphi());
  MatrixField out(g, n);
  const cplx* src = f.raw().data();
  cplx* dst = out.raw().data();

#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < nw; ++i)
    for (int j = 0; j < nw; ++j) {
      const double cw = g.sphere_factor(i, j) / 4.0;
      for (int k = 0; k < nu; ++k) {
        const double cu = g.u(k) * g.u(k);
        for (int l = 0; l < nphi; ++l) {
          const size_t id = g.idx(i, j, k, l) * static_cast<size_t>(nn);
          const int lm = (l + nphi - 1) % nphi, lp = (l + 1) % nphi;
          const size_t ixm = (i > 0) ? g.idx(i - 1, j, k, l) * nn : 0;
          const size_t ixp = (i < nw - 1) ? g.idx(i + 1, j, k, l) * nn : 0;
          const size_t iym = (j > 0) ? g.idx(i, j - 1, k, l) * nn : 0;
          const size_t iyp = (j < nw - 1) ? g.idx(i, j + 1, k, l) * nn : 0;
          const size_t ium = (k > 0) ? g.idx(i, j, k - 1, l) * nn : 0;
          const size_t iup = (k < nu - 1) ? g.idx(i, j, k + 1, l) * nn : 0;
          const size_t ifm = g.idx(i, j, k, lm) * nn;
          const size_t ifp = g.idx(i, j, k, lp) * nn;
          for (int c = 0; c < nn; ++c) {
            const cplx center = src[id + c];
            cplx dxx = -2.0 * center, dyy = -2.0 * center, duu = -2.0 * center;
            if (i > 0) dxx += src[ixm + c];
            if (i < nw - 1) dxx += src[ixp + c];
            if (j > 0) dyy += src[iym + c];
            if (j < nw - 1) dyy += src[iyp + c];
            if (k > 0) duu += src[ium + c];
            if (k < nu - 1) duu += src[iup + c];
            cplx dff = src[ifm + c] - 2.0 * center + src[ifp + c];
            dst[id + c] = -cw * (dxx + dyy) * ihw2 - cu * (duu * ihu2 + dff * ihf2);
          }
        }
      }
    }
  return out;
}

double green1d(double absz, double s) {
  if (!(absz > 0.0 && absz < 1.0 && s > 0.0 && s < 1.0))
    throw std::invalid_argument("green1d: arguments must lie in (0,1)");
  double ls = std::log(s);
  return std::min(-std::log(absz), -ls) / (s * ls * ls);
}

std::array<double, 3> stereo_direction(cplx w) {
  double n2 = std::norm(w);
  double d = 1.0 + n2;
  return {2.0 * w.real() / d, 2.0 * w.imag() / d, (1.0 - n2) / d};
}

CaloronPoint to_caloron_coords(cplx w, cplx z, double mu) {
  double absz = std::abs(z);
  if (!(absz > 0.0 && absz < 1.0))
    throw std::invalid_argument("to_caloron_coords: |z| must lie in (0,1)");
  double r = -std::log(absz) / mu;
  CaloronPoint p;
  p.t = std::arg(z) / mu;
  auto n = stereo_direction(w);
  p.x = {r * n[0], r * n[1], r * n[2]};
  return p;
}

void from_caloron_coords(const CaloronPoint& p, double mu, cplx& w, cplx& z) {
  double r = std::sqrt(p.x[0] * p.x[0] + p.x[1] * p.x[1] + p.x[2] * p.x[2]);
  if (r <= 0.0) throw std::invalid_argument("from_caloron_coords: r must be positive");
  double d = 1.0 + p.x[2] / r;
  if (d < 1e-300) {
    w = cplx(1e300, 0.0);  // point at infinity in the chart
  } else {
    w = cplx(p.x[0] / r / d, p.x[1] / r / d);
  }
  z = std::exp(cplx(-mu * r, mu * p.t));
}

}  // namespace caloron
