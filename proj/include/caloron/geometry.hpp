#ifndef CALORON_GEOMETRY_HPP
#define CALORON_GEOMETRY_HPP

#include <array>
#include <vector>

#include "caloron/matrix.hpp"

namespace caloron {

struct GridSpec {
  int nw = 24;       // nodes per w-axis (Re and Im)
  double rw = 8.0;   // w-box half-width
  int nu = 48;       // nodes in u = ln|z|
  int nphi = 16;     // nodes in phi = arg z (periodic)
  double eps = std::exp(-6.0);
  double delta = 1.0 - 1.0 / 64.0;

  void validate() const;
};

// Discretisation of S^2 x Sigma_{eps,delta}: a single stereographic chart
// truncated to |Re w|, |Im w| <= rw with Dirichlet edges, and log-polar
// coordinates (u, phi) on the annulus, Dirichlet in u and periodic in phi.
class ProductGrid {
 public:
  explicit ProductGrid(const GridSpec& s);

  const GridSpec& spec() const { return spec_; }
  int nw() const { return spec_.nw; }
  int nu() const { return spec_.nu; }
  int nphi() const { return spec_.nphi; }
  size_t num_nodes() const { return total_; }

  double hw() const { return hw_; }
  double hu() const { return hu_; }
  double hphi() const { return hphi_; }

  double xw(int i) const { return -spec_.rw + i * hw_; }
  double yw(int j) const { return -spec_.rw + j * hw_; }
  double u(int k) const { return u_min_ + k * hu_; }
  double phi(int l) const { return l * hphi_; }
  cplx w(int i, int j) const { return {xw(i), yw(j)}; }
  cplx z(int k, int l) const { return std::exp(cplx(u(k), phi(l))); }

  size_t idx(int i, int j, int k, int l) const {
    return ((static_cast<size_t>(i) * spec_.nw + j) * spec_.nu + k) * spec_.nphi + l;
  }
  void unpack(size_t id, int& i, int& j, int& k, int& l) const;

  bool is_boundary(int i, int j, int k) const {
    return i == 0 || j == 0 || i == spec_.nw - 1 || j == spec_.nw - 1 || k == 0 ||
           k == spec_.nu - 1;
  }

  // Conformal factors of the product metric at a node.
  double sphere_factor(int i, int j) const {  // (1 + |w|^2)^2
    double n2 = xw(i) * xw(i) + yw(j) * yw(j);
    return (1.0 + n2) * (1.0 + n2);
  }
  double rho(int i, int j, int k) const {  // ((1+|w|^2)/(|z| ln|z|))^2
    double uu = u(k);
    return sphere_factor(i, j) / (std::exp(2.0 * uu) * uu * uu);
  }
  // Riemannian volume weight per node: sqrt(g) h_w^2 h_u h_phi.
  double volume_weight(int i, int j, int k) const;

 private:
  GridSpec spec_;
  double hw_, hu_, hphi_, u_min_, u_max_;
  size_t total_;
};

// Grid-sampled field of n x n complex matrices, contiguous storage.
class MatrixField {
 public:
  MatrixField() = default;
  MatrixField(const ProductGrid& g, int n);

  int n() const { return n_; }
  const ProductGrid& grid() const { return *grid_; }

  CMap at(size_t id) { return CMap(data_.data() + id * n_ * n_, n_, n_); }
  CMapConst at(size_t id) const { return CMapConst(data_.data() + id * n_ * n_, n_, n_); }
  CMap at(int i, int j, int k, int l) { return at(grid_->idx(i, j, k, l)); }
  CMapConst at(int i, int j, int k, int l) const { return at(grid_->idx(i, j, k, l)); }

  std::vector<cplx>& raw() { return data_; }
  const std::vector<cplx>& raw() const { return data_; }
  void fill(const CMat& m);

 private:
  const ProductGrid* grid_ = nullptr;
  int n_ = 0;
  std::vector<cplx> data_;
};

// Geometric Laplacian Delta = -(1+|w|^2)^2 d_wbar d_w ... reduced to real
// coordinates: -((1+|w|^2)^2/4)(dxx + dyy) - (u^2/4)(duu + dff) * 4, i.e.
// -((1+|w|^2)^2/4) nabla^2_w - u^2 nabla^2_{u,phi}. Second-order central
// differences, Dirichlet ghosts (zero extension) at u-boundaries and the
// w-box edge, periodic in phi.
MatrixField laplacian_apply(const MatrixField& f);

// 1-D Green's function on the u-axis: G(|z|, s) = min{-ln|z|, -ln s}/(s (ln s)^2).
double green1d(double absz, double s);

// Conformal coordinate map to S^1_{1/mu} x R^3: r = -ln|z|/mu, circle
// coordinate t = arg(z)/mu, spatial direction the inverse stereographic
// image of w.
struct CaloronPoint {
  double t = 0.0;                     // circle coordinate, period 2 pi / mu
  std::array<double, 3> x{0, 0, 0};   // spatial point, |x| = r
};
CaloronPoint to_caloron_coords(cplx w, cplx z, double mu);
void from_caloron_coords(const CaloronPoint& p, double mu, cplx& w, cplx& z);

// Unit vector on S^2 for stereographic w (north pole at w = 0).
std::array<double, 3> stereo_direction(cplx w);

}  // namespace caloron

#endif
