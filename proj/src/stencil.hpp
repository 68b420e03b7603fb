#ifndef CALORON_SRC_STENCIL_HPP
#define CALORON_SRC_STENCIL_HPP

// Shared finite-difference stencils for grid matrix fields. Internal header.

#include <cmath>
#include <vector>

#include "caloron/geometry.hpp"

namespace caloron::stencil {

struct Strides {
  long si, sj, sk;
  explicit Strides(const ProductGrid& g)
      : si(static_cast<long>(g.nw()) * g.nu() * g.nphi()),
        sj(static_cast<long>(g.nu()) * g.nphi()),
        sk(g.nphi()) {}
};

// Generic derivative along a strided axis: central inside, second-order
// one-sided at the ends.
inline CMat axis_diff(const MatrixField& f, size_t id, long stride, int pos, int count,
                      double h) {
  if (pos > 0 && pos < count - 1)
    return (CMat(f.at(id + stride)) - CMat(f.at(id - stride))) / (2.0 * h);
  if (pos == 0)
    return (-3.0 * CMat(f.at(id)) + 4.0 * CMat(f.at(id + stride)) -
            CMat(f.at(id + 2 * stride))) /
           (2.0 * h);
  return (3.0 * CMat(f.at(id)) - 4.0 * CMat(f.at(id - stride)) +
          CMat(f.at(id - 2 * stride))) /
         (2.0 * h);
}

inline CMat phi_diff(const MatrixField& f, const ProductGrid& g, int i, int j, int k, int l) {
  int lm = (l + g.nphi() - 1) % g.nphi();
  int lp = (l + 1) % g.nphi();
  return (CMat(f.at(i, j, k, lp)) - CMat(f.at(i, j, k, lm))) / (2.0 * g.hphi());
}

// Metric-field derivatives with Dirichlet ghosts: past the w-box edge the
// boundary metric H_xi is w-independent (constant extension), past the
// u-ends it continues as diag(e^{2 a_j u}) (exact exponential ghost
// ghost = D H D with D = diag(e^{-a_j h_u})). This keeps H = H_xi an exact
// zero of every derivative combination appearing in B.
inline CMat metric_dw(const MatrixField& h, size_t id, long stride, int pos, int count,
                      double hw) {
  CMat lo = (pos > 0) ? CMat(h.at(id - stride)) : CMat(h.at(id));
  CMat hi = (pos < count - 1) ? CMat(h.at(id + stride)) : CMat(h.at(id));
  return (hi - lo) / (2.0 * hw);
}

inline CMat metric_du(const MatrixField& h, size_t id, long stride, int pos, int count,
                      double hu, const std::vector<double>& a) {
  const int n = h.n();
  auto scaled = [&](const CMat& m, double sgn) {
    CMat out(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        out(r, c) = m(r, c) * std::exp(sgn * (a[static_cast<size_t>(r)] +
                                              a[static_cast<size_t>(c)]) * hu);
    return out;
  };
  CMat lo = (pos > 0) ? CMat(h.at(id - stride)) : scaled(CMat(h.at(id)), -1.0);
  CMat hi = (pos < count - 1) ? CMat(h.at(id + stride)) : scaled(CMat(h.at(id)), 1.0);
  return (hi - lo) / (2.0 * hu);
}

}  // namespace caloron::stencil

#endif
