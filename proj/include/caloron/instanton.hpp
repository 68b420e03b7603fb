#ifndef CALORON_INSTANTON_HPP
#define CALORON_INSTANTON_HPP

#include <array>
#include <string>
#include <vector>

#include "caloron/geometry.hpp"
#include "caloron/holomap.hpp"
#include "caloron/hymflow.hpp"

namespace caloron {

enum class GaugeTag { kHolomorphicFrame, kRadiallyFree };

// Connection one-form in complex components: A = aw dw + awbar dwbar
// + az dzeta + azbar dzetabar with zeta = ln z = u + i phi (so dz/z = dzeta).
// In the holomorphic frame azbar = 0.
struct ConnectionField {
  MatrixField aw, awbar, az, azbar;
  GaugeTag gauge = GaugeTag::kHolomorphicFrame;

  const ProductGrid& grid() const { return aw.grid(); }
  int n() const { return aw.n(); }
};

// Chern connection of (dbar + eta, H):
// awbar = eta, aw = H^{-1} d_w H - H^{-1} eta^* H, az = H^{-1} d_zeta H.
ConnectionField connection_from_pair(const MatrixField& h, const EtaCache& cache);

// A = eta dwbar - H_xi^{-1} eta^* H_xi dw + i xi0 dzeta; equals
// connection_from_pair at H = H_xi up to the analytic z-derivative.
ConnectionField approx_connection(const std::vector<double>& a, const EtaCache& cache);

// Curvature in real coordinates q = (x_w, y_w, u, phi):
// F_ab = d_a A_b - d_b A_a + [A_a, A_b], second-order differences
// (one-sided at Dirichlet edges, periodic in phi).
struct CurvatureField {
  MatrixField f12, f13, f14, f23, f24, f34;
  const ProductGrid& grid() const { return f12.grid(); }
  int n() const { return f12.n(); }
};
CurvatureField curvature(const ConnectionField& a);

// Orthonormal-frame components: e1 = l1 dx, e2 = l1 dy, e3 = l2 du,
// e4 = l2 dphi with l1^2 = 4/(1+|w|^2)^2, l2^2 = 1/u^2. The self-dual part
// has the three components
//   p1 = (Fh12 + Fh34)/2, p2 = (Fh13 - Fh24)/2, p3 = (Fh14 + Fh23)/2,
// and Fh12 + Fh34 = 2i B(H, eta) identically.
struct AsdResidual {
  double sup = 0.0;      // sup over interior nodes of |F+|_H
  double l2 = 0.0;       // sqrt(int |F+|^2_H dvol)
  double hym_gap = 0.0;  // sup |p1 - i B|_H, discretization consistency check
};
AsdResidual asd_residual(const CurvatureField& f, const MatrixField& h, const EtaCache& cache);

// Topological charge from the z-modes of eta: the |z| <= 1 fibre integral is
// exact mode-wise, leaving (1/pi) int_{S^2} sum_k k tr(eta_k^* eta_k) dA_w.
QuadResult charge(const EtaField& e, const SphereQuad& q = {});

// Dual route: (1/8pi^2) int tr(F ^ F) over the grid domain,
// tr(F ^ F) = 2 [tr(F12 F34) - tr(F13 F24) + tr(F14 F23)] dx dy du dphi.
double charge_density(const CurvatureField& f);

struct EnergyReport {
  double energy = 0.0;       // int sum_{a<b} |Fh_ab|^2_H dvol
  double sd_energy = 0.0;    // 2 int |F+|^2_H dvol
  double charge_4d = 0.0;    // charge_density on the same grid
  double identity_gap = 0.0; // |energy - sd_energy - 8 pi^2 charge_4d| / energy
};
EnergyReport energy(const CurvatureField& f, const MatrixField& h, const EtaCache& cache);

// Fields on S^1_{1/mu} x R^3 sampled on the phi = 0 slice of the grid
// interior. Phi is recovered from the phi-circle transport of A conjugated
// into the H-unitary frame: Phi = -(1/2pi) log M, normalized so the
// approximate connection gives Phi = xi0 exactly. The spatial components
// come from the coordinate Jacobian at the sample point. Report-only data.
struct CaloronSample {
  double mu = 1.0;
  std::vector<CaloronPoint> points;
  std::vector<double> r;
  std::vector<CMat> phi;                  // anti-Hermitian part enforced
  std::vector<std::array<CMat, 3>> a3;    // gauge-dependent, reported as norms
  std::vector<double> f_norm;             // orthonormal |F| at the node, phi = 0
  std::vector<double> f_spread;           // max - min of |F| over the phi circle
};
CaloronSample caloron_fields(const MatrixField& h, const EtaCache& cache,
                             const std::vector<double>& a, double mu,
                             const CurvatureField* f = nullptr);

// Least-squares power-law fits y ~ c r^p over r-binned maxima. Exponents are
// reported, never asserted.
struct DecayFit {
  double exponent = 0.0;
  double stderr_exp = 0.0;  // standard error of the fitted slope
  double log_c = 0.0;
  int npoints = 0;
};
struct DecayReport {
  DecayFit phi_dev;   // spectral deviation of Phi from xi0
  DecayFit f_norm;    // curvature magnitude
  double r_min = 0.0, r_max = 0.0;
  double theta_spread = 0.0;  // max over r-bins of the directional spread
};
DecayReport decay_report(const CaloronSample& s, const std::vector<double>& a);

// Runs the flow for e and for lattice_shift(e, k) and compares the
// gauge-invariant densities tr(F ^ F) and sum |Fh_ab|^2_H node-wise.
struct ShiftProbeReport {
  double sup_trff = 0.0;   // sup |density difference|, tr(F ^ F) route
  double rel_trff = 0.0;   // relative to the sup density magnitude
  double sup_f2 = 0.0;     // same for the |F|^2 density
  double rel_f2 = 0.0;
  bool both_converged = false;
};
ShiftProbeReport shift_equivalence_probe(const EtaField& e, const std::vector<int>& k,
                                         const ProductGrid& g, const FlowConfig& cfg);

}  // namespace caloron

#endif
