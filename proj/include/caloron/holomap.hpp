#ifndef CALORON_HOLOMAP_HPP
#define CALORON_HOLOMAP_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "caloron/matrix.hpp"
#include "caloron/rational.hpp"

namespace caloron {

// Projection ("blip") family: v is a vector of rational functions of
// W = conj(w) only; f(w)(z) = (I - P(w)) + z P(w) with P = v v^* / |v|^2.
struct BlipMap {
  int dim = 0;
  double mu = 1.0;
  std::vector<Rational> v;

  void validate() const;  // antiholomorphy, nonvanishing at sample points
};

// How the value eta(w, 0) is constrained relative to the target orbit datum:
// strict requires the centraliser of xi0 (block diagonal), permissive only
// the parabolic subalgebra (block upper triangular).
enum class ParabolicMode { kStrict, kPermissive };

// eta(w,z) = sum_{k=0}^{K} eta_k(w) z^k with rational-function entries.
// `a` is the real diagonal of i*xi0 (the target-orbit base point), sorted
// non-increasing.
struct EtaField {
  int dim = 0;
  double mu = 1.0;
  std::vector<double> a;
  int K = 0;
  ParabolicMode mode = ParabolicMode::kStrict;
  // coeffs[k][r*dim + c]
  std::vector<std::vector<Rational>> coeffs;
  // d/dw of each coefficient, precomputed
  std::vector<std::vector<Rational>> dw_coeffs;

  CMat coeff_eval(int k, cplx w) const;
  CMat coeff_dw_eval(int k, cplx w) const;
  CMat eval(cplx w, cplx z) const;      // Horner in z
  CMat eval_at_infinity(cplx z) const;  // 0 by basing
  bool is_zero() const;
};

// Validates invariants (basing decay, parabolic condition at z = 0, finite
// degree) and fills the derivative cache. Throws on violation.
EtaField make_eta_field(int dim, double mu, std::vector<double> a, int K,
                        std::vector<std::vector<Rational>> coeffs, ParabolicMode mode);

// Closed form eta(w,z) = (z - 1) d_W P for the blip family; K = 1, xi0 = 0.
EtaField eta_from_blip(const BlipMap& b);

// f(w)(z) and P(w) for blips, used by the finite-difference oracles.
CMat blip_projection(const BlipMap& b, cplx w);
CMat blip_f(const BlipMap& b, cplx w, cplx z);

// Quadrature over S^2: Gauss-Legendre in cos(theta), trapezoid in the
// azimuth. Error estimate comes from doubling both resolutions.
struct SphereQuad {
  int n_gl = 64;
  int n_az = 64;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;  // |value - value at doubled resolution|
};

// Integral over the w-sphere of a pointwise function against the flat area
// element dA_w = dx dy (the integrand must decay like 1/|w|^2 or faster).
QuadResult sphere_integral(const std::function<double(cplx)>& f, const SphereQuad& q);

// Degree of the map: (1/4pi) int_{S^2} ||f^{-1} d_wbar f||^2 dwbar dw / i with
// the loop-average trace norm on |z| = 1. The theta integral is exact in the
// z-modes of eta.
QuadResult degree(const EtaField& e, const SphereQuad& q = {});

// Shift by an integer diagonal lattice element: xi0' = xi0 + k and
// eta'(w,z) = q(z)^{-1} eta(w,z) q(z) with q = exp(i k ln z), i.e. entry
// (r,c) of the z-power k picks up z^{k_c - k_r}. Throws when the result is
// not polynomial in z (invalid shift).
EtaField lattice_shift(const EtaField& e, const std::vector<int>& k);

// Parses the map input format (see docs/formats.md). Accepts a JSON text
// with dim, mu, xi0, and either a blip vector or eta coefficients.
EtaField load_map_json(const std::string& text);
std::optional<BlipMap> load_blip_json(const std::string& text);

}  // namespace caloron

#endif
