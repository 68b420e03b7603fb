#ifndef CALORON_LOOPORBIT_HPP
#define CALORON_LOOPORBIT_HPP

#include <functional>
#include <vector>

#include "caloron/matrix.hpp"

namespace caloron {

// Element (xi, mu) of the extended loop algebra: a finite Fourier series
// xi(theta) = sum_m modes[m] e^{i m theta} that is anti-Hermitian for every
// theta, together with the reciprocal circle radius mu > 0.
struct LoopAlgebraElement {
  int dim = 0;
  double mu = 1.0;
  int mmax = 0;
  std::vector<CMat> modes;  // index m + mmax, m in [-mmax, mmax]

  static LoopAlgebraElement constant(const CMat& xi, double mu);
  static LoopAlgebraElement zero(int dim, double mu);

  const CMat& mode(int m) const { return modes[static_cast<size_t>(m + mmax)]; }
  CMat& mode(int m) { return modes[static_cast<size_t>(m + mmax)]; }

  CMat eval(double theta) const;
  bool is_constant(double tol = 1e-12) const;

  // Throws unless every evaluation is anti-Hermitian, i.e. modes satisfy
  // X_{-m} = -X_m^*.
  void validate() const;
};

struct LoopWithD {
  LoopAlgebraElement elem;
  double d = 0.0;
};

// [X + x d, Y + y d] = [X,Y] - y dX/dtheta + x dY/dtheta, exact in modes;
// the d-component of the result is zero.
LoopWithD twisted_bracket(const LoopWithD& a, const LoopWithD& b);

struct Holonomy {
  CMat matrix;
};

// Monodromy of h' h^{-1} = -xi/mu with h(0) = I; returns M = h(2 pi).
// Classical RK4 with `steps` subdivisions plus a halved-step Richardson
// check against `tol`.
Holonomy holonomy(const LoopAlgebraElement& xi, int steps = 2048, double tol = 1e-10);

// Same integrator for a theta-sampled coefficient; used as an oracle and by
// the isotropy check.
Holonomy holonomy_fn(const std::function<CMat(double)>& xi, double mu, int dim,
                     int steps = 2048, double tol = 1e-10);

// Solution trajectory h(theta_k) on the uniform grid theta_k = 2 pi k / steps,
// k = 0..steps (both endpoints).
std::vector<CMat> holonomy_path(const LoopAlgebraElement& xi, int steps = 2048);

// Constant diagonal representative of the orbit of (xi, mu): diagonal of
// i xi0 real, sorted non-increasing, each entry in (-mu/2, mu/2].
LoopAlgebraElement orbit_canonical(const LoopAlgebraElement& xi);

// Membership test for the isotropy subgroup Z_xi: gamma(0) must centralise
// M_xi and gamma(theta) = h(theta) gamma(0) h(theta)^{-1}. `gamma` is sampled
// on the holonomy_path grid (steps + 1 points).
bool isotropy_check(const std::vector<CMat>& gamma, const LoopAlgebraElement& xi,
                    int steps = 2048, double tol = 1e-8);

// JSON round-trip (modes as arrays of [re, im] pairs).
std::string loop_to_json(const LoopAlgebraElement& xi);
LoopAlgebraElement loop_from_json(const std::string& text);

}  // namespace caloron

#endif
