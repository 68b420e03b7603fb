#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "caloron/looporbit.hpp"

using namespace caloron;
using std::numbers::pi;

namespace {

std::mt19937_64 rng(7);

CMat random_antihermitian(int n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  CMat m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = cplx(nd(rng), nd(rng));
  return CMat(0.5 * (m - m.adjoint()));
}

LoopAlgebraElement random_loop(int n, int mmax, double mu) {
  LoopAlgebraElement e;
  e.dim = n;
  e.mu = mu;
  e.mmax = mmax;
  e.modes.assign(static_cast<size_t>(2 * mmax + 1), CMat::Zero(n, n));
  std::normal_distribution<double> nd(0.0, 0.3);
  e.mode(0) = CMat(0.3 * random_antihermitian(n));
  for (int m = 1; m <= mmax; ++m) {
    CMat c(n, n);
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s) c(r, s) = cplx(nd(rng), nd(rng));
    e.mode(m) = c;
    e.mode(-m) = -c.adjoint();
  }
  e.validate();
  return e;
}

double loop_norm(const LoopAlgebraElement& e) {
  double s = 0.0;
  for (const auto& c : e.modes) s += c.squaredNorm();
  return std::sqrt(s);
}

LoopAlgebraElement loop_diff(const LoopAlgebraElement& a, const LoopAlgebraElement& b) {
  LoopAlgebraElement out;
  out.dim = a.dim;
  out.mu = a.mu;
  out.mmax = std::max(a.mmax, b.mmax);
  out.modes.assign(static_cast<size_t>(2 * out.mmax + 1), CMat::Zero(a.dim, a.dim));
  for (int m = -a.mmax; m <= a.mmax; ++m) out.mode(m) += a.mode(m);
  for (int m = -b.mmax; m <= b.mmax; ++m) out.mode(m) -= b.mode(m);
  return out;
}

}  // namespace

TEST_CASE("twisted bracket of constants is the matrix commutator") {
  CMat x = random_antihermitian(3), y = random_antihermitian(3);
  LoopWithD a{LoopAlgebraElement::constant(x, 1.0), 0.0};
  LoopWithD b{LoopAlgebraElement::constant(y, 1.0), 0.0};
  LoopWithD r = twisted_bracket(a, b);
  CHECK(r.d == 0.0);
  CHECK((r.elem.mode(0) - CMat(x * y - y * x)).norm() < 1e-13);
}

TEST_CASE("twisted bracket d-part differentiates the loop") {
  // [d, Y] = dY/dtheta: mode m of Y picks up a factor i m
  LoopAlgebraElement y = random_loop(2, 2, 1.0);
  LoopWithD d{LoopAlgebraElement::zero(2, 1.0), 1.0};
  LoopWithD r = twisted_bracket(d, LoopWithD{y, 0.0});
  for (int m = -2; m <= 2; ++m)
    CHECK((r.elem.mode(m) - CMat(cplx(0.0, m) * y.mode(m))).norm() < 1e-13);
}

TEST_CASE("twisted bracket antisymmetry and Jacobi identity") {
  LoopWithD a{random_loop(2, 1, 1.0), 0.7};
  LoopWithD b{random_loop(2, 2, 1.0), -0.3};
  LoopWithD c{random_loop(2, 1, 1.0), 1.1};

  LoopWithD ab = twisted_bracket(a, b);
  LoopWithD ba = twisted_bracket(b, a);
  LoopAlgebraElement anti = loop_diff(ab.elem, ab.elem);
  for (int m = -ab.elem.mmax; m <= ab.elem.mmax; ++m) anti.mode(m) = ab.elem.mode(m) + ba.elem.mode(m);
  CHECK(loop_norm(anti) < 1e-12 * std::max(1.0, loop_norm(ab.elem)));

  LoopWithD j1 = twisted_bracket(a, twisted_bracket(b, c));
  LoopWithD j2 = twisted_bracket(b, twisted_bracket(c, a));
  LoopWithD j3 = twisted_bracket(c, twisted_bracket(a, b));
  LoopAlgebraElement sum = j1.elem;
  sum.mmax = j1.elem.mmax;
  for (int m = -sum.mmax; m <= sum.mmax; ++m)
    sum.mode(m) = j1.elem.mode(m) + j2.elem.mode(m) + j3.elem.mode(m);
  CHECK(loop_norm(sum) < 1e-11 * std::max(1.0, loop_norm(j1.elem)));
}

TEST_CASE("loop element validation rejects broken mode pairing") {
  LoopAlgebraElement e;
  e.dim = 2;
  e.mu = 1.0;
  e.mmax = 1;
  e.modes.assign(3, CMat::Zero(2, 2));
  e.mode(1)(0, 1) = 1.0;  // no matching mode(-1) = -mode(1)^*
  CHECK_THROWS(e.validate());
  e.mode(-1) = -e.mode(1).adjoint();
  CHECK_NOTHROW(e.validate());
}

TEST_CASE("holonomy of zero is the identity") {
  Holonomy h = holonomy(LoopAlgebraElement::zero(3, 0.8));
  CHECK((h.matrix - CMat::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("holonomy of a constant element is exp(-2 pi xi / mu)") {
  for (double mu : {1.0, 0.37}) {
    CMat x = random_antihermitian(3);
    Holonomy h = holonomy(LoopAlgebraElement::constant(x, mu));
    CMat oracle = expm(CMat(-2.0 * pi / mu * x));
    CHECK((h.matrix - oracle).norm() < 1e-10);
  }
}

TEST_CASE("holonomy of an anti-Hermitian loop is unitary") {
  LoopAlgebraElement e = random_loop(3, 2, 1.3);
  CMat m = holonomy(e).matrix;
  CHECK((m * m.adjoint() - CMat::Identity(3, 3)).norm() < 1e-9);
}

TEST_CASE("holonomy_fn agrees with the mode-based integrator") {
  LoopAlgebraElement e = random_loop(2, 2, 1.0);
  CMat m1 = holonomy(e).matrix;
  CMat m2 = holonomy_fn([&](double th) { return e.eval(th); }, e.mu, e.dim).matrix;
  CHECK((m1 - m2).norm() < 1e-12);
}

TEST_CASE("holonomy eigenphases are invariant under a winding gauge loop") {
  // gamma(theta) = diag(e^{i m_j theta}) acts on a constant diagonal element by
  // xi -> xi - mu diag(i m_j); the monodromy eigenvalues must not move.
  double mu = 0.9;
  CMat xi = CMat::Zero(2, 2);
  xi(0, 0) = cplx(0.0, -0.31 * mu);
  xi(1, 1) = cplx(0.0, 0.12 * mu);
  CMat shifted = xi;
  shifted(0, 0) -= cplx(0.0, 1.0) * mu;  // m = (1, -2)
  shifted(1, 1) -= cplx(0.0, -2.0) * mu;
  CMat m1 = holonomy(LoopAlgebraElement::constant(xi, mu)).matrix;
  CMat m2 = holonomy(LoopAlgebraElement::constant(shifted, mu)).matrix;
  Eigen::ComplexEigenSolver<CMat> e1(m1), e2(m2);
  std::vector<double> p1, p2;
  for (int j = 0; j < 2; ++j) {
    p1.push_back(std::arg(e1.eigenvalues()[j]));
    p2.push_back(std::arg(e2.eigenvalues()[j]));
  }
  std::sort(p1.begin(), p1.end());
  std::sort(p2.begin(), p2.end());
  for (int j = 0; j < 2; ++j) CHECK(p1[j] == doctest::Approx(p2[j]).epsilon(1e-8));
}

TEST_CASE("orbit_canonical basics") {
  LoopAlgebraElement zero = LoopAlgebraElement::zero(2, 1.0);
  CHECK(loop_norm(orbit_canonical(zero)) < 1e-12);

  // in-window diagonal data is a fixed point up to sorting
  double mu = 1.0;
  CMat xi0 = CMat::Zero(2, 2);
  xi0(0, 0) = cplx(0.0, -0.3);  // i xi0 = diag(0.3, -0.2)
  xi0(1, 1) = cplx(0.0, 0.2);
  LoopAlgebraElement can = orbit_canonical(LoopAlgebraElement::constant(xi0, mu));
  CHECK(can.is_constant());
  CHECK(std::abs(can.mode(0)(0, 0) - cplx(0.0, -0.3)) < 1e-10);
  CHECK(std::abs(can.mode(0)(1, 1) - cplx(0.0, 0.2)) < 1e-10);
}

TEST_CASE("orbit_canonical recovers eigenphases of a conjugated element") {
  double mu = 1.0;
  CMat d = CMat::Zero(2, 2);
  d(0, 0) = cplx(0.0, -0.4);
  d(1, 1) = cplx(0.0, 0.15);
  // conjugate by a random unitary
  CMat x = random_antihermitian(2);
  CMat v = expm(x);
  CMat xi = v * d * v.adjoint();
  LoopAlgebraElement can = orbit_canonical(LoopAlgebraElement::constant(xi, mu));
  CHECK(std::abs(can.mode(0)(0, 0) - cplx(0.0, -0.4)) < 1e-9);
  CHECK(std::abs(can.mode(0)(1, 1) - cplx(0.0, 0.15)) < 1e-9);
}

TEST_CASE("orbit_canonical lands in the principal branch") {
  double mu = 1.0;
  CMat xi = CMat::Zero(2, 2);
  xi(0, 0) = cplx(0.0, -0.75);  // phase equivalent to -0.25
  xi(1, 1) = cplx(0.0, 0.0);
  LoopAlgebraElement can = orbit_canonical(LoopAlgebraElement::constant(xi, mu));
  // entries of i xi0, sorted non-increasing, in (-mu/2, mu/2]
  double a0 = (cplx(0.0, 1.0) * can.mode(0)(0, 0)).real();
  double a1 = (cplx(0.0, 1.0) * can.mode(0)(1, 1)).real();
  CHECK(a0 >= a1 - 1e-12);
  CHECK(a0 <= mu / 2 + 1e-12);
  CHECK(a1 > -mu / 2 - 1e-12);
  CHECK(a0 == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(a1 == doctest::Approx(-0.25).epsilon(1e-9));
}

TEST_CASE("isotropy_check accepts and rejects correctly") {
  int steps = 512;
  LoopAlgebraElement xi = random_loop(2, 1, 1.0);

  // gamma == I is always in the isotropy subgroup
  std::vector<CMat> id(static_cast<size_t>(steps) + 1, CMat::Identity(2, 2));
  CHECK(isotropy_check(id, xi, steps));

  // gamma(theta) = h(theta) g0 h(theta)^{-1} with [g0, M] = 0 is accepted
  std::vector<CMat> path = holonomy_path(xi, steps);
  CMat m = path.back();
  Eigen::ComplexEigenSolver<CMat> es(m);
  CMat d = CMat::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 3.0;
  CMat g0 = es.eigenvectors() * d * es.eigenvectors().inverse();
  std::vector<CMat> conj(path.size());
  for (size_t k = 0; k < path.size(); ++k)
    conj[k] = path[k] * g0 * path[k].inverse();
  CHECK(isotropy_check(conj, xi, steps));

  // a rigid non-commuting rotation fails for a generic element
  CMat r = expm(CMat(0.7 * random_antihermitian(2)));
  if ((r * m - m * r).norm() > 1e-6) {
    std::vector<CMat> bad(static_cast<size_t>(steps) + 1, r);
    CHECK_FALSE(isotropy_check(bad, xi, steps));
  }
}

TEST_CASE("loop JSON round trip") {
  LoopAlgebraElement e = random_loop(3, 2, 0.45);
  LoopAlgebraElement back = loop_from_json(loop_to_json(e));
  CHECK(back.dim == e.dim);
  CHECK(back.mu == doctest::Approx(e.mu));
  CHECK(back.mmax == e.mmax);
  for (int m = -2; m <= 2; ++m)
    CHECK((back.mode(m) - e.mode(m)).norm() < 1e-14);
}
