#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "caloron/holomap.hpp"

using namespace caloron;
using std::numbers::pi;

namespace {

std::mt19937_64 rng(31);

BlipMap blip_power(int m, double mu = 1.0) {
  BlipMap b;
  b.dim = 2;
  b.mu = mu;
  b.v = {parse_rational("1"), parse_rational("W^" + std::to_string(m))};
  if (m == 1) b.v[1] = parse_rational("W");
  return b;
}

cplx random_point(double radius = 1.5) {
  std::uniform_real_distribution<double> ud(-radius, radius);
  return {ud(rng), ud(rng)};
}

}  // namespace

TEST_CASE("blip validation") {
  CHECK_NOTHROW(blip_power(1).validate());
  BlipMap bad = blip_power(1);
  bad.v[0] = parse_rational("w");  // holomorphic entry forbidden
  CHECK_THROWS(bad.validate());
  bad = blip_power(1);
  bad.v = {parse_rational("W"), parse_rational("W")};  // vanishes at w = 0
  CHECK_THROWS(bad.validate());
  bad = blip_power(1);
  bad.mu = 0.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("blip eta closed form at w = 0") {
  EtaField e = eta_from_blip(blip_power(1));
  CHECK(e.K == 1);
  CHECK(e.dim == 2);
  CHECK(e.a == std::vector<double>{0.0, 0.0});
  for (cplx z : {cplx(0.3, 0.2), cplx(1.0, 0.0), cplx(-0.5, 0.1)}) {
    CMat v = e.eval(cplx(0.0, 0.0), z);
    CHECK(std::abs(v(1, 0) - (z - 1.0)) < 1e-13);
    CHECK(std::abs(v(0, 0)) + std::abs(v(0, 1)) + std::abs(v(1, 1)) < 1e-13);
  }
  CHECK(e.eval_at_infinity(cplx(0.5, 0.0)).norm() == 0.0);
}

TEST_CASE("blip eta equals (z - 1) dP/dW by finite differences") {
  BlipMap b = blip_power(2);
  EtaField e = eta_from_blip(b);
  double h = 1e-6;
  for (int t = 0; t < 10; ++t) {
    cplx w = random_point();
    cplx z(0.4, 0.3);
    // d/dwbar = (d/dx + i d/dy)/2 acting on P(w, conj w)
    CMat dx = (blip_projection(b, w + h) - blip_projection(b, w - h)) / (2.0 * h);
    CMat dy = (blip_projection(b, w + cplx(0, h)) - blip_projection(b, w - cplx(0, h))) /
              (2.0 * h);
    CMat dP = 0.5 * (dx + cplx(0, 1) * dy);
    CMat expect = (z - 1.0) * dP;
    CHECK((e.eval(w, z) - expect).norm() < 1e-8);
  }
}

TEST_CASE("eta is the logarithmic antiholomorphic derivative of f") {
  // f^{-1} d_wbar f = eta, checked with second-order differences of f
  for (int m : {1, 2}) {
    BlipMap b = blip_power(m);
    EtaField e = eta_from_blip(b);
    for (int t = 0; t < 20; ++t) {
      cplx w = random_point();
      cplx z = std::polar(1.0, 2.0 * pi * t / 20.0 + 0.05);
      auto resid = [&](double h) {
        CMat dx = (blip_f(b, w + h, z) - blip_f(b, w - h, z)) / (2.0 * h);
        CMat dy = (blip_f(b, w + cplx(0, h), z) - blip_f(b, w - cplx(0, h), z)) /
                  (2.0 * h);
        CMat df = 0.5 * (dx + cplx(0, 1) * dy);
        CMat fi = blip_f(b, w, z).inverse();
        return (CMat(fi * df) - e.eval(w, z)).norm();
      };
      double r1 = resid(1e-3);
      double r2 = resid(5e-4);
      CHECK(r1 < 1e-4);
      // second-order convergence (skip points where both residuals hit rounding)
      if (r1 > 1e-10) CHECK(r2 < 0.35 * r1);
    }
  }
}

TEST_CASE("Horner evaluation matches the mode sum") {
  EtaField e = eta_from_blip(blip_power(2));
  for (int t = 0; t < 10; ++t) {
    cplx w = random_point();
    cplx z = 0.9 * std::polar(1.0, 0.7 * t);
    CMat sum = CMat::Zero(2, 2);
    cplx zp = 1.0;
    for (int k = 0; k <= e.K; ++k) {
      sum += zp * e.coeff_eval(k, w);
      zp *= z;
    }
    CHECK((e.eval(w, z) - sum).norm() < 1e-14);
  }
  CHECK_THROWS(e.eval(cplx(0.0, 0.0), cplx(1.5, 0.0)));
}

TEST_CASE("sphere integral oracle") {
  // int dA / (1 + |w|^2)^2 = area of the unit sphere / 4 = pi
  QuadResult r = sphere_integral(
      [](cplx w) {
        double d = 1.0 + std::norm(w);
        return 1.0 / (d * d);
      },
      SphereQuad{32, 32});
  CHECK(r.value == doctest::Approx(pi).epsilon(1e-10));
  CHECK(r.error < 1e-10);
}

TEST_CASE("degree of power maps") {
  CHECK(degree(eta_from_blip(blip_power(1))).value == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(degree(eta_from_blip(blip_power(2))).value == doctest::Approx(2.0).epsilon(1e-2));
  CHECK(degree(eta_from_blip(blip_power(3))).value == doctest::Approx(3.0).epsilon(1e-2));
}

TEST_CASE("degree is invariant under target-frame change") {
  BlipMap b;
  b.dim = 2;
  b.mu = 1.0;
  b.v = {parse_rational("1"), parse_rational("(2 + i) + 0.5*W")};
  CHECK(degree(eta_from_blip(b)).value == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("degree of the zero field vanishes") {
  std::vector<std::vector<Rational>> coeffs(1, std::vector<Rational>(4, Rational::constant(0.0)));
  EtaField zero = make_eta_field(2, 1.0, {0.0, 0.0}, 0, coeffs, ParabolicMode::kStrict);
  CHECK(zero.is_zero());
  CHECK(degree(zero).value == doctest::Approx(0.0));
}

TEST_CASE("eta field validation") {
  auto entry = [](const std::string& num, const std::string& den) {
    return parse_rational(num, den);
  };
  std::vector<Rational> zero4(4, Rational::constant(0.0));

  // unsorted orbit diagonal
  CHECK_THROWS(make_eta_field(2, 1.0, {0.0, 1.0}, 0, {zero4}, ParabolicMode::kStrict));

  // non-based coefficient (no decay at w = infinity)
  auto c = std::vector<std::vector<Rational>>{zero4};
  c[0][1] = entry("1", "1");
  CHECK_THROWS(make_eta_field(2, 1.0, {0.0, 0.0}, 0, c, ParabolicMode::kStrict));

  // strict mode: off-block value at z = 0 forbidden
  c[0][1] = entry("1", "1 + w*W");
  CHECK_THROWS(make_eta_field(2, 1.0, {1.0, 0.0}, 0, c, ParabolicMode::kStrict));
  // permissive mode: allowed above the diagonal (a_r > a_c), forbidden below
  CHECK_NOTHROW(make_eta_field(2, 1.0, {1.0, 0.0}, 0, c, ParabolicMode::kPermissive));
  auto c2 = std::vector<std::vector<Rational>>{zero4};
  c2[0][2] = entry("1", "1 + w*W");  // entry (1,0): a_r = 0 < a_c = 1
  CHECK_THROWS(make_eta_field(2, 1.0, {1.0, 0.0}, 0, c2, ParabolicMode::kPermissive));
  // same block is always fine
  auto c3 = std::vector<std::vector<Rational>>{zero4};
  c3[0][1] = entry("W", "1 + w*W");
  CHECK_NOTHROW(make_eta_field(2, 1.0, {0.0, 0.0}, 0, c3, ParabolicMode::kStrict));
}

TEST_CASE("lattice shift by zero is the identity") {
  EtaField e = eta_from_blip(blip_power(1));
  EtaField s = lattice_shift(e, {0, 0});
  CHECK(s.a == e.a);
  CHECK(s.K == e.K);
  for (int t = 0; t < 5; ++t) {
    cplx w = random_point();
    cplx z(0.2, 0.6);
    CHECK((s.eval(w, z) - e.eval(w, z)).norm() < 1e-14);
  }
}

TEST_CASE("lattice shift conjugates z-powers and shifts the orbit datum") {
  std::vector<Rational> zero4(4, Rational::constant(0.0));
  auto c = std::vector<std::vector<Rational>>{zero4};
  c[0][2] = parse_rational("1", "1 + w*W");  // entry (1,0) at z^0
  EtaField e = make_eta_field(2, 1.0, {0.0, 0.0}, 0, c, ParabolicMode::kStrict);

  EtaField s = lattice_shift(e, {1, 0});
  CHECK(s.a == std::vector<double>{1.0, 0.0});
  CHECK(s.K == 1);
  for (int t = 0; t < 5; ++t) {
    cplx w = random_point();
    cplx z(0.3, -0.4);
    // entry (1,0) picks up z^{k_0 - k_1} = z
    CHECK((s.eval(w, z) - CMat(z * e.eval(w, z))).norm() < 1e-13);
  }

  // same entry shifted the other way would need z^{-1}
  CHECK_THROWS(lattice_shift(e, {0, 1}));

  // a pure diagonal field is untouched apart from the orbit datum
  auto cd = std::vector<std::vector<Rational>>{zero4, zero4};
  cd[1][0] = parse_rational("1", "1 + w*W");
  cd[1][3] = parse_rational("W", "1 + w*W");
  EtaField d = make_eta_field(2, 1.0, {0.0, 0.0}, 1, cd, ParabolicMode::kStrict);
  EtaField ds = lattice_shift(d, {2, 2});
  CHECK(ds.a == std::vector<double>{2.0, 2.0});
  for (int t = 0; t < 5; ++t) {
    cplx w = random_point();
    cplx z(0.5, 0.2);
    CHECK((ds.eval(w, z) - d.eval(w, z)).norm() < 1e-13);
  }
}

TEST_CASE("lattice shift re-sorts the orbit diagonal") {
  std::vector<Rational> zero4(4, Rational::constant(0.0));
  auto c = std::vector<std::vector<Rational>>{zero4};
  c[0][0] = parse_rational("1", "1 + w*W");  // entry (0,0)
  EtaField e = make_eta_field(2, 1.0, {0.0, 0.0}, 0, c, ParabolicMode::kStrict);
  EtaField s = lattice_shift(e, {0, 1});  // a becomes (0,1), must re-sort to (1,0)
  CHECK(s.a == std::vector<double>{1.0, 0.0});
  // the nonzero diagonal entry followed its index to position (1,1)
  cplx w = random_point();
  CMat v = s.eval(w, cplx(0.4, 0.1));
  CHECK(std::abs(v(1, 1)) > 1e-3);
  CHECK(std::abs(v(0, 0)) < 1e-14);
}

TEST_CASE("map JSON loading") {
  std::string blip_text = R"({"type":"blip","dim":2,"mu":0.8,"v":["1","W"]})";
  auto b = load_blip_json(blip_text);
  REQUIRE(b.has_value());
  CHECK(b->dim == 2);
  CHECK(b->mu == doctest::Approx(0.8));
  EtaField e1 = load_map_json(blip_text);
  EtaField e2 = eta_from_blip(*b);
  for (int t = 0; t < 5; ++t) {
    cplx w = random_point();
    CHECK((e1.eval(w, cplx(0.3, 0.3)) - e2.eval(w, cplx(0.3, 0.3))).norm() < 1e-14);
  }

  // eta format: coeffs is a list of K+1 matrices, each a list of rows, each
  // row a list of entries; an entry is a polynomial string or a [num, den] pair
  std::string eta_text = R"({
    "type": "eta", "dim": 2, "mu": 1.0, "xi0": [0.0, 0.0], "K": 1,
    "mode": "strict",
    "coeffs": [
      [["0", "0"], ["0", "0"]],
      [["0", "0"], [["1", "1 + w*W"], "0"]]
    ]
  })";
  EtaField e3 = load_map_json(eta_text);
  CHECK(e3.K == 1);
  cplx w0(0.5, -0.2);
  CMat m1 = e3.coeff_eval(1, w0);
  CHECK(std::abs(m1(1, 0) - 1.0 / (1.0 + std::norm(w0))) < 1e-13);
  CHECK(std::abs(m1(0, 0)) + std::abs(m1(0, 1)) + std::abs(m1(1, 1)) < 1e-15);

  EtaField e4 = load_map_json(
      R"({"type":"eta","dim":2,"mu":1.0,"xi0":[0.0,0.0],"K":0,
          "coeffs":[[["0","0"],["0","0"]]]})");
  CHECK(e4.is_zero());

  CHECK_THROWS(load_map_json(R"({"type":"nope","dim":2})"));
}
