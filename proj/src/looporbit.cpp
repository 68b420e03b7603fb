#include "caloron/looporbit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

namespace caloron {

using std::numbers::pi;

LoopAlgebraElement LoopAlgebraElement::constant(const CMat& xi, double mu) {
  LoopAlgebraElement e;
  e.dim = static_cast<int>(xi.rows());
  e.mu = mu;
  e.mmax = 0;
  e.modes = {xi};
  e.validate();
  return e;
}

LoopAlgebraElement LoopAlgebraElement::zero(int dim, double mu) {
  return constant(CMat::Zero(dim, dim), mu);
}

CMat LoopAlgebraElement::eval(double theta) const {
  CMat out = CMat::Zero(dim, dim);
  for (int m = -mmax; m <= mmax; ++m)
    out += mode(m) * std::exp(cplx(0.0, m * theta));
  return out;
}

bool LoopAlgebraElement::is_constant(double tol) const {
  double scale = 0.0;
  for (const auto& c : modes) scale = std::max(scale, c.norm());
  for (int m = -mmax; m <= mmax; ++m)
    if (m != 0 && mode(m).norm() > tol * std::max(1.0, scale)) return false;
  return true;
}

void LoopAlgebraElement::validate() const {
  if (dim < 1) throw std::invalid_argument("loop element: dim < 1");
  if (mu <= 0.0) throw std::invalid_argument("loop element: mu must be positive");
  if (static_cast<int>(modes.size()) != 2 * mmax + 1)
    throw std::invalid_argument("loop element: mode count mismatch");
  double scale = 0.0;
  for (const auto& c : modes) scale = std::max(scale, c.norm());
  for (int m = 0; m <= mmax; ++m) {
    CMat s = mode(-m) + mode(m).adjoint();
    if (s.norm() > 1e-10 * std::max(1.0, scale))
      throw std::invalid_argument("loop element: modes not anti-Hermitian paired");
  }
}

LoopWithD twisted_bracket(const LoopWithD& a, const LoopWithD& b) {
  const auto& x = a.elem;
  const auto& y = b.elem;
  if (x.dim != y.dim) throw std::invalid_argument("twisted_bracket: dimension mismatch");
  LoopWithD out;
  out.d = 0.0;
  out.elem.dim = x.dim;
  out.elem.mu = x.mu;
  out.elem.mmax = x.mmax + y.mmax;
  out.elem.modes.assign(static_cast<size_t>(2 * out.elem.mmax + 1), CMat::Zero(x.dim, x.dim));
  for (int p = -x.mmax; p <= x.mmax; ++p)
    for (int q = -y.mmax; q <= y.mmax; ++q)
      out.elem.mode(p + q) += x.mode(p) * y.mode(q) - y.mode(q) * x.mode(p);
  // - y dX/dtheta + x dY/dtheta; mode m picks up a factor i m.
  for (int m = -x.mmax; m <= x.mmax; ++m)
    out.elem.mode(m) += -b.d * cplx(0.0, m) * x.mode(m);
  for (int m = -y.mmax; m <= y.mmax; ++m)
    out.elem.mode(m) += a.d * cplx(0.0, m) * y.mode(m);
  return out;
}

namespace {

std::vector<CMat> integrate_path(const std::function<CMat(double)>& xi, double mu,
                                 int dim, int steps) {
  std::vector<CMat> h(static_cast<size_t>(steps) + 1);
  h[0] = CMat::Identity(dim, dim);
  const double dt = 2.0 * pi / steps;
  auto rhs = [&](double th, const CMat& m) -> CMat { return (-1.0 / mu) * (xi(th) * m); };
  for (int k = 0; k < steps; ++k) {
    double th = k * dt;
    const CMat& y = h[static_cast<size_t>(k)];
    CMat k1 = rhs(th, y);
    CMat k2 = rhs(th + 0.5 * dt, y + 0.5 * dt * k1);
    CMat k3 = rhs(th + 0.5 * dt, y + 0.5 * dt * k2);
    CMat k4 = rhs(th + dt, y + dt * k3);
    h[static_cast<size_t>(k) + 1] = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return h;
}

}  // namespace

Holonomy holonomy_fn(const std::function<CMat(double)>& xi, double mu, int dim,
                     int steps, double tol) {
  CMat coarse = integrate_path(xi, mu, dim, steps).back();
  CMat fine = integrate_path(xi, mu, dim, 2 * steps).back();
  if ((coarse - fine).norm() > tol * std::max(1.0, fine.norm()))
    throw std::runtime_error("holonomy: step halving failed to reach tolerance");
  return Holonomy{fine};
}

Holonomy holonomy(const LoopAlgebraElement& xi, int steps, double tol) {
  xi.validate();
  if (xi.is_constant()) {
    // Constant-coefficient ODE: M = exp(-2 pi xi / mu), exact up to the
    // eigensolver. i*xi is Hermitian, so go through the spectral route.
    CMat ix = hermitize(cplx(0.0, 1.0) * xi.mode(0));
    Eigen::SelfAdjointEigenSolver<CMat> es(ix);
    CMat m = CMat::Zero(xi.dim, xi.dim);
    for (int j = 0; j < xi.dim; ++j)
      m += std::exp(cplx(0.0, 2.0 * pi * es.eigenvalues()[j] / xi.mu)) *
           (es.eigenvectors().col(j) * es.eigenvectors().col(j).adjoint());
    return Holonomy{m};
  }
  return holonomy_fn([&](double th) { return xi.eval(th); }, xi.mu, xi.dim, steps, tol);
}

std::vector<CMat> holonomy_path(const LoopAlgebraElement& xi, int steps) {
  return integrate_path([&](double th) { return xi.eval(th); }, xi.mu, xi.dim, steps);
}

LoopAlgebraElement orbit_canonical(const LoopAlgebraElement& xi) {
  CMat m = holonomy(xi).matrix;
  Eigen::ComplexEigenSolver<CMat> es(m);
  std::vector<double> a(static_cast<size_t>(xi.dim));
  for (int j = 0; j < xi.dim; ++j) {
    double phase = std::arg(es.eigenvalues()[j]);  // in (-pi, pi]
    a[static_cast<size_t>(j)] = xi.mu * phase / (2.0 * pi);
  }
  std::stable_sort(a.begin(), a.end(), std::greater<double>());
  CMat xi0 = CMat::Zero(xi.dim, xi.dim);
  for (int j = 0; j < xi.dim; ++j) xi0(j, j) = cplx(0.0, -a[static_cast<size_t>(j)]);
  return LoopAlgebraElement::constant(xi0, xi.mu);
}

bool isotropy_check(const std::vector<CMat>& gamma, const LoopAlgebraElement& xi,
                    int steps, double tol) {
  if (gamma.size() != static_cast<size_t>(steps) + 1)
    throw std::invalid_argument("isotropy_check: gamma not sampled on the holonomy grid");
  std::vector<CMat> h = holonomy_path(xi, steps);
  const CMat& g0 = gamma[0];
  CMat m = h.back();
  double scale = std::max(1.0, g0.norm());
  if ((g0 * m - m * g0).norm() > tol * scale) return false;
  for (size_t k = 0; k < h.size(); ++k) {
    CMat expect = h[k] * g0 * h[k].inverse();
    if ((gamma[k] - expect).norm() > tol * scale) return false;
  }
  return true;
}

std::string loop_to_json(const LoopAlgebraElement& xi) {
  nlohmann::json j;
  j["dim"] = xi.dim;
  j["mu"] = xi.mu;
  j["mmax"] = xi.mmax;
  auto& modes = j["modes"] = nlohmann::json::array();
  for (const auto& c : xi.modes) {
    nlohmann::json mat = nlohmann::json::array();
    for (int r = 0; r < xi.dim; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int s = 0; s < xi.dim; ++s)
        row.push_back({c(r, s).real(), c(r, s).imag()});
      mat.push_back(row);
    }
    modes.push_back(mat);
  }
  return j.dump();
}

LoopAlgebraElement loop_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  LoopAlgebraElement xi;
  xi.dim = j.at("dim").get<int>();
  xi.mu = j.at("mu").get<double>();
  xi.mmax = j.at("mmax").get<int>();
  for (const auto& mat : j.at("modes")) {
    CMat c(xi.dim, xi.dim);
    for (int r = 0; r < xi.dim; ++r)
      for (int s = 0; s < xi.dim; ++s)
        c(r, s) = cplx(mat[r][s][0].get<double>(), mat[r][s][1].get<double>());
    xi.modes.push_back(c);
  }
  xi.validate();
  return xi;
}

}  // namespace caloron
