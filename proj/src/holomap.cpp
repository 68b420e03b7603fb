#include "caloron/holomap.hpp"

#include <cmath>
#include <functional>
#include <numbers>

#include <nlohmann/json.hpp>

namespace caloron {

using std::numbers::pi;

void BlipMap::validate() const {
  if (dim < 1 || static_cast<int>(v.size()) != dim)
    throw std::invalid_argument("blip: v must have dim entries");
  if (mu <= 0.0) throw std::invalid_argument("blip: mu must be positive");
  for (const auto& r : v)
    if (r.depends_on_w())
      throw std::invalid_argument("blip: v must be antiholomorphic (functions of W only)");
  // nonvanishing on a sample grid of the chart
  for (double rad : {0.0, 0.3, 1.0, 3.0, 10.0, 100.0}) {
    for (int j = 0; j < 8; ++j) {
      cplx w = rad * std::exp(cplx(0.0, 2.0 * pi * j / 8.0 + 0.1));
      double nrm2 = 0.0;
      for (const auto& r : v) nrm2 += std::norm(r.eval(w));
      if (nrm2 < 1e-28) throw std::invalid_argument("blip: v vanishes on the chart");
      if (rad == 0.0) break;
    }
  }
}

CMat EtaField::coeff_eval(int k, cplx w) const {
  CMat m(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) m(r, c) = coeffs[static_cast<size_t>(k)][static_cast<size_t>(r * dim + c)].eval(w);
  return m;
}

CMat EtaField::coeff_dw_eval(int k, cplx w) const {
  CMat m(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) m(r, c) = dw_coeffs[static_cast<size_t>(k)][static_cast<size_t>(r * dim + c)].eval(w);
  return m;
}

CMat EtaField::eval(cplx w, cplx z) const {
  if (std::abs(z) > 1.0 + 1e-12) throw std::invalid_argument("eta eval: |z| > 1");
  CMat m = coeff_eval(K, w);
  for (int k = K - 1; k >= 0; --k) m = m * z + coeff_eval(k, w);
  return m;
}

CMat EtaField::eval_at_infinity(cplx) const { return CMat::Zero(dim, dim); }

bool EtaField::is_zero() const {
  for (const auto& ck : coeffs)
    for (const auto& r : ck)
      if (!r.is_zero(1e-300)) return false;
  return true;
}

EtaField make_eta_field(int dim, double mu, std::vector<double> a, int K,
                        std::vector<std::vector<Rational>> coeffs, ParabolicMode mode) {
  if (dim < 1) throw std::invalid_argument("eta field: dim < 1");
  if (mu <= 0.0) throw std::invalid_argument("eta field: mu must be positive");
  if (static_cast<int>(a.size()) != dim) throw std::invalid_argument("eta field: xi0 size mismatch");
  if (K < 0 || static_cast<int>(coeffs.size()) != K + 1)
    throw std::invalid_argument("eta field: coefficient count mismatch");
  for (int j = 0; j + 1 < dim; ++j)
    if (a[static_cast<size_t>(j)] < a[static_cast<size_t>(j) + 1] - 1e-12)
      throw std::invalid_argument("eta field: xi0 diagonal must be sorted non-increasing");
  for (const auto& ck : coeffs)
    if (static_cast<int>(ck.size()) != dim * dim)
      throw std::invalid_argument("eta field: coefficient matrix size mismatch");

  // Basing: every nonzero entry must decay at w = infinity, i.e. numerator
  // total degree strictly below denominator total degree.
  for (const auto& ck : coeffs)
    for (const auto& r : ck)
      if (!r.is_zero(1e-300) && r.num().total_degree() >= r.den().total_degree())
        throw std::invalid_argument("eta field: not based (coefficient does not vanish at w=infinity)");

  // Parabolic condition on eta(w, 0).
  const double tie = 1e-10;
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) {
      const auto& entry = coeffs[0][static_cast<size_t>(r * dim + c)];
      if (entry.is_zero(1e-300)) continue;
      double ar = a[static_cast<size_t>(r)], ac = a[static_cast<size_t>(c)];
      bool same_block = std::abs(ar - ac) <= tie;
      if (mode == ParabolicMode::kStrict && !same_block)
        throw std::invalid_argument("eta field: eta(w,0) outside the centraliser (strict mode)");
      if (mode == ParabolicMode::kPermissive && !same_block && ar < ac)
        throw std::invalid_argument("eta field: eta(w,0) outside the parabolic subalgebra");
    }

  EtaField e;
  e.dim = dim;
  e.mu = mu;
  e.a = std::move(a);
  e.K = K;
  e.mode = mode;
  e.coeffs = std::move(coeffs);
  e.dw_coeffs.resize(e.coeffs.size());
  for (size_t k = 0; k < e.coeffs.size(); ++k) {
    e.dw_coeffs[k].reserve(e.coeffs[k].size());
    for (const auto& r : e.coeffs[k]) e.dw_coeffs[k].push_back(r.d_dw());
  }
  return e;
}

EtaField eta_from_blip(const BlipMap& b) {
  b.validate();
  const int n = b.dim;
  Rational norm2 = Rational::constant(0.0);
  for (const auto& r : b.v) norm2 = norm2 + r * r.conj();
  std::vector<Rational> q(static_cast<size_t>(n * n), Rational::constant(0.0));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      Rational p = b.v[static_cast<size_t>(r)] * b.v[static_cast<size_t>(c)].conj() / norm2;
      q[static_cast<size_t>(r * n + c)] = p.d_dW();
    }
  std::vector<std::vector<Rational>> coeffs(2);
  coeffs[0].reserve(q.size());
  coeffs[1] = q;
  for (const auto& e : q) coeffs[0].push_back(-e);
  return make_eta_field(n, b.mu, std::vector<double>(static_cast<size_t>(n), 0.0), 1,
                        std::move(coeffs), ParabolicMode::kStrict);
}

CMat blip_projection(const BlipMap& b, cplx w) {
  const int n = b.dim;
  Eigen::VectorXcd v(n);
  for (int j = 0; j < n; ++j) v[j] = b.v[static_cast<size_t>(j)].eval(w);
  double nrm2 = v.squaredNorm();
  if (nrm2 < 1e-28) throw std::runtime_error("blip: v vanishes at evaluation point");
  return (v * v.adjoint()) / nrm2;
}

CMat blip_f(const BlipMap& b, cplx w, cplx z) {
  CMat p = blip_projection(b, w);
  return (CMat::Identity(b.dim, b.dim) - p) + z * p;
}

namespace {

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& wgt) {
  x.assign(static_cast<size_t>(n), 0.0);
  wgt.assign(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (t * p1 - p0) / (t * t - 1.0);
    x[static_cast<size_t>(i)] = t;
    wgt[static_cast<size_t>(i)] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

double sphere_integral_once(const std::function<double(cplx)>& f, int n_gl, int n_az) {
  std::vector<double> t, wt;
  gauss_legendre(n_gl, t, wt);
  double sum = 0.0;
  for (int i = 0; i < n_gl; ++i) {
    // cos(theta) = t; stereographic radius tan(theta/2)
    double rad = std::sqrt(std::max(0.0, (1.0 - t[static_cast<size_t>(i)]) / (1.0 + t[static_cast<size_t>(i)])));
    double ring = 0.0;
    for (int j = 0; j < n_az; ++j) {
      cplx w = rad * std::exp(cplx(0.0, 2.0 * pi * (j + 0.5) / n_az));
      double fac = (1.0 + std::norm(w));
      ring += f(w) * fac * fac / 4.0;
    }
    sum += wt[static_cast<size_t>(i)] * ring * (2.0 * pi / n_az);
  }
  return sum;
}

}  // namespace

QuadResult sphere_integral(const std::function<double(cplx)>& f, const SphereQuad& q) {
  double coarse = sphere_integral_once(f, q.n_gl, q.n_az);
  double fine = sphere_integral_once(f, 2 * q.n_gl, 2 * q.n_az);
  return {fine, std::abs(fine - coarse)};
}

QuadResult degree(const EtaField& e, const SphereQuad& q) {
  // (1/2pi) int sum_k tr(eta_k^* eta_k) dA_w; the theta average over |z|=1
  // of tr(eta^* eta) is exactly sum_k tr(eta_k^* eta_k).
  auto f = [&](cplx w) {
    double s = 0.0;
    for (int k = 0; k <= e.K; ++k) s += e.coeff_eval(k, w).squaredNorm();
    return s;
  };
  QuadResult r = sphere_integral(f, q);
  r.value /= 2.0 * pi;
  r.error /= 2.0 * pi;
  return r;
}

EtaField lattice_shift(const EtaField& e, const std::vector<int>& k) {
  if (static_cast<int>(k.size()) != e.dim)
    throw std::invalid_argument("lattice_shift: k size mismatch");
  int new_k_max = 0;
  for (int m = 0; m <= e.K; ++m)
    for (int r = 0; r < e.dim; ++r)
      for (int c = 0; c < e.dim; ++c) {
        const auto& entry = e.coeffs[static_cast<size_t>(m)][static_cast<size_t>(r * e.dim + c)];
        if (entry.is_zero(1e-300)) continue;
        int p = m + k[static_cast<size_t>(c)] - k[static_cast<size_t>(r)];
        if (p < 0)
          throw std::invalid_argument("lattice_shift: invalid shift (pole in shifted eta)");
        new_k_max = std::max(new_k_max, p);
      }
  std::vector<std::vector<Rational>> coeffs(
      static_cast<size_t>(new_k_max) + 1,
      std::vector<Rational>(static_cast<size_t>(e.dim * e.dim), Rational::constant(0.0)));
  for (int m = 0; m <= e.K; ++m)
    for (int r = 0; r < e.dim; ++r)
      for (int c = 0; c < e.dim; ++c) {
        const auto& entry = e.coeffs[static_cast<size_t>(m)][static_cast<size_t>(r * e.dim + c)];
        if (entry.is_zero(1e-300)) continue;
        int p = m + k[static_cast<size_t>(c)] - k[static_cast<size_t>(r)];
        coeffs[static_cast<size_t>(p)][static_cast<size_t>(r * e.dim + c)] = entry;
      }
  std::vector<double> a = e.a;
  for (int j = 0; j < e.dim; ++j) a[static_cast<size_t>(j)] += k[static_cast<size_t>(j)];
  // The shifted orbit datum need not be sorted; re-sort rows/columns to keep
  // the canonical convention.
  std::vector<int> perm(static_cast<size_t>(e.dim));
  for (int j = 0; j < e.dim; ++j) perm[static_cast<size_t>(j)] = j;
  std::stable_sort(perm.begin(), perm.end(),
                   [&](int x, int y) { return a[static_cast<size_t>(x)] > a[static_cast<size_t>(y)]; });
  std::vector<double> a_sorted(static_cast<size_t>(e.dim));
  for (int j = 0; j < e.dim; ++j) a_sorted[static_cast<size_t>(j)] = a[static_cast<size_t>(perm[static_cast<size_t>(j)])];
  std::vector<std::vector<Rational>> coeffs_sorted(
      coeffs.size(),
      std::vector<Rational>(static_cast<size_t>(e.dim * e.dim), Rational::constant(0.0)));
  for (size_t m = 0; m < coeffs.size(); ++m)
    for (int r = 0; r < e.dim; ++r)
      for (int c = 0; c < e.dim; ++c)
        coeffs_sorted[m][static_cast<size_t>(r * e.dim + c)] =
            coeffs[m][static_cast<size_t>(perm[static_cast<size_t>(r)] * e.dim + perm[static_cast<size_t>(c)])];
  return make_eta_field(e.dim, e.mu, std::move(a_sorted), new_k_max, std::move(coeffs_sorted),
                        e.mode);
}

namespace {

Rational rational_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_array() && j.size() == 2)
    return parse_rational(j[0].get<std::string>(), j[1].get<std::string>());
  throw std::invalid_argument("map input: rational must be a string or [num, den]");
}

}  // namespace

std::optional<BlipMap> load_blip_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("type").get<std::string>() != "blip") return std::nullopt;
  BlipMap b;
  b.dim = j.at("dim").get<int>();
  b.mu = j.value("mu", 1.0);
  for (const auto& s : j.at("v")) b.v.push_back(rational_from_json(s));
  b.validate();
  return b;
}

EtaField load_map_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  std::string type = j.at("type").get<std::string>();
  if (type == "blip") {
    auto b = load_blip_json(text);
    return eta_from_blip(*b);
  }
  if (type != "eta") throw std::invalid_argument("map input: unknown type '" + type + "'");
  int dim = j.at("dim").get<int>();
  double mu = j.value("mu", 1.0);
  std::vector<double> a = j.at("xi0").get<std::vector<double>>();
  int k_deg = j.at("K").get<int>();
  ParabolicMode mode = ParabolicMode::kStrict;
  if (j.value("mode", std::string("strict")) == "permissive") mode = ParabolicMode::kPermissive;
  std::vector<std::vector<Rational>> coeffs;
  for (const auto& mat : j.at("coeffs")) {
    std::vector<Rational> ck;
    for (const auto& row : mat)
      for (const auto& entry : row) ck.push_back(rational_from_json(entry));
    coeffs.push_back(std::move(ck));
  }
  return make_eta_field(dim, mu, std::move(a), k_deg, std::move(coeffs), mode);
}

}  // namespace caloron
