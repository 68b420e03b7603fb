#include "caloron/matrix.hpp"

#include <cmath>

namespace caloron {

bool is_hermitian(const Eigen::Ref<const Eigen::MatrixXcd>& m, double tol) {
  if (m.rows() != m.cols()) return false;
  double scale = m.norm();
  if (scale == 0.0) return true;
  return (m - m.adjoint()).norm() <= tol * scale;
}

bool is_antihermitian(const Eigen::Ref<const Eigen::MatrixXcd>& m, double tol) {
  if (m.rows() != m.cols()) return false;
  double scale = m.norm();
  if (scale == 0.0) return true;
  return (m + m.adjoint()).norm() <= tol * scale;
}

CMat hermitize(const Eigen::Ref<const Eigen::MatrixXcd>& m) {
  return 0.5 * (m + m.adjoint());
}

void check_pd(const Eigen::Ref<const Eigen::MatrixXcd>& h) {
  if (!is_hermitian(h)) throw std::invalid_argument("check_pd: matrix not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
  double lmax = es.eigenvalues().maxCoeff();
  double lmin = es.eigenvalues().minCoeff();
  if (lmax <= 0.0 || lmin <= kEigFloor * lmax)
    throw std::runtime_error("check_pd: positivity loss (min/max eigenvalue ratio below floor)");
}

CMat herm_exp(const Eigen::Ref<const Eigen::MatrixXcd>& x) {
  if (!is_hermitian(x)) throw std::invalid_argument("herm_exp: input not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMat> es(x);
  CMat out = es.eigenvectors() *
             es.eigenvalues().array().exp().matrix().asDiagonal() *
             es.eigenvectors().adjoint();
  return hermitize(out);
}

CMat herm_log(const Eigen::Ref<const Eigen::MatrixXcd>& h) {
  check_pd(h);
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  CMat out = es.eigenvectors() *
             es.eigenvalues().array().log().matrix().asDiagonal() *
             es.eigenvectors().adjoint();
  return hermitize(out);
}

CMat expm(const Eigen::Ref<const Eigen::MatrixXcd>& m) {
  const int n = static_cast<int>(m.rows());
  if (n == 2) {
    // closed form exp(A) = e^m (cosh(q) I + sinh(q)/q (A - m I)),
    // m = tr(A)/2, q^2 = m^2 - det(A); exact for every 2x2 matrix
    cplx tm = 0.5 * (m(0, 0) + m(1, 1));
    cplx det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    cplx q = std::sqrt(tm * tm - det);
    cplx ch, shq;
    if (std::abs(q) < 1e-4) {
      cplx q2 = q * q;
      ch = 1.0 + q2 * (0.5 + q2 / 24.0);
      shq = 1.0 + q2 * (1.0 / 6.0 + q2 / 120.0);
    } else {
      ch = std::cosh(q);
      shq = std::sinh(q) / q;
    }
    cplx em = std::exp(tm);
    CMat r(2, 2);
    r(0, 0) = em * (ch + shq * (m(0, 0) - tm));
    r(0, 1) = em * shq * m(0, 1);
    r(1, 0) = em * shq * m(1, 0);
    r(1, 1) = em * (ch + shq * (m(1, 1) - tm));
    return r;
  }
  double nrm = m.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm
  int squarings = 0;
  CMat a = m;
  if (nrm > 0.5) {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(nrm / 0.5))));
    a /= std::pow(2.0, squarings);
  }
  // Pade(6,6)
  static const double c[7] = {1.0, 0.5, 5.0 / 44.0, 1.0 / 66.0,
                              1.0 / 792.0, 1.0 / 15840.0, 1.0 / 665280.0};
  CMat a2 = a * a;
  CMat u = c[1] * identity(n) + c[3] * a2 + c[5] * a2 * a2;
  u = a * u;
  CMat v = c[0] * identity(n) + c[2] * a2 + c[4] * a2 * a2 + c[6] * a2 * a2 * a2;
  CMat r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

namespace {

// Eigenvalues of H1^{-1} H2 via the Cholesky similarity L^{-1} H2 L^{-*}.
Eigen::VectorXd rel_eigs(const Eigen::Ref<const Eigen::MatrixXcd>& h1,
                         const Eigen::Ref<const Eigen::MatrixXcd>& h2) {
  if (h1.rows() != h2.rows())
    throw std::invalid_argument("metric comparison: dimension mismatch");
  check_pd(h1);
  check_pd(h2);
  Eigen::LLT<CMat> llt(h1);
  CMat l = llt.matrixL();
  CMat s = l.triangularView<Eigen::Lower>().solve(CMat(h2));
  s = l.triangularView<Eigen::Lower>().solve(CMat(s.adjoint())).adjoint();
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(s), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

double dist_d(const Eigen::Ref<const Eigen::MatrixXcd>& h1,
              const Eigen::Ref<const Eigen::MatrixXcd>& h2) {
  Eigen::VectorXd lam = rel_eigs(h1, h2);
  double s = 0.0;
  for (int i = 0; i < lam.size(); ++i) {
    double l = std::log(lam[i]);
    s += l * l;
  }
  return std::sqrt(s);
}

double sigma(const Eigen::Ref<const Eigen::MatrixXcd>& h1,
             const Eigen::Ref<const Eigen::MatrixXcd>& h2) {
  Eigen::VectorXd lam = rel_eigs(h1, h2);
  double s = 0.0;
  for (int i = 0; i < lam.size(); ++i) s += lam[i] + 1.0 / lam[i] - 2.0;
  return s;
}

CMat h_adjoint(const Eigen::Ref<const Eigen::MatrixXcd>& h,
               const Eigen::Ref<const Eigen::MatrixXcd>& m) {
  if (h.rows() != m.rows() || m.rows() != m.cols())
    throw std::invalid_argument("h_adjoint: dimension mismatch");
  return h.partialPivLu().solve(CMat(m.adjoint() * h));
}

double h_norm(const Eigen::Ref<const Eigen::MatrixXcd>& h,
              const Eigen::Ref<const Eigen::MatrixXcd>& m) {
  CMat prod = h_adjoint(h, m) * m;
  return std::sqrt(std::max(0.0, prod.trace().real()));
}

}  // namespace caloron
