#ifndef CALORON_MATRIX_HPP
#define CALORON_MATRIX_HPP

#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

namespace caloron {

using cplx = std::complex<double>;

// Dense complex matrices, dim <= 8 throughout, so fixed-capacity storage
// keeps the grid kernels allocation-free.
using CMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 8, 8>;
using CMap = Eigen::Map<Eigen::MatrixXcd>;
using CMapConst = Eigen::Map<const Eigen::MatrixXcd>;

constexpr double kHermTol = 1e-12;
constexpr double kEigFloor = 1e-14;

inline CMat identity(int n) { return CMat::Identity(n, n); }

bool is_hermitian(const Eigen::Ref<const Eigen::MatrixXcd>& m, double tol = kHermTol);
bool is_antihermitian(const Eigen::Ref<const Eigen::MatrixXcd>& m, double tol = kHermTol);

// Symmetric part (M + M^*)/2.
CMat hermitize(const Eigen::Ref<const Eigen::MatrixXcd>& m);

// Throws if H is not Hermitian positive definite. Eigenvalues below
// kEigFloor * lambda_max count as a positivity loss; indefinite metrics are
// never repaired silently.
void check_pd(const Eigen::Ref<const Eigen::MatrixXcd>& h);

// Spectral exponential of a Hermitian matrix; result is Hermitian PD.
CMat herm_exp(const Eigen::Ref<const Eigen::MatrixXcd>& x);

// Spectral logarithm of a Hermitian PD matrix.
CMat herm_log(const Eigen::Ref<const Eigen::MatrixXcd>& h);

// General matrix exponential, Pade(6) with scaling and squaring. Used for
// flow updates H * exp(dt B) where B is H-self-adjoint but not Hermitian.
CMat expm(const Eigen::Ref<const Eigen::MatrixXcd>& m);

// Distance on the space of Hermitian metrics G^c/G:
// d(H1,H2) = sqrt(sum_i ln^2 lambda_i), lambda_i eigenvalues of H1^{-1} H2.
double dist_d(const Eigen::Ref<const Eigen::MatrixXcd>& h1,
              const Eigen::Ref<const Eigen::MatrixXcd>& h2);

// sigma(H1,H2) = tr(H1^{-1} H2) + tr(H1 H2^{-1}) - 2n, comparable to d^2.
double sigma(const Eigen::Ref<const Eigen::MatrixXcd>& h1,
             const Eigen::Ref<const Eigen::MatrixXcd>& h2);

// Conjugate transpose with respect to H: M -> H^{-1} M^* H.
CMat h_adjoint(const Eigen::Ref<const Eigen::MatrixXcd>& h,
               const Eigen::Ref<const Eigen::MatrixXcd>& m);

// |M|_H = sqrt(tr(H^{-1} M^* H M)), the norm induced by h_adjoint.
double h_norm(const Eigen::Ref<const Eigen::MatrixXcd>& h,
              const Eigen::Ref<const Eigen::MatrixXcd>& m);

}  // namespace caloron

#endif
