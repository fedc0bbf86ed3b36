#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "octrack/errors.hpp"

namespace octrack {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline bool is_finite(const Eigen::Ref<const MatrixXd>& m) {
  return m.allFinite();
}

inline MatrixXd symmetrized(const Eigen::Ref<const MatrixXd>& m) {
  return 0.5 * (m + m.transpose());
}

inline bool is_symmetric(const Eigen::Ref<const MatrixXd>& m, double rel_tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.norm());
  return (m - m.transpose()).norm() <= rel_tol * scale;
}

/// Largest real part over the eigenvalues of a (square, real) matrix.
inline double max_real_eigenvalue(const Eigen::Ref<const MatrixXd>& m) {
  const VectorXcd ev = m.eigenvalues();
  double worst = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) worst = std::max(worst, ev[i].real());
  return worst;
}

inline bool is_hurwitz(const Eigen::Ref<const MatrixXd>& m) {
  return max_real_eigenvalue(m) < 0.0;
}

inline double min_eigenvalue_sym(const Eigen::Ref<const MatrixXd>& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(m));
  return es.eigenvalues().minCoeff();
}

inline bool is_psd(const Eigen::Ref<const MatrixXd>& m, double tol = 1e-10) {
  if (!is_symmetric(m, 1e-9)) return false;
  return min_eigenvalue_sym(m) >= -tol * std::max(1.0, m.norm());
}

inline bool is_positive_definite(const Eigen::Ref<const MatrixXd>& m) {
  if (!is_symmetric(m, 1e-9)) return false;
  Eigen::LLT<MatrixXd> llt(symmetrized(m));
  return llt.info() == Eigen::Success;
}

/// Symmetric PSD square root via eigendecomposition (negative ripple clamped).
inline MatrixXd psd_sqrt(const Eigen::Ref<const MatrixXd>& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(m));
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-10 * scale)
    throw NotSolvable("psd_sqrt: matrix is not positive semidefinite");
  VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

/// Numerical rank: singular values above max(dim) * eps * sigma_max.
template <typename Derived>
inline Eigen::Index svd_rank(const Eigen::MatrixBase<Derived>& m) {
  using Mat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::JacobiSVD<Mat> svd(m.derived());
  if (svd.singularValues().size() == 0) return 0;
  const double smax = svd.singularValues()(0);
  const double tol = static_cast<double>(std::max(m.rows(), m.cols())) *
                     std::numeric_limits<double>::epsilon() * smax;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol) ++r;
  return r;
}

/// PBH rank test: (A, B) is stabilizable iff [A - mu*I, B] has full row rank
/// at every eigenvalue mu of A with nonnegative real part.
/// Returns the offending eigenvalues (empty means stabilizable).
inline std::vector<std::complex<double>> pbh_unstabilizable_modes(
    const Eigen::Ref<const MatrixXd>& A, const Eigen::Ref<const MatrixXd>& B) {
  if (A.rows() != A.cols() || B.rows() != A.rows())
    throw DimensionMismatch("pbh: A must be square and share rows with B");
  const Eigen::Index n = A.rows();
  const double edge = 100.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, A.norm());
  std::vector<std::complex<double>> bad;
  const VectorXcd ev = A.eigenvalues();
  MatrixXcd pencil(n, n + B.cols());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i].real() < -edge) continue;
    pencil.leftCols(n) = A.cast<std::complex<double>>() -
                         ev[i] * MatrixXcd::Identity(n, n);
    pencil.rightCols(B.cols()) = B.cast<std::complex<double>>();
    if (svd_rank(pencil) < n) bad.push_back(ev[i]);
  }
  return bad;
}

inline bool pbh_stabilizable(const Eigen::Ref<const MatrixXd>& A,
                             const Eigen::Ref<const MatrixXd>& B) {
  return pbh_unstabilizable_modes(A, B).empty();
}

/// (A, C) detectable iff (A^T, C^T) stabilizable.
inline bool pbh_detectable(const Eigen::Ref<const MatrixXd>& A,
                           const Eigen::Ref<const MatrixXd>& C) {
  return pbh_stabilizable(A.transpose(), C.transpose());
}

}  // namespace octrack
