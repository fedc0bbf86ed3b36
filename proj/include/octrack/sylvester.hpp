#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "octrack/errors.hpp"
#include "octrack/linalg.hpp"

namespace octrack {

/// Smallest |lambda_i(M) + mu_j(N)| over all eigenvalue pairs. The Sylvester
/// equation M*X + X*N = Q is uniquely solvable iff this is nonzero.
inline double min_eigenvalue_sum(const Eigen::Ref<const MatrixXd>& M,
                                 const Eigen::Ref<const MatrixXd>& N) {
  const VectorXcd em = M.eigenvalues();
  const VectorXcd en = N.eigenvalues();
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < em.size(); ++i)
    for (Eigen::Index j = 0; j < en.size(); ++j)
      best = std::min(best, std::abs(em[i] + en[j]));
  return best;
}

/// Solves M*X + X*N = Q by reduction of both operands to complex Schur form
/// and column-wise triangular back substitution (Bartels-Stewart).
///
/// Throws ResonantSpectra when an eigenvalue of M is within 1e-10 of the
/// negative of an eigenvalue of N, which makes the equation singular.
inline MatrixXd solve_sylvester(const Eigen::Ref<const MatrixXd>& M,
                                const Eigen::Ref<const MatrixXd>& N,
                                const Eigen::Ref<const MatrixXd>& Q) {
  const Eigen::Index m = M.rows(), n = N.rows();
  if (M.cols() != m || N.cols() != n || Q.rows() != m || Q.cols() != n)
    throw DimensionMismatch("solve_sylvester: nonconformable operands");

  Eigen::ComplexSchur<MatrixXcd> sm(M.cast<std::complex<double>>(), true);
  Eigen::ComplexSchur<MatrixXcd> sn(N.cast<std::complex<double>>(), true);
  if (sm.info() != Eigen::Success || sn.info() != Eigen::Success)
    throw NoConvergence("solve_sylvester: Schur decomposition failed");

  const MatrixXcd& TM = sm.matrixT();
  const MatrixXcd& TN = sn.matrixT();
  const MatrixXcd& U = sm.matrixU();
  const MatrixXcd& V = sn.matrixU();

  // Eigenvalues sit on the Schur diagonals; reject near-singular pencils.
  double min_sum = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      min_sum = std::min(min_sum, std::abs(TM(i, i) + TN(j, j)));
  if (min_sum <= 1e-10)
    throw ResonantSpectra(
        "solve_sylvester: eigenvalue of M within 1e-10 of -eigenvalue of N "
        "(min |sum| = " + std::to_string(min_sum) + ")");

  MatrixXcd G = U.adjoint() * Q.cast<std::complex<double>>() * V;
  MatrixXcd Y(m, n);
  MatrixXcd T(m, m);
  for (Eigen::Index j = 0; j < n; ++j) {
    VectorXcd rhs = G.col(j);
    if (j > 0) rhs.noalias() -= Y.leftCols(j) * TN.block(0, j, j, 1);
    T = TM;
    T.diagonal().array() += TN(j, j);
    Y.col(j) = T.triangularView<Eigen::Upper>().solve(rhs);
  }
  return (U * Y * V.adjoint()).real();
}

/// Independent brute-force oracle: solves M*X + X*N = Q through the dense
/// Kronecker system (I (x) M + N^T (x) I) vec(X) = vec(Q). Exact up to the
/// conditioning of one LU solve; intended for verification, not production.
inline MatrixXd sylvester_kron_oracle(const Eigen::Ref<const MatrixXd>& M,
                                      const Eigen::Ref<const MatrixXd>& N,
                                      const Eigen::Ref<const MatrixXd>& Q) {
  const Eigen::Index m = M.rows(), n = N.rows();
  if (M.cols() != m || N.cols() != n || Q.rows() != m || Q.cols() != n)
    throw DimensionMismatch("sylvester_kron_oracle: nonconformable operands");

  MatrixXd big = MatrixXd::Zero(m * n, m * n);
  for (Eigen::Index k = 0; k < n; ++k) big.block(k * m, k * m, m, m) = M;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      big.block(i * m, j * m, m, m).diagonal().array() += N(j, i);

  VectorXd rhs(m * n);
  for (Eigen::Index k = 0; k < n; ++k) rhs.segment(k * m, m) = Q.col(k);

  Eigen::FullPivLU<MatrixXd> lu(big);
  if (!lu.isInvertible())
    throw SingularSystem("sylvester_kron_oracle: Kronecker system is singular");

  const VectorXd x = lu.solve(rhs);
  MatrixXd X(m, n);
  for (Eigen::Index k = 0; k < n; ++k) X.col(k) = x.segment(k * m, m);
  return X;
}

/// Solves the Lyapunov equation A*X + X*A^T + W = 0.
inline MatrixXd solve_lyapunov(const Eigen::Ref<const MatrixXd>& A,
                               const Eigen::Ref<const MatrixXd>& W) {
  return solve_sylvester(A, A.transpose(), -W);
}

}  // namespace octrack
