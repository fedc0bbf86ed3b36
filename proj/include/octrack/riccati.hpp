#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "octrack/errors.hpp"
#include "octrack/linalg.hpp"
#include "octrack/sylvester.hpp"

namespace octrack {

/// Frobenius residual of A^T*P + P*A - P*S*P + Qc, relative to max(1, |Qc|_F).
inline double care_residual(const Eigen::Ref<const MatrixXd>& A,
                            const Eigen::Ref<const MatrixXd>& S,
                            const Eigen::Ref<const MatrixXd>& Qc,
                            const Eigen::Ref<const MatrixXd>& P) {
  const MatrixXd r = A.transpose() * P + P * A - P * S * P + Qc;
  return r.norm() / std::max(1.0, Qc.norm());
}

struct CareOptions {
  double tolerance = 1e-12;   // iterate until relative residual reaches this
  double required = 1e-9;     // reject the answer above this
  int max_iterations = 60;
};

namespace detail {

// Bass shift: P0 = Z^-1 with (A + beta*I)Z + Z(A + beta*I)^T = 2S renders
// A - S*P0 Hurwitz whenever (A, S) is controllable.
inline bool bass_stabilizing_start(const Eigen::Ref<const MatrixXd>& A,
                                   const Eigen::Ref<const MatrixXd>& S,
                                   MatrixXd& P0) {
  const Eigen::Index n = A.rows();
  const double beta = A.norm() + 0.5;
  const MatrixXd shifted = A + beta * MatrixXd::Identity(n, n);
  const MatrixXd Z = symmetrized(solve_sylvester(shifted, shifted.transpose(), 2.0 * S));
  Eigen::FullPivLU<MatrixXd> lu(Z);
  if (!lu.isInvertible()) return false;
  P0 = symmetrized(lu.inverse());
  return is_hurwitz(A - S * P0);
}

}  // namespace detail

/// Invariant-subspace solution of A^T*P + P*A - P*S*P + Qc = 0: the stable
/// invariant subspace of the Hamiltonian [[A, -S], [-Qc, -A^T]] is computed
/// from a reordered complex Schur form, and P recovered from its basis.
/// Serves as an independent cross-check for solve_care.
inline MatrixXd solve_care_hamiltonian(const Eigen::Ref<const MatrixXd>& A,
                                       const Eigen::Ref<const MatrixXd>& S,
                                       const Eigen::Ref<const MatrixXd>& Qc) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || S.rows() != n || S.cols() != n || Qc.rows() != n || Qc.cols() != n)
    throw DimensionMismatch("solve_care_hamiltonian: operands must be n x n");

  MatrixXd H(2 * n, 2 * n);
  H << A, -S, -Qc, -A.transpose();

  Eigen::ComplexSchur<MatrixXcd> schur(H.cast<std::complex<double>>(), true);
  if (schur.info() != Eigen::Success)
    throw NoConvergence("solve_care_hamiltonian: Schur decomposition failed");
  MatrixXcd T = schur.matrixT();
  MatrixXcd U = schur.matrixU();

  const auto stable = [](const std::complex<double>& v) { return v.real() < 0.0; };

  // Bubble stable eigenvalues to the top-left with unitary adjacent swaps.
  const Eigen::Index dim = 2 * n;
  bool moved = true;
  while (moved) {
    moved = false;
    for (Eigen::Index i = 0; i + 1 < dim; ++i) {
      if (stable(T(i, i)) || !stable(T(i + 1, i + 1))) continue;
      // Swap the adjacent diagonal pair (a, c). The rotation maps the
      // eigenvector [b, c - a] of the 2x2 block onto the first coordinate.
      const std::complex<double> a = T(i, i), b = T(i, i + 1), c = T(i + 1, i + 1);
      Eigen::Vector2cd v(b, c - a);
      const double nv = v.norm();
      if (nv == 0.0) continue;  // identical eigenvalues, nothing to reorder
      v /= nv;
      Eigen::Matrix2cd G;
      G << v(0), -std::conj(v(1)), v(1), std::conj(v(0));
      T.block(i, i, 2, dim - i) = G.adjoint() * T.block(i, i, 2, dim - i);
      T.block(0, i, i + 2, 2) = T.block(0, i, i + 2, 2) * G;
      T(i + 1, i) = 0.0;
      U.middleCols(i, 2) = U.middleCols(i, 2) * G;
      moved = true;
    }
  }

  Eigen::Index n_stable = 0;
  for (Eigen::Index i = 0; i < dim; ++i)
    if (stable(T(i, i))) ++n_stable;
  if (n_stable != n)
    throw NotSolvable(
        "solve_care_hamiltonian: Hamiltonian has " + std::to_string(n_stable) +
        " stable eigenvalues, expected " + std::to_string(n) +
        " (system not stabilizable/detectable or eigenvalues on the imaginary axis)");

  const MatrixXcd U1 = U.topLeftCorner(n, n);
  const MatrixXcd U2 = U.bottomLeftCorner(n, n);
  Eigen::FullPivLU<MatrixXcd> lu(U1.transpose());
  if (!lu.isInvertible())
    throw NotSolvable("solve_care_hamiltonian: singular subspace basis");
  const MatrixXcd Pc = lu.solve(U2.transpose()).transpose();
  return symmetrized(Pc.real());
}

/// Stabilizing solution of the continuous algebraic Riccati equation
///   A^T*P + P*A - P*S*P + Qc = 0,    S = B R^-1 B^T,  Qc = C^T Q C,
/// by Newton iteration on the Riccati residual with a Lyapunov equation
/// solved at each step (Kleinman's method). Converges quadratically from a
/// stabilizing start; the start is P = 0 when A is already Hurwitz and a
/// Bass-shift inverse Gramian otherwise.
inline MatrixXd solve_care(const Eigen::Ref<const MatrixXd>& A,
                           const Eigen::Ref<const MatrixXd>& S,
                           const Eigen::Ref<const MatrixXd>& Qc,
                           const CareOptions& opts = {}) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || S.rows() != n || S.cols() != n || Qc.rows() != n || Qc.cols() != n)
    throw DimensionMismatch("solve_care: operands must be n x n");
  if (!is_psd(S) || !is_psd(Qc))
    throw NotSolvable("solve_care: S and Qc must be symmetric positive semidefinite");
  // range(S) = range(B) and null(Qc) = null(Q^1/2 C), so the PBH tests may
  // run on S and Qc directly.
  if (!pbh_stabilizable(A, S))
    throw NotSolvable("solve_care: (A, B) is not stabilizable");
  if (!pbh_detectable(A, Qc))
    throw NotSolvable("solve_care: (A, C^T Q C) is not detectable");

  MatrixXd P;
  if (is_hurwitz(A)) {
    P = MatrixXd::Zero(n, n);
  } else if (!detail::bass_stabilizing_start(A, S, P)) {
    // Uncontrollable (but stabilizable) unstable-free leftover: seed from the
    // invariant-subspace solution and let Newton polish it.
    P = solve_care_hamiltonian(A, S, Qc);
  }

  double residual = care_residual(A, S, Qc, P);
  for (int it = 0; it < opts.max_iterations && residual > opts.tolerance; ++it) {
    const MatrixXd Ak = A - S * P;
    const MatrixXd W = symmetrized(P * S * P + Qc);
    P = symmetrized(solve_sylvester(Ak.transpose(), Ak, -W));
    const double next = care_residual(A, S, Qc, P);
    if (next >= residual && residual <= opts.required) break;  // roundoff floor
    residual = next;
  }
  if (residual > opts.required)
    throw NoConvergence("solve_care: stalled at relative residual " +
                        std::to_string(residual));
  if (!is_hurwitz(A - S * P))
    throw NotSolvable("solve_care: converged solution is not stabilizing");
  return P;
}

}  // namespace octrack
