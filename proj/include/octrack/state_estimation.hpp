#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "octrack/errors.hpp"
#include "octrack/linalg.hpp"
#include "octrack/riccati.hpp"
#include "octrack/system_model.hpp"

namespace octrack {

/// Joint model over the augmented state [x; w; z] with the stacked
/// measurement [y; ytilde]. The estimator sees the plant driven by the
/// disturbance exosystem and, independently, the reference exosystem.
struct AugmentedModel {
  MatrixXd Abar;  // [[A, B2, 0], [0, K, 0], [0, 0, F]]
  MatrixXd Bbar;  // [B1; 0; 0]
  MatrixXd Cbar;  // [[C, 0, 0], [0, 0, H]]
  MatrixXd Qbar;  // blkdiag(Qm, Qmw, Qmz)
  MatrixXd Rbar;  // blkdiag(Qn, Qnz)
  Eigen::Index np = 0, nr = 0, nl = 0;

  Eigen::Index nbar() const { return np + nr + nl; }
};

/// Steady-state filter data: error covariance and injection gain.
struct EstimatorGain {
  MatrixXd Sigma;  // nbar x nbar, symmetric PSD
  MatrixXd L;      // nbar x 2Ns
  double filter_residual = 0.0;  // relative Frobenius residual of the filter ARE
};

/// Estimator state: stacked [xhat; what; zhat] at time t.
struct EstimateState {
  VectorXd xi_hat;
  double t = 0.0;
};

inline AugmentedModel build_augmented(const PlantModel& plant,
                                      const ExosystemModel& exo) {
  const Eigen::Index np = plant.np(), nr = exo.nr(), nl = exo.nl(), ns = plant.ns();
  if (plant.nr() != nr)
    throw DimensionMismatch("build_augmented: plant B2 and exosystem K disagree on Nr");
  if (exo.H.rows() != ns)
    throw DimensionMismatch("build_augmented: H and C disagree on Ns");
  if (plant.Qm.rows() != np || exo.Qmw.rows() != nr || exo.Qmz.rows() != nl ||
      plant.Qn.rows() != ns || exo.Qnz.rows() != ns)
    throw DimensionMismatch("build_augmented: noise intensity dimensions");

  const Eigen::Index nbar = np + nr + nl;
  AugmentedModel m;
  m.np = np; m.nr = nr; m.nl = nl;
  m.Abar = MatrixXd::Zero(nbar, nbar);
  m.Abar.topLeftCorner(np, np) = plant.A;
  m.Abar.block(0, np, np, nr) = plant.B2;
  m.Abar.block(np, np, nr, nr) = exo.K;
  m.Abar.bottomRightCorner(nl, nl) = exo.F;
  m.Bbar = MatrixXd::Zero(nbar, plant.nq());
  m.Bbar.topRows(np) = plant.B1;
  m.Cbar = MatrixXd::Zero(2 * ns, nbar);
  m.Cbar.topLeftCorner(ns, np) = plant.C;
  m.Cbar.bottomRightCorner(ns, nl) = exo.H;
  m.Qbar = MatrixXd::Zero(nbar, nbar);
  m.Qbar.topLeftCorner(np, np) = plant.Qm;
  m.Qbar.block(np, np, nr, nr) = exo.Qmw;
  m.Qbar.bottomRightCorner(nl, nl) = exo.Qmz;
  m.Rbar = MatrixXd::Zero(2 * ns, 2 * ns);
  m.Rbar.topLeftCorner(ns, ns) = plant.Qn;
  m.Rbar.bottomRightCorner(ns, ns) = exo.Qnz;
  return m;
}

/// Steady-state Kalman-Bucy gain from the filter Riccati equation
///   Abar Sigma + Sigma Abar^T - Sigma Cbar^T Rbar^-1 Cbar Sigma + Qbar = 0,
/// solved as the dual of the control equation (solve_care on transposed
/// data). L = Sigma Cbar^T Rbar^-1.
///
/// The degenerate noise-free model (Qbar = 0 with stable Abar) short-circuits
/// to Sigma = 0, L = 0: with no process noise the open-loop model is already
/// the optimal estimator, and a singular Rbar never needs inverting.
inline EstimatorGain solve_filter_gain(const AugmentedModel& m) {
  EstimatorGain g;
  const Eigen::Index nbar = m.nbar();
  if (!pbh_detectable(m.Abar, m.Cbar)) {
    if (!(m.Qbar.norm() == 0.0 && is_hurwitz(m.Abar)))
      throw NotDetectable("solve_filter_gain: (Abar, Cbar) is not detectable");
  }
  if (m.Qbar.norm() == 0.0 && is_hurwitz(m.Abar)) {
    g.Sigma = MatrixXd::Zero(nbar, nbar);
    g.L = MatrixXd::Zero(nbar, m.Cbar.rows());
    return g;
  }

  Eigen::LLT<MatrixXd> rllt(symmetrized(m.Rbar));
  if (rllt.info() != Eigen::Success)
    throw NotSolvable("solve_filter_gain: Rbar must be positive definite");
  const MatrixXd Sf = symmetrized(m.Cbar.transpose() * rllt.solve(m.Cbar));
  g.Sigma = solve_care(m.Abar.transpose(), Sf, symmetrized(m.Qbar));
  g.filter_residual = care_residual(m.Abar.transpose(), Sf, m.Qbar, g.Sigma);
  g.L = g.Sigma * m.Cbar.transpose() * rllt.solve(MatrixXd::Identity(m.Cbar.rows(), m.Cbar.rows()));
  if (!is_hurwitz(m.Abar - g.L * m.Cbar))
    throw NotDetectable("solve_filter_gain: estimator dynamics not Hurwitz");
  return g;
}

/// One explicit Euler step of the innovation-driven observer
///   xi' = Abar xi + Bbar u + L (y_meas - Cbar xi).
inline EstimateState filter_step(const EstimateState& state, const EstimatorGain& gain,
                                 const AugmentedModel& model, const VectorXd& u,
                                 const VectorXd& y_meas, double dt) {
  if (dt <= 0.0) throw NonfiniteInput("filter_step: dt must be positive");
  if (!u.allFinite() || !y_meas.allFinite() || !state.xi_hat.allFinite())
    throw NonfiniteInput("filter_step: nonfinite input");
  if (y_meas.size() != model.Cbar.rows() || u.size() != model.Bbar.cols() ||
      state.xi_hat.size() != model.nbar())
    throw DimensionMismatch("filter_step: input sizes do not match model");

  EstimateState next;
  next.xi_hat = state.xi_hat +
                dt * (model.Abar * state.xi_hat + model.Bbar * u +
                      gain.L * (y_meas - model.Cbar * state.xi_hat));
  next.t = state.t + dt;
  return next;
}

}  // namespace octrack
