#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "octrack/errors.hpp"
#include "octrack/linalg.hpp"
#include "octrack/riccati.hpp"
#include "octrack/sylvester.hpp"
#include "octrack/system_model.hpp"

namespace octrack {

/// Solved synthesis data: the Riccati solution P, the feedforward solutions
/// P1 (reference) and P2 (disturbance), and the control gains of
///   u = -(Kx xhat + Kz zhat + Kw what).
struct GainSet {
  MatrixXd P;    // Np x Np, symmetric PSD, stabilizing
  MatrixXd P1;   // Np x Nl
  MatrixXd P2;   // Np x Nr
  MatrixXd S;    // B1 R^-1 B1^T
  MatrixXd Kx;   // R^-1 B1^T P
  MatrixXd Kz;   // R^-1 B1^T P1
  MatrixXd Kw;   // R^-1 B1^T P2
  double care_residual = 0.0;         // relative Frobenius
  double reference_residual = 0.0;    // relative Frobenius
  double disturbance_residual = 0.0;  // relative Frobenius
};

/// Solves the reference feedforward equation in its derivation-consistent
/// linear (Sylvester) form  (A - S P)^T P1 + P1 F = C^T Q H.
inline MatrixXd solve_reference_equation(const Eigen::Ref<const MatrixXd>& A,
                                         const Eigen::Ref<const MatrixXd>& S,
                                         const Eigen::Ref<const MatrixXd>& P,
                                         const Eigen::Ref<const MatrixXd>& F,
                                         const Eigen::Ref<const MatrixXd>& CtQH) {
  const MatrixXd acl_t = (A - S * P).transpose();
  return solve_sylvester(acl_t, F, CtQH);
}

/// Solves the disturbance feedforward equation in its linear form
///   (A - S P)^T P2 + P2 K = -P B2.
inline MatrixXd solve_disturbance_equation(const Eigen::Ref<const MatrixXd>& A,
                                           const Eigen::Ref<const MatrixXd>& S,
                                           const Eigen::Ref<const MatrixXd>& P,
                                           const Eigen::Ref<const MatrixXd>& K,
                                           const Eigen::Ref<const MatrixXd>& PB2) {
  const MatrixXd acl_t = (A - S * P).transpose();
  return solve_sylvester(acl_t, K, -PB2);
}

/// Residuals of the quadratic variants of the two feedforward equations,
///   P1 F - P1 S P1 - C^T Q H + A^T P1   and   A^T P2 + P2 K - P2 S P2 + P B2,
/// evaluated at the solutions of the linear forms. Reported for diagnosis
/// only: the costate derivation forces the linear forms, so these residuals
/// are nonzero in general.
struct QuadraticFormResiduals {
  double reference = 0.0;
  double disturbance = 0.0;
};

inline QuadraticFormResiduals quadratic_form_residuals(const GainSet& g,
                                                       const PlantModel& plant,
                                                       const ExosystemModel& exo,
                                                       const CostSpec& cost) {
  const MatrixXd CtQH = plant.C.transpose() * cost.Q * exo.H;
  QuadraticFormResiduals r;
  r.reference = (g.P1 * exo.F - g.P1 * g.S * g.P1 - CtQH +
                 plant.A.transpose() * g.P1).norm() / std::max(1.0, CtQH.norm());
  const MatrixXd PB2 = g.P * plant.B2;
  r.disturbance = (plant.A.transpose() * g.P2 + g.P2 * exo.K - g.P2 * g.S * g.P2 +
                   PB2).norm() / std::max(1.0, PB2.norm());
  return r;
}

/// Full synthesis: Riccati equation, both feedforward equations, gains.
/// Throws NotSolvable/ResonantSpectra/NoConvergence on the documented
/// failure modes; the returned set satisfies every GainSet invariant.
inline GainSet compute_gains(const PlantModel& plant, const ExosystemModel& exo,
                             const CostSpec& cost, const CareOptions& opts = {}) {
  const SolvabilityReport rep = check_solvability(plant, cost);
  if (!rep.ok())
    throw NotSolvable(std::string("compute_gains: solvability checks failed:") +
                      (rep.stabilizable ? "" : " (A,B1) not stabilizable;") +
                      (rep.detectable ? "" : " (A,Q^1/2 C) not detectable;") +
                      (rep.q_positive_definite ? "" : " Q not positive definite;") +
                      (rep.r_positive_definite ? "" : " R not positive definite;"));

  GainSet g;
  Eigen::LLT<MatrixXd> rllt(symmetrized(cost.R));
  const MatrixXd Rinv_B1t = rllt.solve(plant.B1.transpose());
  g.S = symmetrized(plant.B1 * Rinv_B1t);
  const MatrixXd Qc = symmetrized(plant.C.transpose() * cost.Q * plant.C);

  g.P = solve_care(plant.A, g.S, Qc, opts);
  g.care_residual = care_residual(plant.A, g.S, Qc, g.P);

  const MatrixXd CtQH = plant.C.transpose() * cost.Q * exo.H;
  g.P1 = solve_reference_equation(plant.A, g.S, g.P, exo.F, CtQH);
  const MatrixXd acl_t = (plant.A - g.S * g.P).transpose();
  g.reference_residual = (acl_t * g.P1 + g.P1 * exo.F - CtQH).norm() /
                         std::max(1.0, CtQH.norm());

  const MatrixXd PB2 = g.P * plant.B2;
  g.P2 = solve_disturbance_equation(plant.A, g.S, g.P, exo.K, PB2);
  g.disturbance_residual = (acl_t * g.P2 + g.P2 * exo.K + PB2).norm() /
                           std::max(1.0, PB2.norm());

  g.Kx = rllt.solve(plant.B1.transpose() * g.P);
  g.Kz = rllt.solve(plant.B1.transpose() * g.P1);
  g.Kw = rllt.solve(plant.B1.transpose() * g.P2);

  if (g.care_residual > 1e-9)
    throw NoConvergence("compute_gains: Riccati residual above tolerance");
  if (g.reference_residual > 1e-10 || g.disturbance_residual > 1e-10)
    throw NoConvergence("compute_gains: feedforward residual above tolerance");
  if (!is_hurwitz(plant.A - g.S * g.P))
    throw NotSolvable("compute_gains: closed loop is not Hurwitz");
  return g;
}

}  // namespace octrack
