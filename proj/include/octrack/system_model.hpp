#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include "octrack/errors.hpp"
#include "octrack/linalg.hpp"

namespace octrack {

/// One agent of the network: local dynamics, couplings to neighbours, and
/// its input/disturbance/output blocks.
struct AgentDynamics {
  int index = 0;                      // 1-based agent id
  MatrixXd A_ii;                      // p x p
  std::map<int, MatrixXd> couplings;  // neighbour id -> p x p block
  MatrixXd B1_i;                      // p x q
  MatrixXd B2_i;                      // p x r
  MatrixXd C_i;                       // s x p
};

/// Weighted consensus topology: neighbour weights a_ij, leader gains a_i0,
/// disturbance gains a_vi.
struct ConsensusGraph {
  MatrixXd a_ij;   // N x N, nonnegative, zero diagonal
  VectorXd a_i0;   // length N, nonnegative
  VectorXd a_vi;   // length N
};

/// Stacked LTI plant: x' = A x + B1 u + B2 w + m, y = C x + n.
struct PlantModel {
  MatrixXd A;    // Np x Np
  MatrixXd B1;   // Np x Nq
  MatrixXd B2;   // Np x Nr
  MatrixXd C;    // Ns x Np
  VectorXd x0;   // Np
  MatrixXd Qm;   // process noise intensity, Np x Np, PSD
  MatrixXd Qn;   // measurement noise intensity, Ns x Ns

  Eigen::Index np() const { return A.rows(); }
  Eigen::Index nq() const { return B1.cols(); }
  Eigen::Index nr() const { return B2.cols(); }
  Eigen::Index ns() const { return C.rows(); }
};

/// Exogenous generators: disturbance w' = K w + m_w and reference
/// z' = F z + m_z, ytilde = H z + n_z.
struct ExosystemModel {
  MatrixXd K;     // Nr x Nr
  VectorXd w0;    // Nr
  MatrixXd Qmw;   // Nr x Nr, PSD
  MatrixXd F;     // Nl x Nl
  MatrixXd H;     // Ns x Nl
  VectorXd z0;    // Nl
  MatrixXd Qmz;   // Nl x Nl, PSD
  MatrixXd Qnz;   // Ns x Ns

  Eigen::Index nr() const { return K.rows(); }
  Eigen::Index nl() const { return F.rows(); }
};

/// Quadratic cost weights for the tracking index int e'Qe + u'Ru dt.
struct CostSpec {
  MatrixXd Q;  // Ns x Ns, positive definite
  MatrixXd R;  // Nq x Nq, positive definite
};

/// Stacks per-agent blocks into the network plant. Block (i, j) of A is the
/// coupling A_ij (zero where agents are not connected); B1, B2, C are block
/// diagonal in agent order.
inline PlantModel assemble_plant(const std::vector<AgentDynamics>& agents,
                                 const VectorXd& x0,
                                 const MatrixXd& Qm, const MatrixXd& Qn) {
  if (agents.empty()) throw DimensionMismatch("assemble_plant: no agents");
  const Eigen::Index N = static_cast<Eigen::Index>(agents.size());
  const Eigen::Index p = agents[0].A_ii.rows();
  const Eigen::Index q = agents[0].B1_i.cols();
  const Eigen::Index r = agents[0].B2_i.cols();
  const Eigen::Index s = agents[0].C_i.rows();
  if (p < 1 || q < 1 || r < 1 || s < 1)
    throw DimensionMismatch("assemble_plant: dimensions must be at least 1");

  for (const auto& ag : agents) {
    if (ag.A_ii.rows() != p || ag.A_ii.cols() != p ||
        ag.B1_i.rows() != p || ag.B1_i.cols() != q ||
        ag.B2_i.rows() != p || ag.B2_i.cols() != r ||
        ag.C_i.rows() != s || ag.C_i.cols() != p)
      throw DimensionMismatch("assemble_plant: agent " + std::to_string(ag.index) +
                              " has inconsistent block sizes");
    for (const auto& [j, Aij] : ag.couplings) {
      if (j < 1 || j > static_cast<int>(N) || j == ag.index)
        throw UnknownNeighbor("assemble_plant: agent " + std::to_string(ag.index) +
                              " couples to invalid id " + std::to_string(j));
      if (Aij.rows() != p || Aij.cols() != p)
        throw DimensionMismatch("assemble_plant: coupling block " +
                                std::to_string(ag.index) + "->" + std::to_string(j) +
                                " is not p x p");
    }
  }
  if (x0.size() != N * p)
    throw DimensionMismatch("assemble_plant: x0 must have length N*p");

  PlantModel plant;
  plant.A = MatrixXd::Zero(N * p, N * p);
  plant.B1 = MatrixXd::Zero(N * p, N * q);
  plant.B2 = MatrixXd::Zero(N * p, N * r);
  plant.C = MatrixXd::Zero(N * s, N * p);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& ag = agents[static_cast<size_t>(i)];
    plant.A.block(i * p, i * p, p, p) = ag.A_ii;
    for (const auto& [j, Aij] : ag.couplings)
      plant.A.block(i * p, (j - 1) * p, p, p) = Aij;
    plant.B1.block(i * p, i * q, p, q) = ag.B1_i;
    plant.B2.block(i * p, i * r, p, r) = ag.B2_i;
    plant.C.block(i * s, i * p, s, p) = ag.C_i;
  }
  plant.x0 = x0;
  plant.Qm = Qm;
  plant.Qn = Qn;
  return plant;
}

/// Result of lowering a consensus protocol onto agent blocks. The leader
/// term a_i0 (x0 - x_i) contributes -a_i0*I to A_ii and a row of the
/// reference injection; the disturbance term a_vi v_i becomes the agent's
/// B2 block (a disturbance input channel).
struct ConsensusRealization {
  std::vector<AgentDynamics> agents;
  MatrixXd reference_injection;  // Np x p, block i = a_i0 * I_p
};

/// Expands the weighted-difference protocol
///   x_i' = sum_j a_ij (x_j - x_i) + a_i0 (x0 - x_i) + a_vi v_i
/// into per-agent state-space blocks: A_ii = -(sum_j a_ij + a_i0) I,
/// A_ij = a_ij I. Agents get identity input/output blocks.
inline ConsensusRealization consensus_to_agents(const ConsensusGraph& graph,
                                                Eigen::Index p) {
  const Eigen::Index N = graph.a_ij.rows();
  if (graph.a_ij.cols() != N || graph.a_i0.size() != N || graph.a_vi.size() != N)
    throw DimensionMismatch("consensus_to_agents: graph arrays disagree on N");
  if (p < 1) throw DimensionMismatch("consensus_to_agents: p must be >= 1");
  if (graph.a_ij.minCoeff() < 0.0 || graph.a_i0.minCoeff() < 0.0)
    throw NegativeWeight("consensus_to_agents: weights must be nonnegative");
  for (Eigen::Index i = 0; i < N; ++i)
    if (graph.a_ij(i, i) != 0.0)
      throw NegativeWeight("consensus_to_agents: diagonal weights must be zero");

  ConsensusRealization out;
  out.reference_injection = MatrixXd::Zero(N * p, p);
  const MatrixXd eye = MatrixXd::Identity(p, p);
  for (Eigen::Index i = 0; i < N; ++i) {
    AgentDynamics ag;
    ag.index = static_cast<int>(i) + 1;
    const double degree = graph.a_ij.row(i).sum() + graph.a_i0(i);
    ag.A_ii = -degree * eye;
    for (Eigen::Index j = 0; j < N; ++j)
      if (j != i && graph.a_ij(i, j) != 0.0)
        ag.couplings[static_cast<int>(j) + 1] = graph.a_ij(i, j) * eye;
    ag.B1_i = eye;
    ag.B2_i = graph.a_vi(i) * eye;
    ag.C_i = eye;
    out.agents.push_back(std::move(ag));
    out.reference_injection.block(i * p, 0, p, p) = graph.a_i0(i) * eye;
  }
  return out;
}

/// Observability report for an output pair (F, H).
struct ObservabilityReport {
  bool observable = false;
  Eigen::Index rank = 0;
  Eigen::Index required = 0;
};

/// Rank of the stacked observability matrix [H; HF; ...; HF^(Nl-1)],
/// with the SVD tolerance max(dim) * eps * sigma_max.
inline ObservabilityReport check_observability(const Eigen::Ref<const MatrixXd>& F,
                                               const Eigen::Ref<const MatrixXd>& H) {
  const Eigen::Index nl = F.rows();
  if (F.cols() != nl || H.cols() != nl)
    throw DimensionMismatch("check_observability: H must be s x nl, F nl x nl");
  MatrixXd obs(H.rows() * nl, nl);
  MatrixXd block = H;
  for (Eigen::Index k = 0; k < nl; ++k) {
    obs.middleRows(k * H.rows(), H.rows()) = block;
    block = block * F;
  }
  ObservabilityReport rep;
  rep.required = nl;
  rep.rank = svd_rank(obs);
  rep.observable = (rep.rank == nl);
  return rep;
}

/// Existence/uniqueness checks for the optimal law: stabilizability of
/// (A, B1), detectability of (A, Q^1/2 C), and positive definiteness of the
/// cost weights.
struct SolvabilityReport {
  bool stabilizable = false;
  bool detectable = false;
  bool q_positive_definite = false;
  bool r_positive_definite = false;
  std::vector<std::complex<double>> unstabilizable_modes;
  std::vector<std::complex<double>> undetectable_modes;

  bool ok() const {
    return stabilizable && detectable && q_positive_definite && r_positive_definite;
  }
};

inline SolvabilityReport check_solvability(const PlantModel& plant,
                                           const CostSpec& cost) {
  if (cost.Q.rows() != plant.ns() || cost.R.rows() != plant.nq())
    throw DimensionMismatch("check_solvability: cost weights do not match plant");
  SolvabilityReport rep;
  rep.unstabilizable_modes = pbh_unstabilizable_modes(plant.A, plant.B1);
  rep.stabilizable = rep.unstabilizable_modes.empty();
  rep.q_positive_definite = is_positive_definite(cost.Q);
  rep.r_positive_definite = is_positive_definite(cost.R);
  MatrixXd qc_rows = rep.q_positive_definite
                         ? MatrixXd(psd_sqrt(cost.Q) * plant.C)
                         : MatrixXd(plant.C);
  rep.undetectable_modes =
      pbh_unstabilizable_modes(plant.A.transpose(), qc_rows.transpose());
  rep.detectable = rep.undetectable_modes.empty();
  return rep;
}

}  // namespace octrack
