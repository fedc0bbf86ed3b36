#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "octrack/errors.hpp"
#include "octrack/gain_synthesis.hpp"
#include "octrack/linalg.hpp"
#include "octrack/noise.hpp"
#include "octrack/state_estimation.hpp"
#include "octrack/system_model.hpp"

namespace octrack {

enum class SimMode { kalman, classic, noise_free };

inline std::string to_string(SimMode m) {
  switch (m) {
    case SimMode::kalman: return "kalman";
    case SimMode::classic: return "classic";
    case SimMode::noise_free: return "noise_free";
  }
  return "?";
}

inline SimMode sim_mode_from_string(const std::string& s) {
  if (s == "kalman") return SimMode::kalman;
  if (s == "classic") return SimMode::classic;
  if (s == "noise_free") return SimMode::noise_free;
  throw Error("unknown simulation mode '" + s + "'");
}

struct SimConfig {
  double dt = 1e-3;
  double T = 300.0;
  std::uint64_t seed = 0;
  SimMode mode = SimMode::kalman;
  int record_stride = 1;
};

/// Uniformly sampled closed-loop time series. In kalman and noise_free modes
/// the hat series are the filter state; in classic mode they are that law's
/// information pattern (inverted measurements and the open-loop disturbance).
struct Trace {
  VectorXd times;
  MatrixXd x, x_hat;    // Np x n
  MatrixXd w, w_hat;    // Nr x n
  MatrixXd z, z_hat;    // Nl x n
  MatrixXd u;           // Nq x n
  MatrixXd y, y_tilde;  // Ns x n
  MatrixXd e, e_hat;    // Ns x n
  VectorXd j_running;   // realized cost integral up to each sample

  SimMode mode = SimMode::kalman;
  double dt = 0.0;
  int record_stride = 1;

  Eigen::Index samples() const { return times.size(); }
};

struct CostReport {
  double j_realized = 0.0;   // from measured error and applied control
  double j_estimated = 0.0;  // from estimated error and applied control
  double terminal_error_norm = 0.0;
};

/// One Euler-Maruyama step of the plant. noise_draw is a standard normal
/// vector; the increment is (A x + B1 u + B2 w) dt + Qm^1/2 noise sqrt(dt).
inline VectorXd step_plant(const VectorXd& x, const VectorXd& u, const VectorXd& w,
                           const PlantModel& plant, double dt,
                           const VectorXd& noise_draw) {
  if (dt <= 0.0) throw NonfiniteInput("step_plant: dt must be positive");
  VectorXd next = x + dt * (plant.A * x + plant.B1 * u + plant.B2 * w) +
                  std::sqrt(dt) * (psd_sqrt(plant.Qm) * noise_draw);
  if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 1e12)
    throw NonfiniteState("step_plant: state diverged");
  return next;
}

/// Euler-Maruyama step of both exosystems.
inline std::pair<VectorXd, VectorXd> step_exosystems(const VectorXd& w, const VectorXd& z,
                                                     const ExosystemModel& exo, double dt,
                                                     const VectorXd& draw_w,
                                                     const VectorXd& draw_z) {
  if (dt <= 0.0) throw NonfiniteInput("step_exosystems: dt must be positive");
  VectorXd wn = w + dt * (exo.K * w) + std::sqrt(dt) * (psd_sqrt(exo.Qmw) * draw_w);
  VectorXd zn = z + dt * (exo.F * z) + std::sqrt(dt) * (psd_sqrt(exo.Qmz) * draw_z);
  if (!wn.allFinite() || !zn.allFinite())
    throw NonfiniteState("step_exosystems: state diverged");
  return {wn, zn};
}

/// Noisy measurements y = C x + Qn^1/2 draw, ytilde = H z + Qnz^1/2 draw.
/// Measurement draws are applied per integration step without 1/dt scaling;
/// the same convention feeds both control laws, see README.
inline std::pair<VectorXd, VectorXd> measure(const VectorXd& x, const VectorXd& z,
                                             const PlantModel& plant,
                                             const ExosystemModel& exo,
                                             const VectorXd& draw_y,
                                             const VectorXd& draw_ytilde) {
  VectorXd y = plant.C * x + psd_sqrt(plant.Qn) * draw_y;
  VectorXd yt = exo.H * z + psd_sqrt(exo.Qnz) * draw_ytilde;
  return {y, yt};
}

/// Feedforward-feedback law on the estimated state:
/// u = -(Kx xhat + Kz zhat + Kw what).
inline VectorXd control_kalman(const VectorXd& xi_hat, const GainSet& gains) {
  const Eigen::Index np = gains.Kx.cols(), nr = gains.Kw.cols(), nl = gains.Kz.cols();
  if (xi_hat.size() != np + nr + nl)
    throw DimensionMismatch("control_kalman: xi_hat does not match gain dimensions");
  return -(gains.Kx * xi_hat.head(np) + gains.Kw * xi_hat.segment(np, nr) +
           gains.Kz * xi_hat.tail(nl));
}

/// Unfiltered baseline: the same gains fed with statically inverted
/// measurements and an open-loop disturbance propagation,
/// u = -(Kx C^-1 y + Kz H^-1 ytilde + Kw w_openloop).
inline VectorXd control_classic(const VectorXd& y, const VectorXd& y_tilde,
                                const VectorXd& w_openloop, const GainSet& gains,
                                const PlantModel& plant, const ExosystemModel& exo) {
  if (plant.C.rows() != plant.C.cols())
    throw NotInvertible("control_classic: C must be square");
  if (exo.H.rows() != exo.H.cols())
    throw NotInvertible("control_classic: H must be square");
  Eigen::FullPivLU<MatrixXd> luc(plant.C);
  Eigen::FullPivLU<MatrixXd> luh(exo.H);
  if (!luc.isInvertible()) throw NotInvertible("control_classic: C is singular");
  if (!luh.isInvertible()) throw NotInvertible("control_classic: H is singular");
  return -(gains.Kx * luc.solve(y) + gains.Kz * luh.solve(y_tilde) +
           gains.Kw * w_openloop);
}

namespace detail {

/// Closed-loop rollout on one named noise stream. simulate() and
/// monte_carlo() both land here; runs are strictly sequential and
/// deterministic in (seed, stream, dt, T, mode).
inline std::pair<Trace, CostReport> simulate_stream(
    const PlantModel& plant, const ExosystemModel& exo, const GainSet& gains,
    const AugmentedModel& model, const EstimatorGain& estimator,
    const CostSpec& cost, const SimConfig& cfg, std::uint64_t stream_index) {
  if (cfg.dt <= 0.0 || cfg.T < cfg.dt)
    throw NonfiniteInput("simulate: need 0 < dt <= T");
  if (cfg.record_stride < 1)
    throw NonfiniteInput("simulate: record_stride must be positive");
  const double steps_d = cfg.T / cfg.dt;
  if (steps_d > 9.0e15) throw NonfiniteInput("simulate: T/dt overflows");
  const long long n_steps = std::llround(steps_d);
  const long long stride = cfg.record_stride;
  const long long n_rec = n_steps / stride + 1;

  const Eigen::Index np = plant.np(), nq = plant.nq(), nr = plant.nr(), ns = plant.ns();
  const Eigen::Index nl = exo.nl();
  const bool noisy = (cfg.mode != SimMode::noise_free);
  const bool filtered = (cfg.mode != SimMode::classic);

  // Factor everything once; the per-step loop is pure matvec.
  const MatrixXd sq_qm = psd_sqrt(plant.Qm), sq_qn = psd_sqrt(plant.Qn);
  const MatrixXd sq_qmw = psd_sqrt(exo.Qmw), sq_qmz = psd_sqrt(exo.Qmz);
  const MatrixXd sq_qnz = psd_sqrt(exo.Qnz);
  const double sqdt = std::sqrt(cfg.dt);
  Eigen::FullPivLU<MatrixXd> luc, luh;
  if (!filtered) {
    if (plant.C.rows() != plant.C.cols() || exo.H.rows() != exo.H.cols())
      throw NotInvertible("simulate: classic mode needs square C and H");
    luc.compute(plant.C);
    luh.compute(exo.H);
    if (!luc.isInvertible() || !luh.isInvertible())
      throw NotInvertible("simulate: classic mode needs invertible C and H");
  }

  GaussianStream rng(cfg.seed, stream_index);

  Trace tr;
  tr.mode = cfg.mode;
  tr.dt = cfg.dt;
  tr.record_stride = cfg.record_stride;
  tr.times.resize(n_rec);
  tr.x.resize(np, n_rec); tr.x_hat.resize(np, n_rec);
  tr.w.resize(nr, n_rec); tr.w_hat.resize(nr, n_rec);
  tr.z.resize(nl, n_rec); tr.z_hat.resize(nl, n_rec);
  tr.u.resize(nq, n_rec);
  tr.y.resize(ns, n_rec); tr.y_tilde.resize(ns, n_rec);
  tr.e.resize(ns, n_rec); tr.e_hat.resize(ns, n_rec);
  tr.j_running.resize(n_rec);

  VectorXd x = plant.x0, w = exo.w0, z = exo.z0;
  VectorXd xi_hat(np + nr + nl);
  xi_hat << plant.x0, exo.w0, exo.z0;
  VectorXd w_ol = exo.w0;

  double j_realized = 0.0, j_estimated = 0.0;
  double prev_g_re = 0.0, prev_g_es = 0.0;
  VectorXd e(ns), e_hat(ns), u(nq), y(ns), y_tilde(ns);
  VectorXd x_hat(np), w_hat(nr), z_hat(nl);
  VectorXd ymeas(2 * ns);
  long long rec = 0;

  for (long long k = 0;; ++k) {
    if (noisy) {
      y = plant.C * x + sq_qn * rng.draw_vector(ns);
      y_tilde = exo.H * z + sq_qnz * rng.draw_vector(ns);
    } else {
      y = plant.C * x;
      y_tilde = exo.H * z;
    }

    if (filtered) {
      x_hat = xi_hat.head(np);
      w_hat = xi_hat.segment(np, nr);
      z_hat = xi_hat.tail(nl);
    } else {
      x_hat = luc.solve(y);
      z_hat = luh.solve(y_tilde);
      w_hat = w_ol;
    }
    u = -(gains.Kx * x_hat + gains.Kw * w_hat + gains.Kz * z_hat);
    e = y_tilde - y;
    e_hat = exo.H * z_hat - plant.C * x_hat;

    const double g_u = u.dot(cost.R * u);
    const double g_re = e.dot(cost.Q * e) + g_u;
    const double g_es = e_hat.dot(cost.Q * e_hat) + g_u;
    if (k > 0) {
      j_realized += 0.5 * cfg.dt * (prev_g_re + g_re);
      j_estimated += 0.5 * cfg.dt * (prev_g_es + g_es);
    }
    prev_g_re = g_re;
    prev_g_es = g_es;

    if (k % stride == 0) {
      tr.times[rec] = static_cast<double>(k) * cfg.dt;
      tr.x.col(rec) = x; tr.x_hat.col(rec) = x_hat;
      tr.w.col(rec) = w; tr.w_hat.col(rec) = w_hat;
      tr.z.col(rec) = z; tr.z_hat.col(rec) = z_hat;
      tr.u.col(rec) = u;
      tr.y.col(rec) = y; tr.y_tilde.col(rec) = y_tilde;
      tr.e.col(rec) = e; tr.e_hat.col(rec) = e_hat;
      tr.j_running[rec] = j_realized;
      ++rec;
    }
    if (k == n_steps) break;

    if (noisy) {
      x += cfg.dt * (plant.A * x + plant.B1 * u + plant.B2 * w) +
           sqdt * (sq_qm * rng.draw_vector(np));
      w += cfg.dt * (exo.K * w) + sqdt * (sq_qmw * rng.draw_vector(nr));
      z += cfg.dt * (exo.F * z) + sqdt * (sq_qmz * rng.draw_vector(nl));
    } else {
      x += cfg.dt * (plant.A * x + plant.B1 * u + plant.B2 * w);
      w += cfg.dt * (exo.K * w);
      z += cfg.dt * (exo.F * z);
    }

    if (filtered) {
      ymeas << y, y_tilde;
      xi_hat += cfg.dt * (model.Abar * xi_hat + model.Bbar * u +
                          estimator.L * (ymeas - model.Cbar * xi_hat));
    } else {
      w_ol += cfg.dt * (exo.K * w_ol);
    }

    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12 ||
        !xi_hat.allFinite() || xi_hat.cwiseAbs().maxCoeff() > 1e12)
      throw NonfiniteState("simulate: state diverged at t = " +
                           std::to_string(static_cast<double>(k) * cfg.dt));
  }

  CostReport report;
  report.j_realized = j_realized;
  report.j_estimated = j_estimated;
  report.terminal_error_norm = e.norm();
  return {std::move(tr), report};
}

}  // namespace detail

/// Full closed-loop rollout: plant + exosystems + estimator + control law,
/// Euler-Maruyama at fixed dt, cost by trapezoidal quadrature. Deterministic
/// given (seed, dt, T, mode). noise_free mode runs the filtered law with all
/// noise draws suppressed.
inline std::pair<Trace, CostReport> simulate(const PlantModel& plant,
                                             const ExosystemModel& exo,
                                             const GainSet& gains,
                                             const AugmentedModel& model,
                                             const EstimatorGain& estimator,
                                             const CostSpec& cost,
                                             const SimConfig& cfg) {
  return detail::simulate_stream(plant, exo, gains, model, estimator, cost, cfg, 0);
}

/// Largest norm of the costate identity defect along a noise-free trace.
/// lambda = P xhat + P1 zhat + P2 what is differentiated by central
/// differences over the recorded samples and tested against
/// lambda' + C'QC xhat - C'QH zhat + A' lambda = 0.
inline double costate_residual(const Trace& tr, const GainSet& gains,
                               const PlantModel& plant, const ExosystemModel& exo,
                               const CostSpec& cost) {
  if (tr.mode != SimMode::noise_free)
    throw RequiresNoiseFree("costate_residual: trace must come from a noise_free run");
  const Eigen::Index n = tr.samples();
  if (n < 3) throw DimensionMismatch("costate_residual: need at least 3 samples");

  const MatrixXd CtQC = plant.C.transpose() * cost.Q * plant.C;
  const MatrixXd CtQH = plant.C.transpose() * cost.Q * exo.H;
  const double h = tr.dt * tr.record_stride;

  // lambda at every sample, one matrix product per series
  MatrixXd lam = gains.P * tr.x_hat + gains.P2 * tr.w_hat + gains.P1 * tr.z_hat;
  double worst = 0.0;
  for (Eigen::Index k = 1; k + 1 < n; ++k) {
    const VectorXd lam_dot = (lam.col(k + 1) - lam.col(k - 1)) / (2.0 * h);
    const VectorXd r = lam_dot + CtQC * tr.x_hat.col(k) - CtQH * tr.z_hat.col(k) +
                       plant.A.transpose() * lam.col(k);
    worst = std::max(worst, r.norm());
  }
  return worst;
}

/// Largest costate norm over a trace (companion scale for costate_residual).
inline double costate_max_norm(const Trace& tr, const GainSet& gains) {
  MatrixXd lam = gains.P * tr.x_hat + gains.P2 * tr.w_hat + gains.P1 * tr.z_hat;
  return lam.colwise().norm().maxCoeff();
}

struct ModeStats {
  std::vector<double> j_realized;  // one entry per seed
  double mean = 0.0;
  double stddev = 0.0;
};

struct MonteCarloSummary {
  ModeStats kalman;
  ModeStats classic;
};

namespace detail {
inline void finalize(ModeStats& s) {
  const size_t n = s.j_realized.size();
  double sum = 0.0;
  for (double v : s.j_realized) sum += v;
  s.mean = sum / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : s.j_realized) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(n - 1));
  }
}
}  // namespace detail

/// Paired cost statistics for the filtered law versus the classic baseline.
/// Seed i of both modes consumes the stream derived from (cfg.seed, i), so
/// the two laws face identical noise realizations.
inline MonteCarloSummary monte_carlo(const PlantModel& plant, const ExosystemModel& exo,
                                     const GainSet& gains, const AugmentedModel& model,
                                     const EstimatorGain& estimator, const CostSpec& cost,
                                     const SimConfig& cfg, int n_seeds) {
  if (n_seeds < 1) throw NonfiniteInput("monte_carlo: n_seeds must be >= 1");
  MonteCarloSummary summary;
  SimConfig run = cfg;
  run.record_stride = static_cast<int>(
      std::min<long long>(std::numeric_limits<int>::max(),
                          std::max<long long>(1, std::llround(cfg.T / cfg.dt))));
  for (int i = 0; i < n_seeds; ++i) {
    run.mode = SimMode::kalman;
    auto [trk, ck] = detail::simulate_stream(plant, exo, gains, model, estimator,
                                             cost, run, static_cast<std::uint64_t>(i));
    summary.kalman.j_realized.push_back(ck.j_realized);
    run.mode = SimMode::classic;
    auto [trc, cc] = detail::simulate_stream(plant, exo, gains, model, estimator,
                                             cost, run, static_cast<std::uint64_t>(i));
    summary.classic.j_realized.push_back(cc.j_realized);
  }
  detail::finalize(summary.kalman);
  detail::finalize(summary.classic);
  return summary;
}

}  // namespace octrack
