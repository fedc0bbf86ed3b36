#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace octrack {

/// Seeded standard-normal stream. Streams constructed from the same
/// (seed, stream) pair replay the same sequence; distinct stream indices
/// give independent sequences for parallel Monte Carlo runs.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffull),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream & 0xffffffffull),
                      static_cast<std::uint32_t>(stream >> 32)};
    rng_.seed(seq);
  }

  double draw() { return normal_(rng_); }

  Eigen::VectorXd draw_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal_(rng_);
    return v;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace octrack
