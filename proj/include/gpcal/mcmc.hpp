#pragma once

#include "gpcal/model.hpp"
#include "gpcal/random.hpp"

#include <functional>
#include <optional>

namespace gpcal {

/// Proposal state of the adaptive random-walk kernel: theta' ~ N(theta, zeta * Sigma).
struct RwmhAdaptState {
  Matrix sigma;
  double log_zeta = 0.0;
  std::size_t t = 0;
  double target_accept = 0.25;

  /// Sigma as given and zeta = 2.38^2 / K.
  static RwmhAdaptState initial(Matrix sigma);

  /// Lower Cholesky factor of zeta * regularize(Sigma). Throws "proposal covariance singular".
  [[nodiscard]] Matrix proposal_factor() const;
};

/// Robbins-Monro gain (t + 1)^-0.51 for the log-scale recursion.
double adaptation_gain(std::size_t t);

/// log zeta += gain(t) * (observed - target); t += 1. Acceptance above target widens the proposal.
RwmhAdaptState adapt_scale(RwmhAdaptState state, double observed_accept);

using LogTarget = std::function<double(const Eigen::Ref<const Vector>&)>;

struct RwmhStep {
  Vector theta;
  double log_target = 0.0;
  bool accepted = false;
  double accept_prob = 0.0;
};

/// One Metropolis-Hastings move with a precomputed proposal factor. log_target_current is the
/// target at theta; proposals whose target is -inf are always rejected.
RwmhStep rwmh_step(const Vector& theta, double log_target_current, const Matrix& proposal_factor,
                   const LogTarget& log_target, RandomStream& rng);

RwmhStep rwmh_step(const Vector& theta, const RwmhAdaptState& state, const LogTarget& log_target, RandomStream& rng);

struct ChainOptions {
  std::size_t draws = 20000;
  std::size_t warmup = 20000;
  std::size_t thin = 1;
  Vector init;
  /// Starting proposal covariance; defaults to the model's initial_covariance.
  std::optional<Matrix> initial_cov;
  std::optional<double> initial_log_zeta;
  /// Haario covariance and zeta adaptation during warmup.
  bool adapt = true;
};

struct ChainResult {
  ParticleMatrix draws;
  /// Accepted / proposed over the post-warmup steps.
  double accept_rate = 0.0;
  Vector ess_per_coordinate;
  bool zero_variance = false;
  RwmhAdaptState final_state;
};

/// Adaptive RWMH chain targeting eta * log q + log p. Covariance tracks the running sample
/// covariance during warmup and both covariance and scale are frozen afterwards.
ChainResult run_chain(const PseudoPosteriorModel& model, const Dataset& data, double eta, const ChainOptions& options,
                      RandomStream& rng);

struct ChainEss {
  Vector ess;
  bool zero_variance = false;
};

/// Per-coordinate ESS from Geyer's initial positive sequence, clamped to (0, R].
ChainEss chain_ess(const ParticleMatrix& draws);

}  // namespace gpcal
