#pragma once

#include "gpcal/mcmc.hpp"

#include <vector>

namespace gpcal {

struct SmcConfig {
  std::size_t particles = 1000;
  /// Each step keeps ESS at xi times the previous ESS.
  double xi = 0.999;
  /// Resample when ESS drops below psi * M.
  double psi = 0.5;
  std::size_t mutation_sweeps = 3;
  double bisect_tol = 1e-8;
  std::size_t max_steps = 10000;

  void validate() const;
};

/// M weighted particles at learning rate eta. cached_loglik[m] = log q(particles[m]; D) for the
/// dataset the system targets and is refreshed by every mutation.
struct ParticleSystem {
  ParticleMatrix particles;
  LogWeightVector log_w;
  double eta = 0.0;
  Vector cached_loglik;
  RwmhAdaptState adapt;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(particles.rows()); }
  [[nodiscard]] Vector weights() const { return normalize(log_w); }
  [[nodiscard]] double ess() const { return effective_sample_size(weights()); }
};

/// Counts of in-loop finiteness checks. Any violation also aborts the run with an Error.
struct NumericHealth {
  std::size_t checks = 0;
  std::size_t nonfinite_weights = 0;
  std::size_t nonfinite_ess = 0;
  std::size_t nonfinite_targets = 0;

  [[nodiscard]] std::size_t violations() const { return nonfinite_weights + nonfinite_ess + nonfinite_targets; }
  NumericHealth& operator+=(const NumericHealth& other);
};

struct LadderStep {
  double eta = 0.0;
  double ess = 0.0;  ///< after reweighting, before any resampling
  bool resampled = false;
  double accept_rate = 0.0;
  double log_zeta = 0.0;
  bool fallback = false;
};

struct AsmcDiagnostics {
  std::vector<LadderStep> ladder;
  std::size_t resample_count = 0;
  /// Sum of log mean incremental weights: estimate of log Z(eta_end) - log Z(eta_start).
  double log_normalizer_ratio = 0.0;
  std::size_t fallback_count = 0;
  NumericHealth health;
};

/// ESS of log_w + (eta_candidate - eta) * cached_loglik. Returns 1 when those weights degenerate.
double ess_at(const ParticleSystem& system, double eta_candidate);

struct NextEta {
  double eta = 0.0;
  /// ESS was found non-monotone between system.eta and the result.
  bool fallback = false;
};

/// Next learning rate toward eta_target keeping ESS at xi * ESS(current). Works in both directions.
NextEta solve_next_eta(const ParticleSystem& system, double eta_target, const SmcConfig& config);

/// Incremental reweighting to eta_new. Keeps log_w normalized and returns the log of the
/// weighted mean incremental weight. Throws "weight collapse" if every weight vanishes.
double reweight(ParticleSystem& system, double eta_new);

/// One uniform draw per stratum ((m + U) / M); ancestor indices by inverse CDF.
std::vector<std::size_t> stratified_resample(const Eigen::Ref<const Vector>& weights, std::size_t count,
                                             RandomStream& rng);

/// Stratified resampling followed by a reset to uniform weights.
void resample(ParticleSystem& system, RandomStream& rng);

struct MutationStats {
  double accept_rate = 0.0;
};

/// `sweeps` RWMH moves per particle targeting the system's current eta with proposal
/// N(theta, zeta * Sigma); updates zeta from the mean acceptance rate afterwards.
MutationStats mutate(ParticleSystem& system, const PseudoPosteriorModel& model, const Dataset& data,
                     std::size_t sweeps, RandomStream& rng, NumericHealth& health);

/// Adaptive SMC from system.eta to eta_target: solve next eta, reweight, resample when
/// ESS < psi * M, mutate at the new eta. Throws "schedule did not terminate" past max_steps.
AsmcDiagnostics asmc_star(ParticleSystem& system, double eta_target, const PseudoPosteriorModel& model,
                          const Dataset& data, const SmcConfig& config, RandomStream& rng);

/// Particles from an MCMC run at eta1 weighted by the tempered posterior density
/// eta1 * log q + log p evaluated at each draw. Throws "initialization collapse".
ParticleSystem initialize_particles_from_chain(const ParticleMatrix& draws, const PseudoPosteriorModel& model,
                                               const Dataset& data, double eta1);

}  // namespace gpcal
