#include "gpcal/smc.hpp"

#include <cmath>
#include <limits>

namespace gpcal {

void SmcConfig::validate() const {
  if (particles < 2) {
    throw Error("smc: at least two particles are required");
  }
  if (!(xi > 0.0 && xi < 1.0)) {
    throw Error("smc: xi must lie in (0, 1)");
  }
  if (!(psi > 0.0 && psi < 1.0)) {
    throw Error("smc: psi must lie in (0, 1)");
  }
  if (mutation_sweeps < 1) {
    throw Error("smc: mutation_sweeps must be positive");
  }
  if (!(bisect_tol > 0.0)) {
    throw Error("smc: bisect_tol must be positive");
  }
  if (max_steps < 1) {
    throw Error("smc: max_steps must be positive");
  }
}

NumericHealth& NumericHealth::operator+=(const NumericHealth& other) {
  checks += other.checks;
  nonfinite_weights += other.nonfinite_weights;
  nonfinite_ess += other.nonfinite_ess;
  nonfinite_targets += other.nonfinite_targets;
  return *this;
}

namespace {

Vector candidate_log_weights(const ParticleSystem& system, double eta_candidate) {
  return system.log_w.log_w + (eta_candidate - system.eta) * system.cached_loglik;
}

/// ESS = exp(2 lse(lw) - lse(2 lw)), computed without leaving log space.
double ess_from_log_weights(const Vector& lw) {
  try {
    const double ess = std::exp(2.0 * log_sum_exp(lw) - log_sum_exp(2.0 * lw));
    return std::clamp(ess, 1.0, static_cast<double>(lw.size()));
  } catch (const DegenerateWeightsError&) {
    return 1.0;
  }
}

void check_weights(const ParticleSystem& system, NumericHealth& health) {
  ++health.checks;
  for (const double v : system.log_w.log_w) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      ++health.nonfinite_weights;
      throw Error("non-finite particle weight");
    }
  }
}

}  // namespace

double ess_at(const ParticleSystem& system, double eta_candidate) {
  return ess_from_log_weights(candidate_log_weights(system, eta_candidate));
}

NextEta solve_next_eta(const ParticleSystem& system, double eta_target, const SmcConfig& config) {
  const double start = system.eta;
  const double goal = config.xi * ess_at(system, start);
  if (ess_at(system, eta_target) > goal) {
    return {eta_target, false};
  }

  // Coarse scan for the first sign change so that a non-monotone ESS curve still yields the
  // crossing nearest the current eta.
  constexpr int kScan = 64;
  double lo = start;
  double hi = eta_target;
  double previous_ess = ess_at(system, start);
  bool nonmonotone = false;
  for (int j = 1; j <= kScan; ++j) {
    const double grid = j == kScan ? eta_target : start + (eta_target - start) * j / kScan;
    const double ess = ess_at(system, grid);
    if (ess > previous_ess * (1.0 + 1e-12)) {
      nonmonotone = true;
    }
    previous_ess = ess;
    if (ess <= goal) {
      hi = grid;
      break;
    }
    lo = grid;
  }

  for (int iter = 0; iter < 200; ++iter) {
    if (std::abs(hi - lo) <= config.bisect_tol * std::max(std::abs(lo), std::abs(hi))) {
      break;
    }
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) {
      break;
    }
    if (ess_at(system, mid) > goal) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // Guarantee progress even when the crossing sits within tolerance of the start.
  return {lo == start ? hi : lo, nonmonotone};
}

double reweight(ParticleSystem& system, double eta_new) {
  if (eta_new == system.eta) {
    return 0.0;
  }
  Vector updated = candidate_log_weights(system, eta_new);
  double log_increment = 0.0;
  try {
    log_increment = log_sum_exp(updated);
  } catch (const DegenerateWeightsError&) {
    throw Error("weight collapse while reweighting from eta = " + std::to_string(system.eta) + " to " +
                std::to_string(eta_new));
  }
  // log_w is kept normalized, so the log-sum of the updated weights is the log mean increment.
  const double previous_total = log_sum_exp(system.log_w.log_w);
  system.log_w.log_w = updated.array() - log_increment;
  system.eta = eta_new;
  return log_increment - previous_total;
}

std::vector<std::size_t> stratified_resample(const Eigen::Ref<const Vector>& weights, std::size_t count,
                                             RandomStream& rng) {
  std::vector<std::size_t> ancestors(count);
  const auto n = static_cast<std::size_t>(weights.size());
  std::size_t j = 0;
  double cumulative = weights[0];
  for (std::size_t m = 0; m < count; ++m) {
    const double u = (static_cast<double>(m) + rng.uniform()) / static_cast<double>(count);
    while (u > cumulative && j + 1 < n) {
      ++j;
      cumulative += weights[static_cast<Eigen::Index>(j)];
    }
    ancestors[m] = j;
  }
  return ancestors;
}

void resample(ParticleSystem& system, RandomStream& rng) {
  const auto ancestors = stratified_resample(system.weights(), system.size(), rng);
  ParticleMatrix particles(system.particles.rows(), system.particles.cols());
  Vector loglik(system.cached_loglik.size());
  for (std::size_t m = 0; m < ancestors.size(); ++m) {
    const auto row = static_cast<Eigen::Index>(m);
    particles.row(row) = system.particles.row(static_cast<Eigen::Index>(ancestors[m]));
    loglik[row] = system.cached_loglik[static_cast<Eigen::Index>(ancestors[m])];
  }
  system.particles = std::move(particles);
  system.cached_loglik = std::move(loglik);
  system.log_w.log_w.setConstant(-std::log(static_cast<double>(system.size())));
}

MutationStats mutate(ParticleSystem& system, const PseudoPosteriorModel& model, const Dataset& data,
                     std::size_t sweeps, RandomStream& rng, NumericHealth& health) {
  const Eigen::Index m_count = system.particles.rows();
  const Eigen::Index dim = system.particles.cols();
  const Matrix factor = system.adapt.proposal_factor();

  Vector log_prior;
  model.log_prior_batch(system.particles, log_prior);
  ParticleMatrix noise(m_count, dim);
  ParticleMatrix proposals(m_count, dim);
  Vector proposal_loglik;
  Vector proposal_prior;
  std::size_t accepted = 0;

  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    for (Eigen::Index m = 0; m < m_count; ++m) {
      for (Eigen::Index k = 0; k < dim; ++k) {
        noise(m, k) = rng.normal();
      }
    }
    proposals.noalias() = system.particles + noise * factor.transpose();
    model.log_pseudo_likelihood_batch(proposals, data, proposal_loglik);
    model.log_prior_batch(proposals, proposal_prior);
    ++health.checks;
    for (Eigen::Index m = 0; m < m_count; ++m) {
      const double proposed = system.eta * proposal_loglik[m] + proposal_prior[m];
      if (std::isnan(proposed) || proposed == std::numeric_limits<double>::infinity()) {
        ++health.nonfinite_targets;
        throw TargetEvaluationError(proposals.row(m).transpose());
      }
      const double current = system.eta * system.cached_loglik[m] + log_prior[m];
      const double delta = proposed - current;
      const double u = rng.uniform();
      if (delta >= 0.0 || u < std::exp(delta)) {
        system.particles.row(m) = proposals.row(m);
        system.cached_loglik[m] = proposal_loglik[m];
        log_prior[m] = proposal_prior[m];
        ++accepted;
      }
    }
  }
  MutationStats stats;
  stats.accept_rate = static_cast<double>(accepted) / static_cast<double>(sweeps * static_cast<std::size_t>(m_count));
  // zeta follows the fraction of accepted moves at this SMC step.
  system.adapt = adapt_scale(std::move(system.adapt), stats.accept_rate);
  return stats;
}

AsmcDiagnostics asmc_star(ParticleSystem& system, double eta_target, const PseudoPosteriorModel& model,
                          const Dataset& data, const SmcConfig& config, RandomStream& rng) {
  config.validate();
  if (!(eta_target > 0.0)) {
    throw Error("asmc: target learning rate must be positive");
  }
  AsmcDiagnostics diag;
  const double resample_threshold = config.psi * static_cast<double>(system.size());
  while (system.eta != eta_target) {
    if (diag.ladder.size() >= config.max_steps) {
      throw Error("schedule did not terminate within " + std::to_string(config.max_steps) + " steps");
    }
    const NextEta next = solve_next_eta(system, eta_target, config);

    // Proposal covariance from the current weighted cloud, rescaled to the next learning rate.
    const WeightedMoments moments = weighted_mean_cov(system.particles, system.weights());
    system.adapt.sigma = moments.cov * (system.eta / next.eta);

    diag.log_normalizer_ratio += reweight(system, next.eta);
    check_weights(system, diag.health);

    LadderStep step;
    step.eta = next.eta;
    step.fallback = next.fallback;
    step.ess = system.ess();
    ++diag.health.checks;
    if (!std::isfinite(step.ess)) {
      ++diag.health.nonfinite_ess;
      throw Error("non-finite effective sample size");
    }
    if (step.ess < resample_threshold) {
      resample(system, rng);
      step.resampled = true;
      ++diag.resample_count;
    }
    step.accept_rate = mutate(system, model, data, config.mutation_sweeps, rng, diag.health).accept_rate;
    step.log_zeta = system.adapt.log_zeta;
    diag.fallback_count += next.fallback ? 1 : 0;
    diag.ladder.push_back(step);
  }
  return diag;
}

ParticleSystem initialize_particles_from_chain(const ParticleMatrix& draws, const PseudoPosteriorModel& model,
                                               const Dataset& data, double eta1) {
  if (draws.rows() < 2) {
    throw Error("insufficient particles");
  }
  ParticleSystem system;
  system.particles = draws;
  system.eta = eta1;
  model.log_pseudo_likelihood_batch(system.particles, data, system.cached_loglik);
  Vector log_prior;
  model.log_prior_batch(system.particles, log_prior);
  Vector log_w = eta1 * system.cached_loglik + log_prior;
  for (const double v : log_w) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw Error("initialization collapse: non-finite posterior density at a draw");
    }
  }
  double total = 0.0;
  try {
    total = log_sum_exp(log_w);
  } catch (const DegenerateWeightsError&) {
    throw Error("initialization collapse");
  }
  system.log_w = LogWeightVector(log_w.array() - total);
  system.adapt = RwmhAdaptState::initial(weighted_mean_cov(system.particles, system.weights()).cov);
  return system;
}

}  // namespace gpcal
