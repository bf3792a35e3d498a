#include "gpcal/gpc.hpp"

#include "gpcal/data.hpp"
#include "gpcal/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace gpcal {

double CredibleSet::mahalanobis2(const Eigen::Ref<const Vector>& theta) const {
  return (chol_prec * (theta - center)).squaredNorm();
}

namespace {

/// Smallest value whose cumulative weight reaches `level`.
double weighted_quantile(const Vector& values, const Eigen::Ref<const Vector>& weights, double level) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
  double cumulative = 0.0;
  for (const Eigen::Index i : order) {
    cumulative += weights[i];
    if (cumulative >= level - 1e-12) {
      return values[i];
    }
  }
  return values[order.back()];
}

}  // namespace

CredibleSet credible_set(const ParticleMatrix& particles, const Eigen::Ref<const Vector>& weights, double alpha,
                         CredibleShape shape) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error("credible set: alpha must lie in (0, 1)");
  }
  if (particles.rows() <= particles.cols()) {
    throw Error("credible set: need more particles than parameters");
  }
  const WeightedMoments moments = weighted_mean_cov(particles, weights);
  CredibleSet set;
  set.shape = shape;
  set.center = moments.mean;
  const Eigen::Index dim = particles.cols();

  if (shape == CredibleShape::Box) {
    set.lower.resize(dim);
    set.upper.resize(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      const Vector column = particles.col(k);
      set.lower[k] = weighted_quantile(column, weights, 0.5 * alpha);
      set.upper[k] = weighted_quantile(column, weights, 1.0 - 0.5 * alpha);
    }
    set.chol_prec = Matrix::Identity(dim, dim);
    return set;
  }

  if (moments.cov.isZero(0.0)) {
    // Every weighted particle sits on the centre: the set collapses to that point.
    set.chol_prec = Matrix::Identity(dim, dim);
    set.radius2 = 0.0;
    return set;
  }
  // Jitter only when the plain factorization fails so that well-conditioned sets stay exactly
  // affine invariant.
  Eigen::LLT<Matrix> llt(moments.cov);
  if (llt.info() != Eigen::Success) {
    llt.compute(regularize_covariance(moments.cov));
  }
  if (llt.info() != Eigen::Success) {
    throw Error("degenerate posterior");
  }
  set.chol_prec = Matrix(llt.matrixL()).triangularView<Eigen::Lower>().solve(Matrix::Identity(dim, dim));
  if (!set.chol_prec.allFinite()) {
    throw Error("degenerate posterior");
  }
  Vector distances(particles.rows());
  for (Eigen::Index m = 0; m < particles.rows(); ++m) {
    distances[m] = set.mahalanobis2(particles.row(m).transpose());
  }
  set.radius2 = weighted_quantile(distances, weights, 1.0 - alpha);
  return set;
}

bool membership(const CredibleSet& set, const Eigen::Ref<const Vector>& theta) {
  if (set.shape == CredibleShape::Box) {
    return ((theta.array() >= set.lower.array()) && (theta.array() <= set.upper.array())).all();
  }
  return set.mahalanobis2(theta) <= set.radius2;
}

double coverage_estimate(const std::vector<bool>& member_flags) {
  if (member_flags.empty()) {
    throw Error("coverage estimate needs at least one bootstrap replicate");
  }
  const auto hits = std::count(member_flags.begin(), member_flags.end(), true);
  return static_cast<double>(hits) / static_cast<double>(member_flags.size());
}

std::vector<std::vector<std::size_t>> bootstrap_indices(std::size_t n, std::size_t b, RandomStream& rng) {
  if (n < 1 || b < 1) {
    throw Error("bootstrap: N and B must be at least 1");
  }
  std::vector<std::vector<std::size_t>> rows(b, std::vector<std::size_t>(n));
  for (auto& row : rows) {
    for (auto& index : row) {
      index = static_cast<std::size_t>(rng.index(n));
    }
  }
  return rows;
}

CalibrationState sa_update(CalibrationState state, double coverage_hat, double alpha, double eta_min) {
  const double error = coverage_hat - (1.0 - alpha);
  state.coverage_hat = coverage_hat;
  ++state.s;
  if (error == 0.0) {
    return state;
  }
  const int direction = error > 0.0 ? 1 : -1;
  if (state.last_direction != 0 && direction != state.last_direction && coverage_hat < 1.0) {
    ++state.l;
  }
  const double step = std::pow(static_cast<double>(state.l), -0.51) * error;
  const double updated = std::max(eta_min, state.eta + step);
  if (updated > state.eta) {
    state.last_direction = 1;
  } else if (updated < state.eta) {
    state.last_direction = -1;
  }
  state.eta = updated;
  return state;
}

void GpcOptions::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error("gpc: alpha must lie in (0, 1)");
  }
  if (bootstrap < 1) {
    throw Error("gpc: at least one bootstrap replicate is required");
  }
  if (!(epsilon > 0.0)) {
    throw Error("gpc: epsilon must be positive");
  }
  if (!(eta_init > 0.0)) {
    throw Error("gpc: eta_init must be positive");
  }
  if (!(eta_min > 0.0) || eta_min > eta_init) {
    throw Error("gpc: eta_min must be positive and not exceed eta_init");
  }
  if (max_iters < 1) {
    throw Error("gpc: max_iters must be positive");
  }
  if (mcmc_draws < 10) {
    throw Error("gpc: mcmc draws must be at least 10");
  }
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw Error("gpc: warmup_fraction must lie in [0, 1)");
  }
  if (init_thin < 1) {
    throw Error("gpc: init_thin must be positive");
  }
  smc.validate();
}

std::size_t GpcOptions::mcmc_warmup() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(mcmc_draws) * warmup_fraction / (1.0 - warmup_fraction)));
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<Dataset> make_bootstrap_datasets(const Dataset& data, std::size_t b, RandomStream& rng) {
  std::vector<Dataset> out;
  out.reserve(b);
  for (const auto& row : bootstrap_indices(data.size(), b, rng)) {
    out.push_back(materialize_bootstrap(data, row));
  }
  return out;
}

Vector uniform_weights(Eigen::Index count) {
  return Vector::Constant(count, 1.0 / static_cast<double>(count));
}

Matrix sample_covariance(const ParticleMatrix& draws) {
  return weighted_mean_cov(draws, uniform_weights(draws.rows())).cov;
}

bool converged_at(double coverage, const GpcOptions& options) {
  return std::abs(coverage - (1.0 - options.alpha)) < options.epsilon;
}

// Stream ids below are fixed so that every consumer owns a reproducible substream of the
// master seed regardless of thread scheduling.
constexpr std::uint64_t kBootstrapStream = 1;
constexpr std::uint64_t kFullDataStream = 2;
constexpr std::uint64_t kReplicateStream = 3;

}  // namespace

CalibrationReport gpc_mcmc(const PseudoPosteriorModel& model, const Dataset& data, const GpcOptions& options,
                           RandomStream rng) {
  options.validate();
  const auto started = Clock::now();
  RandomStream boot_rng = rng.derive(kBootstrapStream);
  const std::vector<Dataset> boots = make_bootstrap_datasets(data, options.bootstrap, boot_rng);

  CalibrationReport report;
  report.algorithm = "gpc-mcmc";
  CalibrationState state;
  state.eta = options.eta_init;

  Vector theta_hat = model.initial_point(data);
  Matrix proposal_cov = model.initial_covariance(data, state.eta);
  ParticleMatrix full_draws;
  double accept_total = 0.0;
  std::size_t accept_count = 0;

  for (std::size_t iteration = 1;; ++iteration) {
    const auto iteration_started = Clock::now();
    const double eta = state.eta;

    ChainOptions full_options;
    full_options.draws = options.mcmc_draws;
    full_options.warmup = options.mcmc_warmup();
    full_options.init = theta_hat;
    full_options.initial_cov = proposal_cov;
    RandomStream full_rng = rng.derive(kFullDataStream).derive(iteration);
    ChainResult full = run_chain(model, data, eta, full_options, full_rng);
    theta_hat = full.draws.colwise().mean().transpose();
    proposal_cov = sample_covariance(full.draws);
    full_draws = std::move(full.draws);
    accept_total += full.accept_rate;
    ++accept_count;

    std::vector<char> flags(options.bootstrap, 0);
    std::vector<double> accept_rates(options.bootstrap, 0.0);
    parallel_for(options.bootstrap, options.threads, [&](std::size_t b) {
      ChainOptions chain_options = full_options;
      chain_options.init = theta_hat;
      chain_options.initial_cov = proposal_cov;
      RandomStream chain_rng = rng.derive(kReplicateStream).derive(b).derive(iteration);
      const ChainResult chain = run_chain(model, boots[b], eta, chain_options, chain_rng);
      const CredibleSet set =
          credible_set(chain.draws, uniform_weights(chain.draws.rows()), options.alpha, options.shape);
      flags[b] = membership(set, theta_hat) ? 1 : 0;
      accept_rates[b] = chain.accept_rate;
    });
    for (const double a : accept_rates) {
      accept_total += a;
    }
    accept_count += accept_rates.size();

    const double coverage = coverage_estimate(std::vector<bool>(flags.begin(), flags.end()));
    IterationRecord record;
    record.s = iteration;
    record.eta = eta;
    record.coverage = coverage;
    record.seconds = seconds_since(iteration_started);
    report.trajectory.push_back(record);
    if (options.on_iteration) {
      options.on_iteration(record);
    }

    report.iterations = iteration;
    report.eta_hat = eta;
    if (converged_at(coverage, options)) {
      report.converged = true;
      break;
    }
    if (iteration >= options.max_iters) {
      break;
    }
    state = sa_update(state, coverage, options.alpha, options.eta_min);
  }

  report.theta_hat = theta_hat;
  report.full_data_set =
      credible_set(full_draws, uniform_weights(full_draws.rows()), options.alpha, options.shape);
  report.mean_accept_rate = accept_total / static_cast<double>(accept_count);
  report.wall_time_seconds = seconds_since(started);
  return report;
}

namespace {

ParticleSystem initial_system(const PseudoPosteriorModel& model, const Dataset& data, const GpcOptions& options,
                              const Vector& init, const std::optional<Matrix>& cov, double eta, RandomStream& rng) {
  ChainOptions chain_options;
  chain_options.draws = options.smc.particles;
  chain_options.thin = options.init_thin;
  chain_options.warmup = options.smc.particles * options.init_thin;
  chain_options.init = init;
  chain_options.initial_cov = cov;
  const ChainResult chain = run_chain(model, data, eta, chain_options, rng);
  return initialize_particles_from_chain(chain.draws, model, data, eta);
}

struct ReplicateSlot {
  ParticleSystem system;
  RandomStream rng;
  AsmcDiagnostics last;
};

}  // namespace

CalibrationReport gpc_smc(const PseudoPosteriorModel& model, const Dataset& data, const GpcOptions& options,
                          RandomStream rng) {
  options.validate();
  const auto started = Clock::now();
  RandomStream boot_rng = rng.derive(kBootstrapStream);
  const std::vector<Dataset> boots = make_bootstrap_datasets(data, options.bootstrap, boot_rng);

  CalibrationReport report;
  report.algorithm = "gpc-smc";
  CalibrationState state;
  state.eta = options.eta_init;

  // Full-data system supplies theta_hat; it is advanced in lock-step with the replicates.
  RandomStream full_rng = rng.derive(kFullDataStream);
  ParticleSystem full =
      initial_system(model, data, options, model.initial_point(data), std::nullopt, state.eta, full_rng);
  Vector theta_hat = full.particles.transpose() * full.weights();
  const Matrix full_cov = weighted_mean_cov(full.particles, full.weights()).cov;

  std::vector<ReplicateSlot> slots;
  slots.reserve(options.bootstrap);
  for (std::size_t b = 0; b < options.bootstrap; ++b) {
    slots.push_back({ParticleSystem{}, rng.derive(kReplicateStream).derive(b), AsmcDiagnostics{}});
  }
  parallel_for(options.bootstrap, options.threads, [&](std::size_t b) {
    slots[b].system = initial_system(model, boots[b], options, theta_hat, full_cov, state.eta, slots[b].rng);
  });

  double accept_total = 0.0;
  std::size_t accept_count = 0;
  std::size_t full_ladder = 0;
  auto absorb = [&](const AsmcDiagnostics& diag) {
    report.health += diag.health;
    report.total_ladder_steps += diag.ladder.size();
    report.resample_count += diag.resample_count;
    report.fallback_count += diag.fallback_count;
    for (const auto& step : diag.ladder) {
      accept_total += step.accept_rate;
      ++accept_count;
    }
  };

  for (std::size_t iteration = 1;; ++iteration) {
    const auto iteration_started = Clock::now();
    std::vector<char> flags(options.bootstrap, 0);
    parallel_for(options.bootstrap, options.threads, [&](std::size_t b) {
      const ParticleSystem& system = slots[b].system;
      const CredibleSet set = credible_set(system.particles, system.weights(), options.alpha, options.shape);
      flags[b] = membership(set, theta_hat) ? 1 : 0;
    });
    const double coverage = coverage_estimate(std::vector<bool>(flags.begin(), flags.end()));

    IterationRecord record;
    record.s = iteration;
    record.eta = state.eta;
    record.coverage = coverage;
    record.ladder_full = full_ladder;
    if (iteration > 1) {
      std::size_t lo = std::numeric_limits<std::size_t>::max();
      std::size_t hi = 0;
      double total = 0.0;
      for (const auto& slot : slots) {
        const std::size_t len = slot.last.ladder.size();
        lo = std::min(lo, len);
        hi = std::max(hi, len);
        total += static_cast<double>(len);
      }
      record.ladder_min = lo;
      record.ladder_max = hi;
      record.ladder_mean = total / static_cast<double>(slots.size());
    }
    report.iterations = iteration;
    report.eta_hat = state.eta;

    const bool done = converged_at(coverage, options);
    const bool capped = iteration >= options.max_iters;
    if (!done && !capped) {
      state = sa_update(state, coverage, options.alpha, options.eta_min);
      const double next_eta = state.eta;
      const AsmcDiagnostics full_diag = asmc_star(full, next_eta, model, data, options.smc, full_rng);
      absorb(full_diag);
      full_ladder = full_diag.ladder.size();
      theta_hat = full.particles.transpose() * full.weights();
      parallel_for(options.bootstrap, options.threads, [&](std::size_t b) {
        slots[b].last = asmc_star(slots[b].system, next_eta, model, boots[b], options.smc, slots[b].rng);
      });
      for (const auto& slot : slots) {
        absorb(slot.last);
      }
    }
    record.seconds = seconds_since(iteration_started);
    report.trajectory.push_back(record);
    if (options.on_iteration) {
      options.on_iteration(record);
    }
    if (done) {
      report.converged = true;
      break;
    }
    if (capped) {
      break;
    }
  }

  report.theta_hat = theta_hat;
  report.full_data_set = credible_set(full.particles, full.weights(), options.alpha, options.shape);
  report.mean_accept_rate = accept_count > 0 ? accept_total / static_cast<double>(accept_count) : 0.0;
  report.wall_time_seconds = seconds_since(started);
  return report;
}

}  // namespace gpcal
