#include "gpcal/mcmc.hpp"

#include <cmath>

namespace gpcal {

RwmhAdaptState RwmhAdaptState::initial(Matrix sigma) {
  RwmhAdaptState state;
  const auto k = static_cast<double>(sigma.rows());
  state.sigma = std::move(sigma);
  state.log_zeta = std::log(2.38 * 2.38 / k);
  return state;
}

Matrix RwmhAdaptState::proposal_factor() const {
  Eigen::LLT<Matrix> llt(regularize_covariance(sigma));
  if (llt.info() != Eigen::Success || !llt.matrixL().toDenseMatrix().allFinite()) {
    throw Error("proposal covariance singular");
  }
  return std::exp(0.5 * log_zeta) * Matrix(llt.matrixL());
}

double adaptation_gain(std::size_t t) {
  return std::pow(static_cast<double>(t) + 1.0, -0.51);
}

RwmhAdaptState adapt_scale(RwmhAdaptState state, double observed_accept) {
  state.log_zeta += adaptation_gain(state.t) * (observed_accept - state.target_accept);
  ++state.t;
  return state;
}

RwmhStep rwmh_step(const Vector& theta, double log_target_current, const Matrix& proposal_factor,
                   const LogTarget& log_target, RandomStream& rng) {
  Vector z(theta.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    z[k] = rng.normal();
  }
  Vector proposal = theta + proposal_factor * z;
  const double proposed_target = log_target(proposal);
  const double delta = proposed_target - log_target_current;
  const double accept_prob = delta >= 0.0 ? 1.0 : std::exp(delta);
  RwmhStep step;
  step.accept_prob = std::isnan(accept_prob) ? 0.0 : accept_prob;
  step.accepted = rng.uniform() < step.accept_prob;
  if (step.accepted) {
    step.theta = std::move(proposal);
    step.log_target = proposed_target;
  } else {
    step.theta = theta;
    step.log_target = log_target_current;
  }
  return step;
}

RwmhStep rwmh_step(const Vector& theta, const RwmhAdaptState& state, const LogTarget& log_target, RandomStream& rng) {
  return rwmh_step(theta, log_target(theta), state.proposal_factor(), log_target, rng);
}

namespace {

/// Welford accumulator for the Haario running covariance.
class RunningMoments {
 public:
  explicit RunningMoments(Eigen::Index dim) : mean_(Vector::Zero(dim)), scatter_(Matrix::Zero(dim, dim)) {}

  void add(const Vector& x) {
    ++count_;
    const Vector delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    scatter_.noalias() += delta * (x - mean_).transpose();
  }

  [[nodiscard]] std::size_t count() const { return count_; }
  [[nodiscard]] Matrix covariance() const {
    Matrix cov = scatter_ / static_cast<double>(count_ - 1);
    return 0.5 * (cov + cov.transpose());
  }

 private:
  std::size_t count_ = 0;
  Vector mean_;
  Matrix scatter_;
};

}  // namespace

ChainResult run_chain(const PseudoPosteriorModel& model, const Dataset& data, double eta, const ChainOptions& options,
                      RandomStream& rng) {
  if (options.draws == 0) {
    throw Error("run_chain: draw count must be positive");
  }
  if (options.thin == 0) {
    throw Error("run_chain: thin must be positive");
  }
  const auto dim = static_cast<Eigen::Index>(model.dim());
  Vector theta = options.init.size() == dim ? options.init : model.initial_point(data);
  if (theta.size() != dim) {
    throw Error("run_chain: initial point has the wrong dimension");
  }

  RwmhAdaptState state =
      RwmhAdaptState::initial(options.initial_cov ? *options.initial_cov : model.initial_covariance(data, eta));
  if (options.initial_log_zeta) {
    state.log_zeta = *options.initial_log_zeta;
  }
  const LogTarget target = [&](const Eigen::Ref<const Vector>& x) {
    return log_unnormalized_target(model, x, data, eta);
  };

  double current = target(theta);
  Matrix factor = state.proposal_factor();

  // Haario-style: switch to the empirical covariance once enough history exists, refresh it
  // periodically, and stop adapting at the end of warmup.
  const std::size_t adapt_start = std::min<std::size_t>(std::max<std::size_t>(100, 20 * model.dim()), options.warmup / 2);
  constexpr std::size_t kRefresh = 20;
  RunningMoments history(dim);

  for (std::size_t t = 0; t < options.warmup; ++t) {
    const RwmhStep step = rwmh_step(theta, current, factor, target, rng);
    theta = step.theta;
    current = step.log_target;
    if (!options.adapt) {
      continue;
    }
    history.add(theta);
    state = adapt_scale(std::move(state), step.accept_prob);
    if (history.count() >= adapt_start && history.count() > static_cast<std::size_t>(dim) + 1 &&
        t % kRefresh == 0) {
      state.sigma = history.covariance();
    }
    factor = state.proposal_factor();
  }

  ChainResult result;
  result.draws.resize(static_cast<Eigen::Index>(options.draws), dim);
  std::size_t accepted = 0;
  std::size_t proposed = 0;
  for (std::size_t r = 0; r < options.draws; ++r) {
    for (std::size_t s = 0; s < options.thin; ++s) {
      const RwmhStep step = rwmh_step(theta, current, factor, target, rng);
      theta = step.theta;
      current = step.log_target;
      accepted += step.accepted ? 1 : 0;
      ++proposed;
    }
    result.draws.row(static_cast<Eigen::Index>(r)) = theta.transpose();
  }
  result.accept_rate = static_cast<double>(accepted) / static_cast<double>(proposed);
  if (options.draws >= 10) {
    const ChainEss ess = chain_ess(result.draws);
    result.ess_per_coordinate = ess.ess;
    result.zero_variance = ess.zero_variance;
  }
  result.final_state = std::move(state);
  return result;
}

ChainEss chain_ess(const ParticleMatrix& draws) {
  const Eigen::Index r = draws.rows();
  if (r < 10) {
    throw Error("chain_ess: at least 10 draws are required");
  }
  ChainEss out;
  out.ess.resize(draws.cols());
  const auto n = static_cast<double>(r);
  for (Eigen::Index k = 0; k < draws.cols(); ++k) {
    const Vector x = draws.col(k).array() - draws.col(k).mean();
    auto autocov = [&](Eigen::Index lag) { return x.head(r - lag).dot(x.tail(r - lag)) / n; };
    const double gamma0 = autocov(0);
    if (!(gamma0 > 0.0)) {
      out.ess[k] = n;
      out.zero_variance = true;
      continue;
    }
    double tau = -gamma0;
    for (Eigen::Index m = 0; 2 * m + 1 < r; ++m) {
      const double pair = autocov(2 * m) + autocov(2 * m + 1);
      if (pair <= 0.0) {
        break;
      }
      tau += 2.0 * pair;
    }
    out.ess[k] = std::min(n, n * gamma0 / tau);
  }
  return out;
}

}  // namespace gpcal
