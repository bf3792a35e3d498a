#pragma once

#include "gpcal/smc.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace gpcal {

enum class CredibleShape { Ellipsoid, Box };

/// Ellipsoid {theta : |P (theta - center)|^2 <= radius2} with Cov^-1 = P'P, or (Box mode) the
/// per-coordinate equal-tailed intervals [lower, upper].
struct CredibleSet {
  CredibleShape shape = CredibleShape::Ellipsoid;
  Vector center;
  Matrix chol_prec;
  double radius2 = 0.0;
  Vector lower;
  Vector upper;

  [[nodiscard]] double mahalanobis2(const Eigen::Ref<const Vector>& theta) const;
};

/// Weighted credible region at level 1 - alpha. The ellipsoid radius is the weighted empirical
/// (1 - alpha)-quantile of the particles' squared Mahalanobis distances.
CredibleSet credible_set(const ParticleMatrix& particles, const Eigen::Ref<const Vector>& weights, double alpha,
                         CredibleShape shape = CredibleShape::Ellipsoid);

/// Boundary inclusive.
bool membership(const CredibleSet& set, const Eigen::Ref<const Vector>& theta);

double coverage_estimate(const std::vector<bool>& member_flags);

/// B rows of N indices drawn uniformly with replacement.
std::vector<std::vector<std::size_t>> bootstrap_indices(std::size_t n, std::size_t b, RandomStream& rng);

/// Stochastic-approximation state with the Kesten counter l.
struct CalibrationState {
  double eta = 1.0;
  std::size_t s = 1;
  std::size_t l = 1;
  /// Sign of the last non-zero eta move; 0 before the first.
  int last_direction = 0;
  double coverage_hat = std::numeric_limits<double>::quiet_NaN();
};

/// eta <- max(eta_min, eta + l^-0.51 (c_hat - (1 - alpha))). l grows by one, before the step is
/// taken, when the move reverses the previous direction and c_hat < 1.
CalibrationState sa_update(CalibrationState state, double coverage_hat, double alpha, double eta_min = 1e-6);

struct IterationRecord {
  std::size_t s = 0;
  double eta = 0.0;
  double coverage = 0.0;
  /// SMC steps taken to reach this eta: full-data system, and min/mean/max over bootstrap systems.
  std::size_t ladder_full = 0;
  std::size_t ladder_min = 0;
  double ladder_mean = 0.0;
  std::size_t ladder_max = 0;
  double seconds = 0.0;
};

struct GpcOptions {
  double alpha = 0.05;
  std::size_t bootstrap = 500;
  double epsilon = 0.005;
  double eta_init = 1.0;
  double eta_min = 1e-6;
  std::size_t max_iters = 200;
  CredibleShape shape = CredibleShape::Ellipsoid;
  std::size_t threads = 1;

  /// GPC-MCMC: post-warmup draws per chain and the warmup share of the total chain length.
  std::size_t mcmc_draws = 20000;
  double warmup_fraction = 0.5;

  /// GPC-SMC: sampler settings and the thinning of the initializing chains.
  SmcConfig smc;
  std::size_t init_thin = 10;

  std::function<void(const IterationRecord&)> on_iteration;

  void validate() const;
  [[nodiscard]] std::size_t mcmc_warmup() const;
};

struct CalibrationReport {
  std::string algorithm;
  double eta_hat = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::vector<IterationRecord> trajectory;
  Vector theta_hat;
  /// Credible set of the full-data posterior at eta_hat.
  CredibleSet full_data_set;
  NumericHealth health;
  std::size_t total_ladder_steps = 0;
  std::size_t resample_count = 0;
  std::size_t fallback_count = 0;
  double mean_accept_rate = 0.0;
  double wall_time_seconds = 0.0;
};

/// Bootstrap calibration with a fresh MCMC run per replicate and iteration.
CalibrationReport gpc_mcmc(const PseudoPosteriorModel& model, const Dataset& data, const GpcOptions& options,
                           RandomStream rng);

/// Bootstrap calibration that carries one particle system per replicate across iterations and
/// moves it between learning rates with the adaptive SMC sampler.
CalibrationReport gpc_smc(const PseudoPosteriorModel& model, const Dataset& data, const GpcOptions& options,
                          RandomStream rng);

}  // namespace gpcal
