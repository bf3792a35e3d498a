#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gpcal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Particles and MCMC draws are stored one parameter vector per row.
using ParticleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All log-weights are -inf (or NaN); nothing left to normalize.
class DegenerateWeightsError : public Error {
 public:
  explicit DegenerateWeightsError(const std::string& what = "degenerate weights") : Error(what) {}
};

/// Natural-log weights for a particle system. Entries may be -inf, never +inf or NaN.
struct LogWeightVector {
  Vector log_w;

  LogWeightVector() = default;
  explicit LogWeightVector(Vector values) : log_w(std::move(values)) {}

  static LogWeightVector uniform(std::size_t count) {
    return LogWeightVector(Vector::Zero(static_cast<Eigen::Index>(count)));
  }

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(log_w.size()); }
};

/// ln(sum(exp(values))) with max subtraction. Throws DegenerateWeightsError when no entry is finite.
double log_sum_exp(const Eigen::Ref<const Vector>& values);

/// Normalized weights exp(log_w - log_sum_exp(log_w)).
Vector normalize(const LogWeightVector& weights);

/// 1 / sum(w^2) for normalized weights.
double effective_sample_size(const Eigen::Ref<const Vector>& weights);

struct WeightedMoments {
  Vector mean;
  Matrix cov;
};

/// Weighted mean and centered weighted covariance (symmetrized). Requires at least two particles.
WeightedMoments weighted_mean_cov(const ParticleMatrix& particles, const Eigen::Ref<const Vector>& weights);

/// Adds max(1, trace/K) * 1e-10 to the diagonal so a Cholesky factorization exists.
Matrix regularize_covariance(const Matrix& cov);

}  // namespace gpcal
