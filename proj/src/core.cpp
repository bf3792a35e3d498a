#include "gpcal/core.hpp"

#include <cmath>
#include <limits>

namespace gpcal {

double log_sum_exp(const Eigen::Ref<const Vector>& values) {
  double max_value = -std::numeric_limits<double>::infinity();
  for (const double v : values) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw DegenerateWeightsError();
    }
    max_value = std::max(max_value, v);
  }
  if (!std::isfinite(max_value)) {
    throw DegenerateWeightsError();
  }
  double sum = 0.0;
  for (const double v : values) {
    sum += std::exp(v - max_value);
  }
  return max_value + std::log(sum);
}

Vector normalize(const LogWeightVector& weights) {
  const double total = log_sum_exp(weights.log_w);
  Vector w = (weights.log_w.array() - total).exp().matrix();
  // Rounding can leave the sum a few ulps away from one.
  w /= w.sum();
  return w;
}

double effective_sample_size(const Eigen::Ref<const Vector>& weights) {
  return 1.0 / weights.squaredNorm();
}

WeightedMoments weighted_mean_cov(const ParticleMatrix& particles, const Eigen::Ref<const Vector>& weights) {
  if (particles.rows() < 2) {
    throw Error("insufficient particles");
  }
  if (weights.size() != particles.rows()) {
    throw Error("weight count does not match particle count");
  }
  WeightedMoments out;
  out.mean = particles.transpose() * weights;
  const ParticleMatrix centered = particles.rowwise() - out.mean.transpose();
  out.cov = centered.transpose() * weights.asDiagonal() * centered;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

Matrix regularize_covariance(const Matrix& cov) {
  const auto k = static_cast<double>(cov.rows());
  const double jitter = 1e-10 * std::max(1.0, cov.trace() / k);
  Matrix out = cov;
  out.diagonal().array() += jitter;
  return out;
}

}  // namespace gpcal
