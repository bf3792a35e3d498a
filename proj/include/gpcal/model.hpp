#pragma once

#include "gpcal/core.hpp"

#include <memory>
#include <string>

namespace gpcal {

/// Observation table: responses y and predictor matrix X whose first column is the constant 1.
class Dataset {
 public:
  Dataset() = default;

  /// Validates shapes, the intercept column and (for classification) the +-1 label domain.
  Dataset(Vector y, Matrix X, bool classification = false);

  [[nodiscard]] const Vector& y() const { return y_; }
  [[nodiscard]] const Matrix& X() const { return X_; }
  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(y_.size()); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(X_.cols()); }
  [[nodiscard]] bool classification() const { return classification_; }

 private:
  Vector y_;
  Matrix X_;
  bool classification_ = false;
};

/// Raised when the log target is NaN or +inf; carries the offending parameter.
class TargetEvaluationError : public Error {
 public:
  explicit TargetEvaluationError(Vector theta);
  [[nodiscard]] const Vector& theta() const { return theta_; }

 private:
  Vector theta_;
};

/// q(theta; D) and p(theta) in log form. Normalizing constants of the prior are dropped.
class PseudoPosteriorModel {
 public:
  virtual ~PseudoPosteriorModel() = default;

  [[nodiscard]] virtual std::string kind() const = 0;
  [[nodiscard]] virtual std::size_t dim() const = 0;

  [[nodiscard]] virtual double log_pseudo_likelihood(const Eigen::Ref<const Vector>& theta,
                                                     const Dataset& data) const = 0;
  [[nodiscard]] virtual double log_prior(const Eigen::Ref<const Vector>& theta) const = 0;

  /// Row-wise evaluation over a particle matrix; models override this with a single GEMM.
  virtual void log_pseudo_likelihood_batch(const ParticleMatrix& thetas, const Dataset& data, Vector& out) const;
  virtual void log_prior_batch(const ParticleMatrix& thetas, Vector& out) const;

  /// Chain starting point. Defaults to the least-squares fit of y on X.
  [[nodiscard]] virtual Vector initial_point(const Dataset& data) const;

  /// Rough posterior covariance used to seed proposal adaptation: (eta X'X)^-1.
  [[nodiscard]] virtual Matrix initial_covariance(const Dataset& data, double eta) const;
};

/// eta * log q(theta; D) + log p(theta). Throws TargetEvaluationError on a non-finite result.
double log_unnormalized_target(const PseudoPosteriorModel& model, const Eigen::Ref<const Vector>& theta,
                               const Dataset& data, double eta);

/// Mean check loss (1/N) sum |r_i (tau - 1{r_i < 0})| with r_i = y_i - theta'x_i.
double risk_quantile(const Eigen::Ref<const Vector>& theta, const Dataset& data, double tau);

/// Mean doubled hinge loss (1/N) sum 2 max(0, 1 - y_i theta'x_i).
double hinge_risk(const Eigen::Ref<const Vector>& theta, const Dataset& data);

/// Gibbs posterior for linear quantile regression with an N(0, prior_sd^2 I) prior.
class QuantileRegressionModel final : public PseudoPosteriorModel {
 public:
  QuantileRegressionModel(std::size_t dim, double tau = 0.5, double prior_sd = 100.0);

  [[nodiscard]] std::string kind() const override { return "quantile"; }
  [[nodiscard]] std::size_t dim() const override { return dim_; }
  [[nodiscard]] double tau() const { return tau_; }
  [[nodiscard]] double prior_sd() const { return prior_sd_; }

  [[nodiscard]] double log_pseudo_likelihood(const Eigen::Ref<const Vector>& theta,
                                             const Dataset& data) const override;
  [[nodiscard]] double log_prior(const Eigen::Ref<const Vector>& theta) const override;
  void log_pseudo_likelihood_batch(const ParticleMatrix& thetas, const Dataset& data, Vector& out) const override;

  [[nodiscard]] Matrix initial_covariance(const Dataset& data, double eta) const override;

 private:
  std::size_t dim_;
  double tau_;
  double prior_sd_;
};

/// Hinge-loss pseudo-posterior with the Laplace-type prior -nu^-1 sum |theta_k / sigma_k|.
class SvmModel final : public PseudoPosteriorModel {
 public:
  SvmModel(Vector sigma, double nu = 10.0);

  /// sigma_1 = 1 and sigma_k = population standard deviation of predictor column k.
  /// Throws on a constant predictor column.
  static SvmModel from_data(const Dataset& data, double nu = 10.0);

  [[nodiscard]] std::string kind() const override { return "svm"; }
  [[nodiscard]] std::size_t dim() const override { return static_cast<std::size_t>(sigma_.size()); }
  [[nodiscard]] const Vector& sigma() const { return sigma_; }
  [[nodiscard]] double nu() const { return nu_; }

  [[nodiscard]] double log_pseudo_likelihood(const Eigen::Ref<const Vector>& theta,
                                             const Dataset& data) const override;
  [[nodiscard]] double log_prior(const Eigen::Ref<const Vector>& theta) const override;
  void log_pseudo_likelihood_batch(const ParticleMatrix& thetas, const Dataset& data, Vector& out) const override;

 private:
  Vector sigma_;
  double nu_;
};

/// Normal mean with known variance and a normal prior. The tempered posterior is available in
/// closed form, which makes this model the exact oracle for the samplers.
class GaussianConjugateModel final : public PseudoPosteriorModel {
 public:
  GaussianConjugateModel(double sigma2 = 1.0, double prior_mean = 0.0, double prior_var = 1.0);

  [[nodiscard]] std::string kind() const override { return "gaussian"; }
  [[nodiscard]] std::size_t dim() const override { return 1; }
  [[nodiscard]] double sigma2() const { return sigma2_; }
  [[nodiscard]] double prior_mean() const { return prior_mean_; }
  [[nodiscard]] double prior_var() const { return prior_var_; }

  [[nodiscard]] double log_pseudo_likelihood(const Eigen::Ref<const Vector>& theta,
                                             const Dataset& data) const override;
  [[nodiscard]] double log_prior(const Eigen::Ref<const Vector>& theta) const override;
  void log_pseudo_likelihood_batch(const ParticleMatrix& thetas, const Dataset& data, Vector& out) const override;

  [[nodiscard]] Vector initial_point(const Dataset& data) const override;
  [[nodiscard]] Matrix initial_covariance(const Dataset& data, double eta) const override;

 private:
  double sigma2_;
  double prior_mean_;
  double prior_var_;
};

struct ConjugateMoments {
  double mean;
  double var;
};

/// Exact mean/variance of the eta-tempered posterior of a GaussianConjugateModel.
ConjugateMoments conjugate_posterior_moments(const GaussianConjugateModel& model, const Dataset& data, double eta);

/// log of integral exp(eta * log q(theta; D) + log p(theta)) dtheta for the Gaussian model,
/// with the same dropped constants as the model's log functions.
double conjugate_log_normalizer(const GaussianConjugateModel& model, const Dataset& data, double eta);

}  // namespace gpcal
