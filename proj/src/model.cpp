#include "gpcal/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace gpcal {

Dataset::Dataset(Vector y, Matrix X, bool classification)
    : y_(std::move(y)), X_(std::move(X)), classification_(classification) {
  if (X_.rows() != y_.size()) {
    throw Error("dataset: X has " + std::to_string(X_.rows()) + " rows but y has " + std::to_string(y_.size()));
  }
  if (X_.cols() < 1) {
    throw Error("dataset: X needs at least the intercept column");
  }
  if (X_.rows() > 0 && !(X_.col(0).array() == 1.0).all()) {
    throw Error("dataset: first column of X must be identically 1");
  }
  if (classification_ && !(y_.array().abs() == 1.0).all()) {
    throw Error("dataset: classification labels must be -1 or +1");
  }
}

namespace {

std::string describe(const Vector& theta) {
  std::ostringstream os;
  os << "target evaluation failed at theta = (";
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    os << (k ? ", " : "") << theta[k];
  }
  os << ")";
  return os.str();
}

Matrix inverse_or_identity(const Matrix& precision) {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    return Matrix::Identity(precision.rows(), precision.cols());
  }
  return llt.solve(Matrix::Identity(precision.rows(), precision.cols()));
}

}  // namespace

TargetEvaluationError::TargetEvaluationError(Vector theta) : Error(describe(theta)), theta_(std::move(theta)) {}

void PseudoPosteriorModel::log_pseudo_likelihood_batch(const ParticleMatrix& thetas, const Dataset& data,
                                                       Vector& out) const {
  out.resize(thetas.rows());
  for (Eigen::Index m = 0; m < thetas.rows(); ++m) {
    out[m] = log_pseudo_likelihood(thetas.row(m).transpose(), data);
  }
}

void PseudoPosteriorModel::log_prior_batch(const ParticleMatrix& thetas, Vector& out) const {
  out.resize(thetas.rows());
  for (Eigen::Index m = 0; m < thetas.rows(); ++m) {
    out[m] = log_prior(thetas.row(m).transpose());
  }
}

Vector PseudoPosteriorModel::initial_point(const Dataset& data) const {
  if (data.size() < data.dim()) {
    return Vector::Zero(static_cast<Eigen::Index>(dim()));
  }
  return data.X().colPivHouseholderQr().solve(data.y());
}

Matrix PseudoPosteriorModel::initial_covariance(const Dataset& data, double eta) const {
  return inverse_or_identity(eta * data.X().transpose() * data.X());
}

double log_unnormalized_target(const PseudoPosteriorModel& model, const Eigen::Ref<const Vector>& theta,
                               const Dataset& data, double eta) {
  const double value = eta * model.log_pseudo_likelihood(theta, data) + model.log_prior(theta);
  if (std::isnan(value) || value == std::numeric_limits<double>::infinity()) {
    throw TargetEvaluationError(theta);
  }
  return value;
}

double risk_quantile(const Eigen::Ref<const Vector>& theta, const Dataset& data, double tau) {
  if (data.size() == 0) {
    return 0.0;
  }
  const Vector residual = data.y() - data.X() * theta;
  double total = 0.0;
  for (const double r : residual) {
    total += std::abs(r * (tau - (r < 0.0 ? 1.0 : 0.0)));
  }
  return total / static_cast<double>(data.size());
}

double hinge_risk(const Eigen::Ref<const Vector>& theta, const Dataset& data) {
  if (data.size() == 0) {
    return 0.0;
  }
  const Vector margin = data.y().cwiseProduct(data.X() * theta);
  return 2.0 * (1.0 - margin.array()).max(0.0).sum() / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------------------------

QuantileRegressionModel::QuantileRegressionModel(std::size_t dim, double tau, double prior_sd)
    : dim_(dim), tau_(tau), prior_sd_(prior_sd) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw Error("quantile model: tau must lie in (0, 1)");
  }
  if (!(prior_sd > 0.0)) {
    throw Error("quantile model: prior_sd must be positive");
  }
}

double QuantileRegressionModel::log_pseudo_likelihood(const Eigen::Ref<const Vector>& theta,
                                                      const Dataset& data) const {
  return -static_cast<double>(data.size()) * risk_quantile(theta, data, tau_);
}

double QuantileRegressionModel::log_prior(const Eigen::Ref<const Vector>& theta) const {
  return -0.5 * theta.squaredNorm() / (prior_sd_ * prior_sd_);
}

void QuantileRegressionModel::log_pseudo_likelihood_batch(const ParticleMatrix& thetas, const Dataset& data,
                                                          Vector& out) const {
  // Residuals for every particle at once: column m holds y - X theta_m.
  Matrix residual = -(data.X() * thetas.transpose());
  residual.colwise() += data.y();
  const double below = tau_ - 1.0;
  out = -residual.unaryExpr([&](double r) { return r < 0.0 ? r * below : r * tau_; }).colwise().sum().transpose();
}

Matrix QuantileRegressionModel::initial_covariance(const Dataset& data, double eta) const {
  // Check-loss curvature is f(0) X'X; approximate f(0) from the least-squares residual scale.
  const auto n = static_cast<double>(data.size());
  const auto k = static_cast<double>(data.dim());
  if (n <= k) {
    return Matrix::Identity(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
  }
  const Vector beta = initial_point(data);
  const double scale = std::sqrt((data.y() - data.X() * beta).squaredNorm() / (n - k));
  const double density_at_zero = 1.0 / (std::max(scale, 1e-8) * std::sqrt(2.0 * std::numbers::pi));
  return inverse_or_identity(eta * density_at_zero * data.X().transpose() * data.X());
}

// ---------------------------------------------------------------------------------------------

SvmModel::SvmModel(Vector sigma, double nu) : sigma_(std::move(sigma)), nu_(nu) {
  if (!(nu > 0.0)) {
    throw Error("svm model: nu must be positive");
  }
  if (sigma_.size() == 0 || !(sigma_.array() > 0.0).all()) {
    throw Error("svm model: predictor scales must be positive");
  }
}

SvmModel SvmModel::from_data(const Dataset& data, double nu) {
  if (!data.classification()) {
    throw Error("svm model: dataset must carry +-1 labels");
  }
  if (data.size() == 0) {
    throw Error("svm model: empty dataset");
  }
  const auto k = static_cast<Eigen::Index>(data.dim());
  Vector sigma(k);
  sigma[0] = 1.0;
  for (Eigen::Index j = 1; j < k; ++j) {
    const auto column = data.X().col(j);
    const double mean = column.mean();
    sigma[j] = std::sqrt((column.array() - mean).square().mean());
    if (!(sigma[j] > 0.0)) {
      throw Error("svm model: predictor column " + std::to_string(j) + " is constant (zero standard deviation)");
    }
  }
  return SvmModel(std::move(sigma), nu);
}

double SvmModel::log_pseudo_likelihood(const Eigen::Ref<const Vector>& theta, const Dataset& data) const {
  return -static_cast<double>(data.size()) * hinge_risk(theta, data);
}

double SvmModel::log_prior(const Eigen::Ref<const Vector>& theta) const {
  return -theta.cwiseQuotient(sigma_).cwiseAbs().sum() / nu_;
}

void SvmModel::log_pseudo_likelihood_batch(const ParticleMatrix& thetas, const Dataset& data, Vector& out) const {
  Matrix margin = data.X() * thetas.transpose();
  margin = data.y().asDiagonal() * margin;
  out = -2.0 * (1.0 - margin.array()).max(0.0).matrix().colwise().sum().transpose();
}

// ---------------------------------------------------------------------------------------------

GaussianConjugateModel::GaussianConjugateModel(double sigma2, double prior_mean, double prior_var)
    : sigma2_(sigma2), prior_mean_(prior_mean), prior_var_(prior_var) {
  if (!(sigma2 > 0.0) || !(prior_var > 0.0)) {
    throw Error("gaussian model: variances must be positive");
  }
}

double GaussianConjugateModel::log_pseudo_likelihood(const Eigen::Ref<const Vector>& theta,
                                                     const Dataset& data) const {
  return -0.5 * (data.y().array() - theta[0]).square().sum() / sigma2_;
}

double GaussianConjugateModel::log_prior(const Eigen::Ref<const Vector>& theta) const {
  const double d = theta[0] - prior_mean_;
  return -0.5 * d * d / prior_var_;
}

void GaussianConjugateModel::log_pseudo_likelihood_batch(const ParticleMatrix& thetas, const Dataset& data,
                                                         Vector& out) const {
  // sum (y - t)^2 = S2 - 2 t S1 + N t^2
  const double n = static_cast<double>(data.size());
  const double s1 = data.y().sum();
  const double s2 = data.y().squaredNorm();
  out = thetas.col(0).unaryExpr([&](double t) { return -0.5 * (s2 - 2.0 * t * s1 + n * t * t) / sigma2_; });
}

Vector GaussianConjugateModel::initial_point(const Dataset& data) const {
  Vector out(1);
  out[0] = data.size() > 0 ? data.y().mean() : prior_mean_;
  return out;
}

Matrix GaussianConjugateModel::initial_covariance(const Dataset& data, double eta) const {
  Matrix out(1, 1);
  out(0, 0) = conjugate_posterior_moments(*this, data, eta).var;
  return out;
}

ConjugateMoments conjugate_posterior_moments(const GaussianConjugateModel& model, const Dataset& data, double eta) {
  const double n = static_cast<double>(data.size());
  const double precision = 1.0 / model.prior_var() + eta * n / model.sigma2();
  const double weighted = model.prior_mean() / model.prior_var() + eta * data.y().sum() / model.sigma2();
  return {weighted / precision, 1.0 / precision};
}

double conjugate_log_normalizer(const GaussianConjugateModel& model, const Dataset& data, double eta) {
  const double n = static_cast<double>(data.size());
  const double a = eta * n / model.sigma2() + 1.0 / model.prior_var();
  const double b = eta * data.y().sum() / model.sigma2() + model.prior_mean() / model.prior_var();
  const double c = eta * data.y().squaredNorm() / model.sigma2() +
                   model.prior_mean() * model.prior_mean() / model.prior_var();
  return 0.5 * std::log(2.0 * std::numbers::pi / a) + 0.5 * (b * b / a - c);
}

}  // namespace gpcal
