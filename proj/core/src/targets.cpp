#include "mirror/targets.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "mirror/errors.hpp"

namespace mirror {

namespace {

constexpr double kSqrt3 = std::numbers::sqrt3;

// Two-component mixture on R. Component log-densities are
// log w_k + shape(x - m_k); the mixture gradient is the
// responsibility-weighted sum of component gradients.
class MixtureTarget final : public TargetDensity {
 public:
  enum class Shape { Gaussian, StudentT4 };

  MixtureTarget(std::string name, Shape shape, std::array<double, 2> weights,
                std::array<double, 2> means, double scale)
      : name_(std::move(name)), shape_(shape), means_(means), scale_(scale) {
    for (int k = 0; k < 2; ++k) log_weights_[k] = std::log(weights[k]);
  }

  std::size_t dimension() const override { return 1; }
  std::string name() const override { return name_; }

  double log_density(const Vector& x) const override {
    std::array<double, 2> lp{};
    for (int k = 0; k < 2; ++k) lp[k] = log_weights_[k] + component(x[0] - means_[k]);
    return log_sum_exp(lp);
  }

  double log_density_gradient(const Vector& x, Vector& grad) const override {
    std::array<double, 2> lp{};
    std::array<double, 2> g{};
    for (int k = 0; k < 2; ++k) {
      const double u = x[0] - means_[k];
      lp[k] = log_weights_[k] + component(u);
      g[k] = component_gradient(u);
    }
    const double total = log_sum_exp(lp);
    grad.resize(1);
    grad[0] = std::exp(lp[0] - total) * g[0] + std::exp(lp[1] - total) * g[1];
    return total;
  }

 private:
  static double log_sum_exp(const std::array<double, 2>& v) {
    const double m = std::max(v[0], v[1]);
    return m + std::log(std::exp(v[0] - m) + std::exp(v[1] - m));
  }

  double component(double u) const {
    const double z = u / scale_;
    if (shape_ == Shape::Gaussian) return -0.5 * z * z;
    return -2.5 * std::log1p(0.25 * z * z);
  }

  double component_gradient(double u) const {
    const double z = u / scale_;
    if (shape_ == Shape::Gaussian) return -z / scale_;
    return -5.0 * z / (scale_ * (4.0 + z * z));
  }

  std::string name_;
  Shape shape_;
  std::array<double, 2> log_weights_{};
  std::array<double, 2> means_;
  double scale_;
};

class StandardNormal1D final : public TargetDensity {
 public:
  std::size_t dimension() const override { return 1; }
  std::string name() const override { return "normal"; }
  double log_density(const Vector& x) const override { return -0.5 * x[0] * x[0]; }
  double log_density_gradient(const Vector& x, Vector& grad) const override {
    grad.resize(1);
    grad[0] = -x[0];
    return -0.5 * x[0] * x[0];
  }
};

// Gamma(4, rate 2) on xi = log(theta): log pi(xi) = 4 xi - 2 e^xi.
class LogGamma final : public TargetDensity {
 public:
  std::size_t dimension() const override { return 1; }
  std::string name() const override { return "gamma"; }
  double log_density(const Vector& x) const override { return 4.0 * x[0] - 2.0 * std::exp(x[0]); }
  double log_density_gradient(const Vector& x, Vector& grad) const override {
    const double e = std::exp(x[0]);
    grad.resize(1);
    grad[0] = 4.0 - 2.0 * e;
    return 4.0 * x[0] - 2.0 * e;
  }
  bool has_back_transform() const override { return true; }
  void back_transform(const Vector& x, Vector& out) const override { out = x.array().exp(); }
};

// U(-sqrt3, sqrt3) on the logit scale: log pi(xi) = xi - 2 log(1 + e^xi).
class LogitUniform final : public TargetDensity {
 public:
  std::size_t dimension() const override { return 1; }
  std::string name() const override { return "uniform"; }
  double log_density(const Vector& x) const override { return x[0] - 2.0 * log1p_exp(x[0]); }
  double log_density_gradient(const Vector& x, Vector& grad) const override {
    grad.resize(1);
    grad[0] = -std::tanh(0.5 * x[0]);
    return x[0] - 2.0 * log1p_exp(x[0]);
  }
  bool has_back_transform() const override { return true; }
  void back_transform(const Vector& x, Vector& out) const override {
    out = kSqrt3 * (0.5 * x.array()).tanh();
  }
};

class MvnTarget final : public TargetDensity {
 public:
  MvnTarget(Vector mu, const Matrix& sigma) : mu_(std::move(mu)) {
    if (sigma.rows() != mu_.size() || sigma.cols() != mu_.size()) {
      throw DimensionMismatch("make_mvn: mean and covariance sizes differ");
    }
    precision_ = invert_spd(sigma);
  }

  std::size_t dimension() const override { return static_cast<std::size_t>(mu_.size()); }
  std::string name() const override { return "mvn" + std::to_string(mu_.size()); }

  double log_density(const Vector& x) const override {
    thread_local Vector diff;
    diff = x - mu_;
    return -0.5 * diff.dot(precision_ * diff);
  }

  double log_density_gradient(const Vector& x, Vector& grad) const override {
    thread_local Vector diff;
    diff = x - mu_;
    grad.noalias() = -precision_ * diff;
    return 0.5 * diff.dot(grad);
  }

  const Matrix& precision() const { return precision_; }

 private:
  Vector mu_;
  Matrix precision_;
};

class LogisticPosterior final : public TargetDensity {
 public:
  LogisticPosterior(Matrix x, Vector y, double prior_sd) : y_(std::move(y)) {
    if (x.rows() != y_.size()) throw DimensionMismatch("logistic: X rows != y length");
    if (!(prior_sd > 0.0)) throw DimensionMismatch("logistic: prior_sd must be positive");
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      if (y_[i] != 0.0 && y_[i] != 1.0) throw DimensionMismatch("logistic: y must be binary");
    }
    design_.resize(x.rows(), x.cols() + 1);
    design_.col(0).setOnes();
    design_.rightCols(x.cols()) = x;
    inv_prior_var_ = 1.0 / (prior_sd * prior_sd);
  }

  std::size_t dimension() const override { return static_cast<std::size_t>(design_.cols()); }
  std::string name() const override { return "logistic"; }

  double log_density(const Vector& theta) const override {
    check(theta);
    thread_local Vector eta;
    eta.noalias() = design_ * theta;
    double lp = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) lp += y_[i] * eta[i] - log1p_exp(eta[i]);
    return lp - 0.5 * inv_prior_var_ * theta.squaredNorm();
  }

  double log_density_gradient(const Vector& theta, Vector& grad) const override {
    check(theta);
    thread_local Vector eta;
    thread_local Vector resid;
    eta.noalias() = design_ * theta;
    resid.resize(eta.size());
    double lp = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      lp += y_[i] * eta[i] - log1p_exp(eta[i]);
      // y - sigmoid(eta), evaluated without overflow
      const double p = eta[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-eta[i]))
                                     : std::exp(eta[i]) / (1.0 + std::exp(eta[i]));
      resid[i] = y_[i] - p;
    }
    grad.noalias() = design_.transpose() * resid;
    grad -= inv_prior_var_ * theta;
    return lp - 0.5 * inv_prior_var_ * theta.squaredNorm();
  }

 private:
  void check(const Vector& theta) const {
    if (theta.size() != design_.cols()) throw DimensionMismatch("logistic: parameter size");
  }

  Matrix design_;
  Vector y_;
  double inv_prior_var_;
};

}  // namespace

TargetPtr make_oned_target(int id) {
  switch (id) {
    case 1:
      return std::make_shared<StandardNormal1D>();
    case 2:
      return std::make_shared<MixtureTarget>("mixnormal", MixtureTarget::Shape::Gaussian,
                                             std::array<double, 2>{0.25, 0.75},
                                             std::array<double, 2>{-1.0, 1.0}, 0.5);
    case 3: {
      const double s = std::sqrt(37.0 / 2.0) / 8.0;
      return std::make_shared<MixtureTarget>("mixt4", MixtureTarget::Shape::StudentT4,
                                             std::array<double, 2>{0.75, 0.25},
                                             std::array<double, 2>{-0.75, 0.75}, s);
    }
    case 4:
      return std::make_shared<LogGamma>();
    case 5:
      return std::make_shared<LogitUniform>();
    default:
      throw UnknownTargetId("unknown one-dimensional target id " + std::to_string(id));
  }
}

double oned_target_mean(int id) {
  switch (id) {
    case 1: return 0.0;
    case 2: return 0.5;
    case 3: return -0.375;
    case 4: return 2.0;
    case 5: return 0.0;
    default:
      throw UnknownTargetId("unknown one-dimensional target id " + std::to_string(id));
  }
}

TargetPtr make_mvn(Vector mu, const Matrix& sigma) {
  return std::make_shared<MvnTarget>(std::move(mu), sigma);
}

TargetPtr make_logistic_posterior(Matrix x, Vector y, double prior_sd) {
  return std::make_shared<LogisticPosterior>(std::move(x), std::move(y), prior_sd);
}

double check_gradient(const TargetDensity& target, const Vector& point) {
  Vector grad(point.size());
  target.log_density_gradient(point, grad);
  double worst = 0.0;
  Vector probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(point[i]));
    probe[i] = point[i] + h;
    const double up = target.log_density(probe);
    probe[i] = point[i] - h;
    const double down = target.log_density(probe);
    probe[i] = point[i];
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace mirror
