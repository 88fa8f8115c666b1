#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>

#include "mirror/linalg.hpp"

namespace mirror {

// Unnormalized, differentiable log-density on R^d. Only differences of
// log_density are meaningful. Implementations are immutable after
// construction and may be shared between threads.
class TargetDensity {
 public:
  virtual ~TargetDensity() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;

  virtual double log_density(const Vector& x) const = 0;

  // Returns log_density(x) and writes the gradient into `grad`
  // (resized to dimension() if needed).
  virtual double log_density_gradient(const Vector& x, Vector& grad) const = 0;

  // Map from the sampled (unconstrained) coordinates to the reported ones.
  virtual bool has_back_transform() const { return false; }
  virtual void back_transform(const Vector& x, Vector& out) const { out = x; }
};

using TargetPtr = std::shared_ptr<const TargetDensity>;

// The five univariate benchmark targets, all with unit variance:
//   1  N(0,1)
//   2  1/4 N(-1,1/4) + 3/4 N(1,1/4)
//   3  3/4 t4(-3/4,s^2) + 1/4 t4(3/4,s^2), s = sqrt(37/2)/8
//   4  Gamma(4, rate 2), sampled on xi = log(theta)
//   5  U(-sqrt3, sqrt3), sampled on xi = log((sqrt3+theta)/(sqrt3-theta))
TargetPtr make_oned_target(int id);

// Exact mean of the back-transformed univariate target `id`.
double oned_target_mean(int id);

TargetPtr make_mvn(Vector mu, const Matrix& sigma);

// Bayesian logistic regression with an intercept and N(0, prior_sd^2)
// priors. `x` is N x p without the intercept column; parameters are
// (alpha, beta_1..beta_p).
TargetPtr make_logistic_posterior(Matrix x, Vector y, double prior_sd);

// Maximum relative error between the analytic gradient and central
// differences with step 1e-5 * (1 + |x_i|). The relative error of each
// coordinate is |g - fd| / max(1, |fd|).
double check_gradient(const TargetDensity& target, const Vector& point);

// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace mirror
