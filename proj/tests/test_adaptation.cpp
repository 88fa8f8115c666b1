#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "mirror/adaptation.hpp"
#include "mirror/errors.hpp"

using namespace mirror;

namespace {

Vector v1(double x) {
  Vector v(1);
  v << x;
  return v;
}

std::shared_ptr<const MomentEstimate> standard_normal_moments() {
  return std::make_shared<const MomentEstimate>(MomentEstimate::identity(1));
}

class Flat final : public TargetDensity {
 public:
  std::size_t dimension() const override { return 1; }
  std::string name() const override { return "flat"; }
  double log_density(const Vector&) const override { return 0.0; }
  double log_density_gradient(const Vector&, Vector& g) const override {
    g = Vector::Zero(1);
    return 0.0;
  }
};

}  // namespace

TEST(Burnin, DefaultPlan) {
  EXPECT_EQ(default_burnin(1).iterations, 500u);
  EXPECT_EQ(default_burnin(2).update_every, 500u);
  EXPECT_EQ(default_burnin(10).iterations, 10000u);
  EXPECT_EQ(default_burnin(30).iterations, 300000u);
  EXPECT_EQ(default_burnin(30).update_every, 50000u);
}

TEST(Burnin, StandardNormalMoments) {
  auto target = make_mvn(Vector::Zero(2), Matrix::Identity(2, 2));
  BurninOptions o;
  o.iterations = 100000;
  o.update_every = 100000;
  RandomStream rng(1);
  const BurninResult r = run_burnin(*target, o, rng);
  EXPECT_LT(r.moments.mu_star.cwiseAbs().maxCoeff(), 0.05);
  EXPECT_LT((r.moments.sigma_star - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.1);
  EXPECT_EQ(r.moments.sample_count, 100000u);
  EXPECT_LT((r.moments.chol_lower * r.moments.chol_lower.transpose() - r.moments.sigma_star).norm(), 1e-8);
}

TEST(Burnin, SegmentedUsesLastSegment) {
  Vector mu(2);
  mu << 1, 2;
  Matrix s(2, 2);
  s << 1, 1.8, 1.8, 4;
  auto target = make_mvn(mu, s);
  BurninOptions o;
  o.iterations = 60000;
  o.update_every = 20000;
  RandomStream rng(2);
  const BurninResult r = run_burnin(*target, o, rng);
  EXPECT_EQ(r.moments.sample_count, 20000u);
  EXPECT_LT((r.moments.mu_star - mu).cwiseAbs().maxCoeff(), 0.1);
  EXPECT_LT((r.moments.sigma_star - s).cwiseAbs().maxCoeff(), 0.3);
}

TEST(Burnin, Deterministic) {
  auto target = make_oned_target(3);
  BurninOptions o;
  o.iterations = 2000;
  o.update_every = 500;
  RandomStream a(7), b(7);
  const BurninResult ra = run_burnin(*target, o, a);
  const BurninResult rb = run_burnin(*target, o, b);
  EXPECT_EQ(ra.moments.mu_star, rb.moments.mu_star);
  EXPECT_EQ(ra.moments.sigma_star, rb.moments.sigma_star);
}

TEST(Burnin, LongerBurninIsMoreAccurate) {
  Vector mu(2);
  mu << 1, 2;
  Matrix s(2, 2);
  s << 1, 1.8, 1.8, 4;
  auto target = make_mvn(mu, s);
  double rmse[3];
  const std::size_t lengths[3] = {100, 1000, 10000};
  for (int k = 0; k < 3; ++k) {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      BurninOptions o;
      o.iterations = lengths[k];
      o.update_every = lengths[k];
      o.start = mu;
      RandomStream rng(mix_seed(seed, 77));
      const BurninResult r = run_burnin(*target, o, rng);
      sum += (r.moments.mu_star - mu).squaredNorm() + (r.moments.sigma_star - s).squaredNorm();
    }
    rmse[k] = std::sqrt(sum / 20.0);
  }
  EXPECT_GT(rmse[0], rmse[1]);
  EXPECT_GT(rmse[1], rmse[2]);
}

TEST(Burnin, Errors) {
  auto target = make_mvn(Vector::Zero(3), Matrix::Identity(3, 3));
  RandomStream rng(1);
  BurninOptions o;
  o.iterations = 50;
  o.update_every = 50;
  EXPECT_THROW(run_burnin(*target, o, rng), InvalidArgument);
  o.iterations = 1000;
  o.update_every = 300;
  EXPECT_THROW(run_burnin(*target, o, rng), InvalidArgument);
  auto big = make_mvn(Vector::Zero(150), Matrix::Identity(150, 150));
  o.iterations = 200;
  o.update_every = 100;
  EXPECT_THROW(run_burnin(*big, o, rng), SingularCovariance);
}

TEST(Tuning, RandomWalkOptimalScale) {
  auto target = make_oned_target(1);
  RandomStream rng(3);
  const TuningResult r =
      tune_epsilon(make_kernel(KernelKind::RW, 1.0, standard_normal_moments()), *target, 0.484, v1(0.0), rng);
  EXPECT_NEAR(r.epsilon, 2.1, 0.1);
  EXPECT_NEAR(r.pjump, 0.484, 0.02);
}

TEST(Tuning, MalaHighAcceptance) {
  auto target = make_oned_target(1);
  RandomStream rng(4);
  const TuningResult r =
      tune_epsilon(make_kernel(KernelKind::MALA, 1.0, standard_normal_moments()), *target, 0.99, v1(0.0), rng);
  EXPECT_NEAR(r.epsilon, 0.5, 0.1);
}

TEST(Tuning, MonotoneInTarget) {
  auto target = make_oned_target(2);
  RandomStream a(5), b(5);
  const KernelConfig k = make_kernel(KernelKind::RW, 1.0);
  const double lo = tune_epsilon(k, *target, 0.3, v1(0.0), a).epsilon;
  const double hi = tune_epsilon(k, *target, 0.7, v1(0.0), b).epsilon;
  EXPECT_GT(lo, hi);
}

TEST(Tuning, UnreachableTargetFails) {
  Flat flat;
  RandomStream rng(6);
  EXPECT_THROW(tune_epsilon(make_kernel(KernelKind::RW, 1.0), flat, 0.5, v1(0.0), rng), TuningFailed);
  EXPECT_THROW(tune_epsilon(make_kernel(KernelKind::RW, 1.0), flat, 1.5, v1(0.0), rng), InvalidArgument);
}
