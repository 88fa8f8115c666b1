#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mirror/errors.hpp"
#include "mirror/targets.hpp"

using namespace mirror;

namespace {

Vector v1(double x) {
  Vector v(1);
  v << x;
  return v;
}

struct Moments {
  double mean;
  double var;
};

// Mean and variance of the back-transformed target by trapezoid quadrature
// of exp(log_density) on a wide grid in the sampled coordinate.
Moments quadrature_moments(const TargetDensity& t, double lo, double hi, int n = 400000) {
  const double h = (hi - lo) / n;
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  Vector x(1), out(1);
  for (int i = 0; i <= n; ++i) {
    x[0] = lo + h * i;
    const double w = std::exp(t.log_density(x)) * ((i == 0 || i == n) ? 0.5 : 1.0);
    t.back_transform(x, out);
    z += w;
    m1 += w * out[0];
    m2 += w * out[0] * out[0];
  }
  const double mean = m1 / z;
  return {mean, m2 / z - mean * mean};
}

}  // namespace

TEST(OnedTargets, LogGammaDifference) {
  auto t = make_oned_target(4);
  EXPECT_NEAR(t->log_density(v1(1.0)) - t->log_density(v1(0.0)), 6.0 - 2.0 * std::exp(1.0), 1e-12);
  EXPECT_NEAR(6.0 - 2.0 * std::exp(1.0), 0.56344, 1e-5);
}

TEST(OnedTargets, NormalGradientAtMode) {
  Vector g;
  make_oned_target(1)->log_density_gradient(v1(0.0), g);
  EXPECT_EQ(g[0], 0.0);
}

TEST(OnedTargets, UnknownId) {
  EXPECT_THROW(make_oned_target(0), UnknownTargetId);
  EXPECT_THROW(make_oned_target(6), UnknownTargetId);
}

TEST(OnedTargets, UnitVarianceAndStatedMeans) {
  const double ranges[5][2] = {{-12, 12}, {-8, 8}, {-60, 60}, {-12, 5}, {-40, 40}};
  for (int id = 1; id <= 5; ++id) {
    auto t = make_oned_target(id);
    const Moments m = quadrature_moments(*t, ranges[id - 1][0], ranges[id - 1][1]);
    EXPECT_NEAR(m.mean, oned_target_mean(id), 2e-4) << "target " << id;
    // t4 tails decay slowly; the quadrature window loses a little variance
    EXPECT_NEAR(m.var, 1.0, id == 3 ? 5e-3 : 1e-4) << "target " << id;
  }
  EXPECT_DOUBLE_EQ(oned_target_mean(3), -0.375);
}

TEST(OnedTargets, ExactMixtureSamplerMean) {
  // Independent oracle: draw from 3/4 t4(-3/4, s^2) + 1/4 t4(3/4, s^2)
  // directly and compare with the stated mean.
  std::mt19937_64 eng(2024);
  std::normal_distribution<double> n;
  std::chi_squared_distribution<double> chi(4.0);
  std::uniform_real_distribution<double> u;
  const double s = std::sqrt(37.0 / 2.0) / 8.0;
  double sum = 0.0, sum2 = 0.0;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) {
    const double loc = u(eng) < 0.75 ? -0.75 : 0.75;
    const double x = loc + s * n(eng) / std::sqrt(chi(eng) / 4.0);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / draws;
  EXPECT_NEAR(mean, -0.375, 0.005);
  EXPECT_NEAR(sum2 / draws - mean * mean, 1.0, 0.03);
}

TEST(OnedTargets, GradientsMatchFiniteDifferences) {
  std::mt19937_64 eng(7);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int id = 1; id <= 5; ++id) {
    auto t = make_oned_target(id);
    for (int k = 0; k < 100; ++k) {
      EXPECT_LT(check_gradient(*t, v1(n(eng))), 1e-5) << "target " << id;
    }
  }
}

TEST(OnedTargets, BackTransformSupport) {
  auto gamma = make_oned_target(4);
  auto unif = make_oned_target(5);
  EXPECT_TRUE(gamma->has_back_transform());
  Vector out(1);
  for (double x : {-30.0, -1.0, 0.0, 2.5, 30.0}) {
    gamma->back_transform(v1(x), out);
    EXPECT_GT(out[0], 0.0);
    unif->back_transform(v1(x), out);
    EXPECT_LE(std::abs(out[0]), std::sqrt(3.0));
  }
  unif->back_transform(v1(std::log(3.0)), out);  // (e^x - 1)/(e^x + 1) = 1/2
  EXPECT_NEAR(out[0], std::sqrt(3.0) / 2.0, 1e-14);
}

TEST(Mvn, GradientAndQuadraticForm) {
  auto t = make_mvn(Vector::Zero(2), Matrix::Identity(2, 2));
  Vector x(2), g;
  x << 3, 4;
  t->log_density_gradient(x, g);
  EXPECT_NEAR(g[0], -3.0, 1e-14);
  EXPECT_NEAR(g[1], -4.0, 1e-14);

  Vector mu(2);
  mu << 1, 2;
  Matrix s(2, 2);
  s << 1, 1.8, 1.8, 4;
  auto f2 = make_mvn(mu, s);
  const Matrix omega = s.inverse();
  Vector e = mu;
  e[0] += 1.0;
  EXPECT_NEAR(f2->log_density(mu) - f2->log_density(e), 0.5 * omega(0, 0), 1e-10);
  std::mt19937_64 eng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int k = 0; k < 100; ++k) {
    x << n(eng), n(eng);
    EXPECT_LT(check_gradient(*f2, x), 1e-5);
  }
}

TEST(Mvn, RejectsIndefinite) {
  Matrix s(2, 2);
  s << 1, 2, 2, 1;
  EXPECT_THROW(make_mvn(Vector::Zero(2), s), NotPositiveDefinite);
}

TEST(Logistic, AtOriginEveryProbabilityIsHalf) {
  std::mt19937_64 eng(11);
  std::normal_distribution<double> n;
  const int N = 40, p = 3;
  Matrix x(N, p);
  Vector y(N);
  double ysum = 0.0;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = n(eng);
    y[i] = i % 3 == 0 ? 1.0 : 0.0;
    ysum += y[i];
  }
  auto t = make_logistic_posterior(x, y, 10.0);
  Vector g;
  const double lp = t->log_density_gradient(Vector::Zero(p + 1), g);
  EXPECT_NEAR(lp, -N * std::log(2.0), 1e-10);
  EXPECT_NEAR(g[0], ysum - N / 2.0, 1e-12);
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  std::mt19937_64 eng(12);
  std::normal_distribution<double> n;
  std::bernoulli_distribution b(0.4);
  const int N = 50, p = 3;
  Matrix x(N, p);
  Vector y(N);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = n(eng);
    y[i] = b(eng) ? 1.0 : 0.0;
  }
  auto t = make_logistic_posterior(x, y, 10.0);
  for (int k = 0; k < 100; ++k) {
    Vector th(p + 1);
    for (int j = 0; j <= p; ++j) th[j] = n(eng);
    EXPECT_LT(check_gradient(*t, th), 1e-6);
  }
}

TEST(Logistic, LargeInputStaysFinite) {
  std::mt19937_64 eng(13);
  std::normal_distribution<double> n;
  const int N = 1000, p = 24;
  Matrix x(N, p);
  Vector y(N);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = n(eng);
    y[i] = i % 2;
  }
  auto t = make_logistic_posterior(x, y, 10.0);
  Vector th = Vector::Constant(p + 1, 50.0);
  th[3] = -50.0;
  Vector g;
  const double lp = t->log_density_gradient(th, g);
  EXPECT_TRUE(std::isfinite(lp));
  EXPECT_TRUE(g.allFinite());
}

TEST(Logistic, DimensionMismatch) {
  EXPECT_THROW(make_logistic_posterior(Matrix::Zero(5, 2), Vector::Zero(4), 10.0), DimensionMismatch);
}
