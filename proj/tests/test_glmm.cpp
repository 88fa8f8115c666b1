#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mirror/errors.hpp"
#include "mirror/glmm.hpp"
#include "mirror/targets.hpp"

using namespace mirror;

namespace {

Vector random_vector(int d, unsigned seed, double sd = 1.0) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> n(0.0, sd);
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = n(eng);
  return v;
}

GlmmSpec random_spec(GlmmFamily family, std::size_t n, std::size_t p, std::size_t r, unsigned seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> g;
  std::poisson_distribution<int> pois(2.0);
  std::bernoulli_distribution bern(0.4);
  GlmmSpec spec;
  spec.family = family;
  spec.fixed_dim = p;
  spec.random_dim = r;
  for (std::size_t i = 0; i < n; ++i) {
    const int ni = 2 + static_cast<int>(i % 3);
    SubjectData s;
    s.x.resize(ni, static_cast<Eigen::Index>(p));
    s.z.resize(ni, static_cast<Eigen::Index>(r));
    s.y.resize(ni);
    for (int j = 0; j < ni; ++j) {
      for (std::size_t k = 0; k < p; ++k) s.x(j, k) = k == 0 ? 1.0 : g(eng);
      for (std::size_t k = 0; k < r; ++k) s.z(j, k) = k == 0 ? 1.0 : g(eng);
      s.y[j] = family == GlmmFamily::PoissonLog ? pois(eng) : (bern(eng) ? 1.0 : 0.0);
    }
    spec.subjects.push_back(s);
  }
  return spec;
}

DataTable epilepsy_rows(int subjects, int visits) {
  DataTable t({"id", "period", "seizures", "baseline", "treat", "years"});
  for (int i = 0; i < subjects; ++i) {
    for (int v = 1; v <= visits; ++v) {
      t.add_row({std::to_string(100 + i), std::to_string(v), std::to_string((i * 7 + v) % 9),
                 std::to_string(8 + (i % 13) * 4), std::to_string(i % 2), std::to_string(18 + (i % 23))});
    }
  }
  return t;
}

const ColumnMap kEpilepsyColumns = {{"subject", "id"},     {"visit", "period"}, {"y", "seizures"},
                                    {"base", "baseline"}, {"trt", "treat"},    {"age", "years"}};

}  // namespace

TEST(Vech, ScalarCase) {
  Matrix g(1, 1);
  g << std::exp(2.0);
  const Vector z = vech_wstar(g);
  ASSERT_EQ(z.size(), 1);
  EXPECT_NEAR(z[0], 1.0, 1e-14);
  EXPECT_NEAR(unvech_wstar(z, 1).g(0, 0), std::exp(2.0), 1e-12);
}

TEST(Vech, TwoByTwoDefinition) {
  Matrix w(2, 2);
  w << 1, 0, 0.5, 2;
  const Vector z = vech_wstar(w * w.transpose());
  ASSERT_EQ(z.size(), 3);
  EXPECT_NEAR(z[0], 0.0, 1e-14);
  EXPECT_NEAR(z[1], 0.5, 1e-14);
  EXPECT_NEAR(z[2], std::log(2.0), 1e-14);
  EXPECT_TRUE(unvech_wstar(z, 2).w.isApprox(w, 1e-14));
}

TEST(Vech, RoundTripRandomSpd) {
  for (unsigned s = 0; s < 20; ++s) {
    const int r = 1 + static_cast<int>(s % 4);
    Matrix a(r, r);
    for (int i = 0; i < r; ++i) a.row(i) = random_vector(r, s * 10 + i).transpose();
    const Matrix g = a * a.transpose() + 0.5 * Matrix::Identity(r, r);
    const CovFactor back = unvech_wstar(vech_wstar(g), static_cast<std::size_t>(r));
    EXPECT_LT((back.g - g).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE((back.w.diagonal().array() > 0).all());
  }
  EXPECT_THROW(unvech_wstar(Vector::Zero(2), 2), DimensionMismatch);
}

TEST(GlmmPosteriorTest, BernoulliAtZero) {
  const GlmmSpec spec = random_spec(GlmmFamily::BernoulliLogit, 7, 3, 1, 1);
  const double n_obs = static_cast<double>(spec.observation_count());
  EXPECT_NEAR(glmm_log_posterior(spec, Vector::Zero(spec.parameter_dim())), -n_obs * std::log(2.0), 1e-10);
}

TEST(GlmmPosteriorTest, GradientMatchesFiniteDifferences) {
  for (std::size_t r : {1u, 2u}) {
    for (GlmmFamily fam : {GlmmFamily::PoissonLog, GlmmFamily::BernoulliLogit}) {
      const GlmmSpec spec = random_spec(fam, 5, 3, r, 2 + static_cast<unsigned>(r));
      GlmmPosterior post(spec);
      for (unsigned k = 0; k < 10; ++k) {
        const Vector theta = random_vector(static_cast<int>(spec.parameter_dim()), 50 + k, 0.5);
        EXPECT_LT(check_gradient(post, theta), 1e-5) << "r=" << r << " family " << to_string(fam);
      }
    }
  }
}

TEST(GlmmPosteriorTest, FactorizesIntoLocalTerms) {
  const GlmmSpec spec = random_spec(GlmmFamily::PoissonLog, 6, 2, 2, 9);
  GlmmPosterior post(spec);
  for (unsigned k = 0; k < 10; ++k) {
    const Vector theta = random_vector(static_cast<int>(spec.parameter_dim()), 70 + k, 0.4);
    std::vector<double> locals;
    const double total = post.log_density_terms(theta, locals);
    double sum = post.global_log_density(theta);
    for (std::size_t i = 0; i < spec.subject_count(); ++i) {
      EXPECT_DOUBLE_EQ(locals[i], post.local_log_density(i, theta));
      sum += locals[i];
    }
    EXPECT_NEAR(total, sum, 1e-10);
    EXPECT_NEAR(total, glmm_log_posterior(spec, theta), 1e-10);
  }
}

TEST(GlmmPosteriorTest, SubjectBlockRatio) {
  const GlmmSpec spec = random_spec(GlmmFamily::BernoulliLogit, 5, 3, 2, 11);
  const auto d = static_cast<int>(spec.parameter_dim());
  const Vector theta = random_vector(d, 12, 0.5);
  const Vector beta = theta.segment(spec.beta_offset(), 3);
  const Vector zeta = theta.segment(spec.zeta_offset(), 3);
  const Vector xi_old = theta.segment(2, 2);
  const Vector xi_new = random_vector(2, 13);
  EXPECT_EQ(subject_block_logratio(spec, 1, xi_old, xi_old, beta, zeta), 0.0);

  Vector moved = theta;
  moved.segment(2, 2) = xi_new;
  const double full = glmm_log_posterior(spec, moved) - glmm_log_posterior(spec, theta);
  const double local = subject_block_logratio(spec, 1, xi_old, xi_new, beta, zeta);
  EXPECT_NEAR(local, full, 1e-10);

  // other subjects' xi do not enter
  Vector other = moved;
  other.segment(0, 2) += Vector::Ones(2);
  other.segment(6, 2) -= Vector::Ones(2);
  EXPECT_EQ(subject_block_logratio(spec, 1, xi_old, xi_new, beta, zeta), local);
  EXPECT_NEAR(glmm_log_posterior(spec, other) - glmm_log_posterior(spec, [&] {
                Vector t = other;
                t.segment(2, 2) = xi_old;
                return t;
              }()),
              local, 1e-10);
}

TEST(GlmmPosteriorTest, OverflowSafeLinearPredictor) {
  const GlmmSpec spec = random_spec(GlmmFamily::BernoulliLogit, 2, 1, 1, 14);
  Vector theta = Vector::Zero(spec.parameter_dim());
  for (double b : {-700.0, 700.0}) {
    theta[spec.beta_offset()] = b;
    Vector g;
    EXPECT_TRUE(std::isfinite(GlmmPosterior(spec).log_density_gradient(theta, g)));
    EXPECT_TRUE(g.allFinite());
  }
  const GlmmSpec pois = random_spec(GlmmFamily::PoissonLog, 2, 1, 1, 15);
  theta = Vector::Zero(pois.parameter_dim());
  theta[pois.beta_offset()] = -700.0;
  EXPECT_TRUE(std::isfinite(glmm_log_posterior(pois, theta)));
}

TEST(GlmmPosteriorTest, DimensionChecks) {
  GlmmSpec spec = random_spec(GlmmFamily::PoissonLog, 3, 2, 1, 16);
  EXPECT_THROW(glmm_log_posterior(spec, Vector::Zero(3)), DimensionMismatch);
  spec.subjects[0].x = Matrix::Zero(spec.subjects[0].y.size(), 3);
  EXPECT_THROW(GlmmPosterior{spec}, DimensionMismatch);
  GlmmSpec bad = random_spec(GlmmFamily::BernoulliLogit, 2, 1, 1, 17);
  bad.subjects[0].y[0] = 2.0;
  EXPECT_THROW(GlmmPosterior{bad}, InvalidArgument);
}

TEST(Ingestion, EpilepsyShape) {
  const GlmmSpec spec = build_epilepsy_model(epilepsy_rows(59, 4), kEpilepsyColumns);
  EXPECT_EQ(spec.subject_count(), 59u);
  EXPECT_EQ(spec.fixed_dim, 6u);
  EXPECT_EQ(spec.parameter_dim(), 66u);
  EXPECT_EQ(spec.family, GlmmFamily::PoissonLog);
  EXPECT_EQ(spec.prior_sd_beta, 10.0);
}

TEST(Ingestion, EpilepsyCovariates) {
  const DataTable rows = epilepsy_rows(3, 4);
  const GlmmSpec spec = build_epilepsy_model(rows, kEpilepsyColumns);
  // ages 18, 19, 20; baselines 8, 12, 16; treatment 0, 1, 0
  const double mean_log_age = (std::log(18.0) + std::log(19.0) + std::log(20.0)) / 3.0;
  const Matrix& x = spec.subjects[1].x;
  EXPECT_DOUBLE_EQ(x(0, 0), 1.0);
  EXPECT_NEAR(x(0, 1), std::log(3.0), 1e-14);
  EXPECT_EQ(x(0, 2), 1.0);
  EXPECT_NEAR(x(0, 3), std::log(19.0) - mean_log_age, 1e-14);
  EXPECT_NEAR(x(0, 4), std::log(3.0), 1e-14);
  EXPECT_EQ(x(0, 5), 0.0);
  EXPECT_EQ(x(3, 5), 1.0);
  EXPECT_EQ(spec.subjects[1].y[0], (7 + 1) % 9);
}

TEST(Ingestion, PolypharmacyShape) {
  DataTable t({"subject", "y", "gender", "race", "age", "mhv", "inptmhv"});
  for (int i = 0; i < 500; ++i)
    for (int j = 0; j < 7; ++j)
      t.add_row({std::to_string(i), std::to_string((i + j) % 2), std::to_string(i % 2), std::to_string(i % 3 == 0),
                 std::to_string(40 + j), std::to_string((i + 3 * j) % 20), std::to_string(j % 3)});
  const GlmmSpec spec = build_polypharmacy_model(t);
  EXPECT_EQ(spec.parameter_dim(), 509u);
  EXPECT_EQ(spec.family, GlmmFamily::BernoulliLogit);
  // subject 0, year 2: mhv = 6 -> MHV_2; inptmhv = 2 -> 1
  const Matrix& x = spec.subjects[0].x;
  EXPECT_EQ(x(2, 4), 0.0);
  EXPECT_EQ(x(2, 5), 1.0);
  EXPECT_EQ(x(2, 6), 0.0);
  EXPECT_EQ(x(2, 7), 1.0);
  PolypharmacyOptions o;
  o.age_scale = 10.0;
  EXPECT_NEAR(build_polypharmacy_model(t, {}, o).subjects[0].x(1, 3), 4.1, 1e-14);
}

TEST(Ingestion, SingleSubject) {
  const GlmmSpec spec = build_epilepsy_model(epilepsy_rows(1, 4), kEpilepsyColumns);
  EXPECT_EQ(spec.subject_count(), 1u);
  EXPECT_EQ(spec.parameter_dim(), 8u);
}

TEST(Ingestion, SchemaAndGroupingErrors) {
  DataTable missing({"id", "period", "seizures"});
  missing.add_row({"1", "1", "3"});
  EXPECT_THROW(build_epilepsy_model(missing, kEpilepsyColumns), SchemaError);

  DataTable t = epilepsy_rows(2, 2);
  t.add_row({"100", "3", "1", "999", "0", "18"});  // baseline changes within subject
  EXPECT_THROW(build_epilepsy_model(t, kEpilepsyColumns), BadSubjectGrouping);

  DataTable dup = epilepsy_rows(2, 2);
  dup.add_row({"100", "2", "1", "8", "0", "18"});  // repeated visit
  EXPECT_THROW(build_epilepsy_model(dup, kEpilepsyColumns), BadSubjectGrouping);

  DataTable bad = epilepsy_rows(1, 1);
  bad.add_row({"100", "2", "x", "8", "0", "18"});
  EXPECT_THROW(build_epilepsy_model(bad, kEpilepsyColumns), SchemaError);
}

TEST(Synthetic, DeterministicAndRoundTrips) {
  Vector beta(2);
  beta << 0.2, -0.4;
  const SyntheticGlmm a = generate_synthetic_glmm(GlmmFamily::BernoulliLogit, 10, 3, beta, Vector::Zero(1), 5);
  const SyntheticGlmm b = generate_synthetic_glmm(GlmmFamily::BernoulliLogit, 10, 3, beta, Vector::Zero(1), 5);
  std::ostringstream sa, sb;
  a.rows.write_csv(sa);
  b.rows.write_csv(sb);
  EXPECT_EQ(sa.str(), sb.str());

  std::istringstream in(sa.str());
  const GlmmSpec spec = build_synthetic_model(DataTable::read_csv(in), GlmmFamily::BernoulliLogit, 2, 1);
  EXPECT_EQ(spec.subject_count(), 10u);
  EXPECT_EQ(spec.observation_count(), 30u);
}

TEST(Synthetic, VanishingRandomEffect) {
  const SyntheticGlmm s =
      generate_synthetic_glmm(GlmmFamily::PoissonLog, 50, 5, Vector::Constant(1, 0.5), Vector::Constant(1, -20.0), 6);
  for (const Vector& xi : s.xi) EXPECT_LT(std::abs(xi[0]), 1e-7);
}
