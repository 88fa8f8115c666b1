#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "mirror/chain.hpp"
#include "mirror/errors.hpp"
#include "mirror/glmm.hpp"
#include "mirror/whitening.hpp"

using namespace mirror;

namespace {

Matrix random_spd(int d, unsigned seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> n;
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = n(eng);
  return a * a.transpose() / d + Matrix::Identity(d, d);
}

Vector random_vector(int d, unsigned seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> n;
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = n(eng);
  return v;
}

// y_ij ~ N(beta + xi_i, 1), xi_i ~ N(0, exp(2 zeta)); theta = (xi_1..xi_n, beta, zeta).
class ToyGaussianGlmm final : public BlockTarget {
 public:
  explicit ToyGaussianGlmm(std::vector<std::vector<double>> y) : y_(std::move(y)) {
    std::vector<std::size_t> sizes(y_.size(), 1);
    sizes.push_back(2);
    partition_ = BlockPartition(sizes);
  }
  std::size_t dimension() const override { return y_.size() + 2; }
  std::string name() const override { return "toy"; }
  const BlockPartition& partition() const override { return partition_; }

  double local_log_density(std::size_t i, const Vector& t) const override {
    Vector g;
    return local_log_density_gradient(i, t, g);
  }
  double local_log_density_gradient(std::size_t i, const Vector& t, Vector& g) const override {
    const double xi = t[i], beta = t[y_.size()], zeta = t[y_.size() + 1];
    double v = -0.5 * xi * xi * std::exp(-2 * zeta) - zeta;
    double gx = -xi * std::exp(-2 * zeta);
    for (double y : y_[i]) {
      v += -0.5 * (y - beta - xi) * (y - beta - xi);
      gx += y - beta - xi;
    }
    g = Vector::Constant(1, gx);
    return v;
  }
  double global_log_density(const Vector& t) const override {
    const double beta = t[y_.size()], zeta = t[y_.size() + 1];
    return -beta * beta / 200 - zeta * zeta / 200;
  }
  double log_density_terms(const Vector& t, std::vector<double>& locals) const override {
    locals.resize(y_.size());
    double s = 0;
    for (std::size_t i = 0; i < y_.size(); ++i) s += (locals[i] = local_log_density(i, t));
    return s + global_log_density(t);
  }
  double log_density(const Vector& t) const override {
    std::vector<double> l;
    return log_density_terms(t, l);
  }
  double log_density_gradient(const Vector& t, Vector& g) const override {
    const std::size_t n = y_.size();
    g = Vector::Zero(static_cast<Eigen::Index>(n + 2));
    const double beta = t[n], zeta = t[n + 1];
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = t[i];
      g[i] = -xi * std::exp(-2 * zeta);
      g[n + 1] += xi * xi * std::exp(-2 * zeta) - 1;
      for (double y : y_[i]) {
        g[i] += y - beta - xi;
        g[n] += y - beta - xi;
      }
    }
    g[n] -= beta / 100;
    g[n + 1] -= zeta / 100;
    return log_density(t);
  }

 private:
  std::vector<std::vector<double>> y_;
  BlockPartition partition_;
};

GlmmSpec poisson_spec(std::size_t n, std::size_t ni, std::uint64_t seed) {
  Vector beta(2);
  beta << 0.5, -0.3;
  const SyntheticGlmm data = generate_synthetic_glmm(GlmmFamily::PoissonLog, n, ni, beta, Vector::Constant(1, -0.5), seed);
  return build_synthetic_model(data.rows, GlmmFamily::PoissonLog, 2, 1);
}

}  // namespace

TEST(DenseWhitening, IdentityAndDiagonal) {
  const WhiteningMap id = dense_whitening(MomentEstimate::identity(3), BlockPartition({3}));
  const Vector t = random_vector(3, 1);
  EXPECT_TRUE(id.forward(t).isApprox(t, 0.0));
  EXPECT_EQ(id.log_abs_det_forward(), 0.0);

  Matrix s = Matrix::Zero(2, 2);
  s.diagonal() << 4, 9;
  const WhiteningMap m = dense_whitening(MomentEstimate::from_moments(Vector::Zero(2), s), BlockPartition({1, 1}));
  Vector th(2);
  th << 2, 3;
  EXPECT_NEAR(m.forward(th)[0], 1.0, 1e-9);
  EXPECT_NEAR(m.forward(th)[1], 1.0, 1e-9);
  EXPECT_NEAR(m.log_abs_det_forward(), -std::log(6.0), 1e-9);
}

TEST(DenseWhitening, WhitensExactGaussianDraws) {
  Vector mu(2);
  mu << 1, 2;
  Matrix s(2, 2);
  s << 1, 1.8, 1.8, 4;
  const MomentEstimate m = MomentEstimate::from_moments(mu, s);
  const WhiteningMap w = dense_whitening(m, BlockPartition({2}));
  const Matrix l = s.llt().matrixL();  // independent factorization for the draws
  RandomStream rng(10);
  const int n = 100000;
  Matrix phi(n, 2);
  Vector z(2);
  for (int i = 0; i < n; ++i) {
    rng.fill_gaussian(z);
    phi.row(i) = w.forward(mu + l * z).transpose();
  }
  const Eigen::RowVectorXd mean = phi.colwise().mean();
  const Matrix centred = phi.rowwise() - mean;
  const Matrix cov = centred.transpose() * centred / (n - 1);
  EXPECT_NEAR(cov(0, 0), 1.0, 0.05);
  EXPECT_NEAR(cov(1, 1), 1.0, 0.05);
  EXPECT_NEAR(cov(0, 1), 0.0, 0.05);
}

TEST(DenseWhitening, TransformedDensity) {
  Vector mu(2);
  mu << 1, 2;
  Matrix s(2, 2);
  s << 1, 1.8, 1.8, 4;
  auto target = make_mvn(mu, s);
  const WhiteningMap w = dense_whitening(MomentEstimate::from_moments(mu, s), BlockPartition({2}));
  const Vector z = random_vector(2, 3);
  const Matrix c = w.factor();
  EXPECT_LT((c - cholesky_lower(s)).norm(), 1e-9);
  EXPECT_NEAR(w.log_density_z(*target, z), target->log_density(c * z) + std::log(c.determinant()), 1e-12);
}

TEST(SparseWhitening, BlockDiagonalPrecision) {
  Matrix omega = Matrix::Zero(5, 5);
  omega.block(0, 0, 2, 2) << 2, 0.5, 0.5, 1;
  omega.block(2, 2, 1, 1) << 3;
  omega.block(3, 3, 2, 2) << 1.5, -0.2, -0.2, 2;
  const MomentEstimate m = MomentEstimate::from_moments(Vector::Zero(5), omega.inverse());
  const BlockPartition p({2, 1, 2});
  const WhiteningMap w = sparse_whitening(m, p);
  const Matrix& r = w.factor();
  for (std::size_t b = 0; b < 3; ++b) {
    const auto o = static_cast<Eigen::Index>(p.offset(b));
    const auto s = static_cast<Eigen::Index>(p.size(b));
    const Matrix want = Matrix(omega.block(o, o, s, s)).llt().matrixL().transpose();
    EXPECT_LT((r.block(o, o, s, s) - want).cwiseAbs().maxCoeff(), 1e-8);
  }
  Matrix off = r;
  for (std::size_t b = 0; b < 3; ++b) {
    const auto o = static_cast<Eigen::Index>(p.offset(b));
    const auto s = static_cast<Eigen::Index>(p.size(b));
    off.block(o, o, s, s).setZero();
  }
  EXPECT_LT(off.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SparseWhitening, ExactArrowPrecisionRoundTrip) {
  Matrix omega(3, 3);
  omega << 2.0, 0.0, 0.7,
           0.0, 1.5, -0.4,
           0.7, -0.4, 3.0;
  const MomentEstimate m = MomentEstimate::from_moments(Vector::Zero(3), omega.inverse());
  const WhiteningMap w = sparse_whitening(m, BlockPartition({1, 1, 1}));
  const Matrix& r = w.factor();
  EXPECT_LT((r.transpose() * r - omega).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(r(0, 1), 0.0);
}

TEST(SparseWhitening, PatternAndLocality) {
  const BlockPartition p({2, 2, 2, 3});
  const MomentEstimate m = MomentEstimate::from_moments(Vector::Zero(9), random_spd(9, 4));
  const WhiteningMap w = sparse_whitening(m, p);
  const Matrix& r = w.factor();
  EXPECT_TRUE(r.isUpperTriangular(0.0));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) {
        EXPECT_TRUE(r.block(p.offset(i), p.offset(j), 2, 2).isZero(0.0));
      }
  const Vector psi = random_vector(9, 5);
  const Vector theta = w.inverse(psi);
  Vector moved = psi;
  moved.segment(2, 2) += random_vector(2, 6) * 10.0;  // perturb block 1 only
  const Vector theta2 = w.inverse(moved);
  EXPECT_EQ(theta.segment(0, 2), theta2.segment(0, 2));
  EXPECT_EQ(theta.segment(4, 2), theta2.segment(4, 2));
  EXPECT_EQ(theta.segment(6, 3), theta2.segment(6, 3));
}

TEST(Whitening, RoundTripBothModes) {
  const BlockPartition p({1, 1, 2, 1, 3});
  const MomentEstimate m = MomentEstimate::from_moments(random_vector(8, 1), random_spd(8, 2));
  for (const WhiteningMap& w : {dense_whitening(m, p), sparse_whitening(m, p)}) {
    for (unsigned s = 0; s < 20; ++s) {
      const Vector t = random_vector(8, 100 + s);
      EXPECT_LT((w.inverse(w.forward(t)) - t).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_LT((w.forward(w.inverse(t)) - t).cwiseAbs().maxCoeff(), 1e-8);
    }
    EXPECT_TRUE(std::isfinite(w.log_abs_det_forward()));
  }
}

TEST(Whitening, IncrementalThetaUpdate) {
  const BlockPartition p({2, 2, 3});
  const MomentEstimate m = MomentEstimate::from_moments(Vector::Zero(7), random_spd(7, 8));
  for (const WhiteningMap& w : {dense_whitening(m, p), sparse_whitening(m, p)}) {
    Vector z = random_vector(7, 9);
    Vector theta = w.inverse(z);
    for (std::size_t b = 0; b < 3; ++b) {
      const Vector old = z.segment(p.offset(b), p.size(b));
      z.segment(p.offset(b), p.size(b)) += random_vector(static_cast<int>(p.size(b)), 20 + b);
      w.update_theta(b, z, old, theta);
      EXPECT_LT((theta - w.inverse(z)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Whitening, PullbackMatchesFiniteDifferences) {
  auto post = make_glmm_posterior(poisson_spec(4, 3, 11));
  const BlockPartition p = post->partition();
  const auto d = static_cast<int>(post->dimension());
  const MomentEstimate m = MomentEstimate::from_moments(Vector::Zero(d), random_spd(d, 12) * 0.1);
  for (const WhiteningMap& w : {dense_whitening(m, p), sparse_whitening(m, p)}) {
    const Vector z = random_vector(d, 13) * 0.3;
    Vector g;
    post->log_density_gradient(w.inverse(z), g);
    const Vector gz = w.pullback(g);
    for (int i = 0; i < d; ++i) {
      const double h = 1e-5;
      Vector zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      const double fd = (post->log_density(w.inverse(zp)) - post->log_density(w.inverse(zm))) / (2 * h);
      EXPECT_NEAR(gz[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Whitening, ExternalFactorPatternChecked) {
  const BlockPartition p({1, 1, 1});
  Matrix r = Matrix::Identity(3, 3);
  r(0, 2) = 0.5;
  EXPECT_NO_THROW(sparse_whitening_from_factor(r, p));
  r(0, 1) = 0.1;
  EXPECT_THROW(sparse_whitening_from_factor(r, p), PatternViolation);
  r(0, 1) = 0.0;
  r(2, 2) = -1.0;
  EXPECT_THROW(sparse_whitening_from_factor(r, p), PatternViolation);
}

TEST(BlockSweep, BlockRatiosMultiplyToJointRatio) {
  auto toy = std::make_shared<ToyGaussianGlmm>(std::vector<std::vector<double>>{{0.3, 1.2, -0.4}, {2.0, 1.1}});
  const MomentEstimate m = MomentEstimate::from_moments(Vector::Zero(4), random_spd(4, 30));
  const WhiteningMap w = sparse_whitening(m, toy->partition());
  const Vector z = random_vector(4, 31);
  const Vector z1 = random_vector(1, 32), z2 = random_vector(1, 33);
  // sequential block updates at fixed eta
  const double r1 = block_log_ratio(*toy, w, z, 0, z1);
  Vector mid = z;
  mid.segment(0, 1) = z1;
  const double r2 = block_log_ratio(*toy, w, mid, 1, z2);
  Vector fin = mid;
  fin.segment(1, 1) = z2;
  const double joint = toy->log_density(w.inverse(fin)) - toy->log_density(w.inverse(z));
  EXPECT_NEAR(r1 + r2, joint, 1e-10);
}

TEST(BlockSweep, SparseLocalityIsExact) {
  auto post = make_glmm_posterior(poisson_spec(6, 3, 14));
  const auto d = static_cast<int>(post->dimension());
  const MomentEstimate m = MomentEstimate::from_moments(Vector::Zero(d), random_spd(d, 15) * 0.2);
  const WhiteningMap w = sparse_whitening(m, post->partition());
  const Vector z = random_vector(d, 16) * 0.3;
  const Vector nb = random_vector(1, 17);
  const double base = block_log_ratio(*post, w, z, 2, nb);
  for (unsigned k = 0; k < 10; ++k) {
    Vector moved = z;
    for (int j : {0, 1, 3, 4, 5}) moved[j] += random_vector(1, 40 + k * 7 + j)[0];
    EXPECT_EQ(block_log_ratio(*post, w, moved, 2, nb), base);
  }
}

TEST(BlockSweep, DenseSingleBlockEqualsPlainChain) {
  Vector mu(2);
  mu << 1, 2;
  Matrix s(2, 2);
  s << 1, 1.8, 1.8, 4;
  auto target = make_mvn(mu, s);
  auto moments = std::make_shared<const MomentEstimate>(MomentEstimate::from_moments(mu, s));
  const WhiteningMap w = dense_whitening(*moments, BlockPartition({2}));
  Vector start(2);
  start << -3, 6;
  for (KernelKind kind : {KernelKind::RW, KernelKind::Mirror, KernelKind::MALA, KernelKind::MirrorMALA}) {
    const double eps = 0.6;
    KernelConfig plain = make_kernel(kind, eps, moments);
    KernelConfig unit = make_kernel(kind, eps, nullptr);
    RandomStream a(21), b(21);
    ChainState st = init_chain(plain, *target, start);
    BlockSampler sampler(as_block_target(target), w, mu, {unit}, false, start);
    for (int t = 0; t < 2000; ++t) {
      const StepOutcome o = mh_step(plain, st, *target, a);
      const auto& out = sampler.sweep(b);
      ASSERT_EQ(o.accepted, out[0].accepted) << to_string(kind) << " step " << t;
      ASSERT_NEAR(o.alpha, out[0].alpha, 1e-9);
      ASSERT_LT((st.position - sampler.theta()).cwiseAbs().maxCoeff(), 1e-9) << to_string(kind);
    }
  }
}

TEST(BlockSweep, SparseEvaluationCount) {
  auto post = make_glmm_posterior(poisson_spec(20, 4, 18));
  const auto d = static_cast<int>(post->dimension());
  const std::size_t obs = post->spec().observation_count();
  const MomentEstimate m = MomentEstimate::from_moments(Vector::Zero(d), Matrix::Identity(d, d) * 0.1);
  const WhiteningMap w = sparse_whitening(m, post->partition());
  std::vector<KernelConfig> kernels(21, make_kernel(KernelKind::Mirror, 0.5));
  for (bool componentwise : {false, true}) {
    BlockSampler sampler(post, w, Vector::Zero(d), kernels, componentwise, Vector::Zero(d));
    RandomStream rng(19);
    for (int sweep = 0; sweep < 3; ++sweep) {
      post->reset_evaluations();
      sampler.sweep(rng);
      const std::size_t global_units = componentwise ? 3 : 1;  // beta (2) and zeta (1)
      EXPECT_EQ(post->evaluations(), obs + global_units * obs);
    }
  }
}

TEST(BlockSweep, CachedDensityStaysConsistent) {
  auto post = make_glmm_posterior(poisson_spec(8, 4, 22));
  const auto d = static_cast<int>(post->dimension());
  const MomentEstimate m = MomentEstimate::from_moments(Vector::Zero(d), Matrix::Identity(d, d) * 0.2);
  for (WhiteningMode mode : {WhiteningMode::Dense, WhiteningMode::Sparse}) {
    const WhiteningMap w = mode == WhiteningMode::Dense ? dense_whitening(m, post->partition())
                                                        : sparse_whitening(m, post->partition());
    for (KernelKind kind : {KernelKind::Mirror, KernelKind::MirrorMALA, KernelKind::MALA}) {
      std::vector<KernelConfig> kernels(9, make_kernel(kind, 0.5));
      BlockSampler sampler(post, w, Vector::Zero(d), kernels, true, Vector::Zero(d));
      RandomStream rng(23);
      for (int t = 0; t < 50; ++t) sampler.sweep(rng);
      EXPECT_NEAR(sampler.current_log_density(), post->log_density(sampler.theta()), 1e-8);
      EXPECT_LT((sampler.theta() - w.inverse(sampler.z())).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(BlockSweep, FreeFunctionSweep) {
  auto post = make_glmm_posterior(poisson_spec(3, 2, 24));
  const auto d = static_cast<int>(post->dimension());
  const MomentEstimate m = MomentEstimate::from_moments(Vector::Zero(d), Matrix::Identity(d, d) * 0.1);
  const WhiteningMap w = sparse_whitening(m, post->partition());
  std::vector<KernelConfig> kernels(4, make_kernel(KernelKind::RW, 0.3));
  RandomStream rng(25);
  const auto [z, outcomes] = block_mh_sweep(Vector::Zero(d), w, Vector::Zero(d), kernels, post, rng);
  EXPECT_EQ(outcomes.size(), 4u);
  EXPECT_EQ(z.size(), d);
  EXPECT_THROW(block_mh_sweep(Vector::Zero(d), w, Vector::Zero(d), {kernels[0]}, post, rng), InvalidArgument);
}
