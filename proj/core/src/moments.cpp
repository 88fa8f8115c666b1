#include "mirror/moments.hpp"

#include "mirror/errors.hpp"

namespace mirror {

MomentEstimate MomentEstimate::from_moments(Vector mu, const Matrix& sigma, std::size_t sample_count) {
  if (sigma.rows() != mu.size() || sigma.cols() != mu.size()) {
    throw DimensionMismatch("moment estimate: mean and covariance sizes differ");
  }
  MomentEstimate m;
  m.mu_star = std::move(mu);
  m.sigma_star = regularize_covariance(symmetrize(sigma));
  m.chol_lower = cholesky_lower(m.sigma_star);
  m.sample_count = sample_count;
  return m;
}

MomentEstimate MomentEstimate::from_samples(const Matrix& draws) {
  const Eigen::Index n = draws.rows();
  if (n < 2) throw SingularCovariance("need at least two draws to estimate a covariance");
  Vector mu = draws.colwise().mean().transpose();
  Matrix centred = draws.rowwise() - mu.transpose();
  Matrix sigma = (centred.transpose() * centred) / static_cast<double>(n - 1);
  try {
    return from_moments(std::move(mu), sigma, static_cast<std::size_t>(n));
  } catch (const NotPositiveDefinite& e) {
    throw SingularCovariance(std::string("burn-in covariance is singular: ") + e.what());
  }
}

MomentEstimate MomentEstimate::identity(std::size_t dim) {
  MomentEstimate m;
  const auto d = static_cast<Eigen::Index>(dim);
  m.mu_star = Vector::Zero(d);
  m.sigma_star = Matrix::Identity(d, d);
  m.chol_lower = Matrix::Identity(d, d);
  return m;
}

}  // namespace mirror
