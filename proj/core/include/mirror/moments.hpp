#pragma once

#include <cstddef>

#include "mirror/linalg.hpp"

namespace mirror {

// Estimated location and scale of a target: mu*, Sigma* and its lower
// Cholesky factor (the "square root" used by every preconditioned kernel).
struct MomentEstimate {
  Vector mu_star;
  Matrix sigma_star;
  Matrix chol_lower;
  std::size_t sample_count = 0;

  std::size_t dimension() const { return static_cast<std::size_t>(mu_star.size()); }

  // Symmetrizes and regularizes `sigma` before factorizing.
  static MomentEstimate from_moments(Vector mu, const Matrix& sigma, std::size_t sample_count = 0);

  // Sample mean and covariance (n - 1 denominator) of the rows of `draws`.
  // Throws SingularCovariance if the regularized covariance is singular.
  static MomentEstimate from_samples(const Matrix& draws);

  static MomentEstimate identity(std::size_t dim);
};

}  // namespace mirror
