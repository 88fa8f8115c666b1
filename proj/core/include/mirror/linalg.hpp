#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace mirror {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Sizes of the consecutive blocks of a parameter vector. For the GLMM
// samplers the first blocks are the per-subject random effects and the
// final block holds the global parameters.
class BlockPartition {
 public:
  BlockPartition() = default;
  explicit BlockPartition(std::vector<std::size_t> sizes);

  std::size_t num_blocks() const { return sizes_.size(); }
  std::size_t dimension() const { return offsets_.empty() ? 0 : offsets_.back(); }
  std::size_t size(std::size_t block) const { return sizes_.at(block); }
  std::size_t offset(std::size_t block) const { return offsets_.at(block); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  // Index of the block containing coordinate `index`.
  std::size_t block_of(std::size_t index) const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;  // offsets_[i] = start of block i; last entry = dimension
};

// Averages A and A^T. Input must be square.
Matrix symmetrize(const Matrix& a);

// Adds 1e-10 * trace / d to the diagonal.
Matrix regularize_covariance(const Matrix& sigma);

// Lower Cholesky factor with a strictly positive diagonal.
// Throws NotSymmetric when |a_ij - a_ji| > 1e-10 * max|a|, and
// NotPositiveDefinite with the failing pivot otherwise.
Matrix cholesky_lower(const Matrix& sigma);

Matrix invert_spd(const Matrix& sigma);

// Triangular solves; only the relevant triangle of the matrix is read.
Vector solve_lower(const Matrix& lower, const Vector& b);
Vector solve_upper(const Matrix& upper, const Vector& b);

// log|det| of a triangular matrix.
double log_abs_det_triangular(const Matrix& t);

}  // namespace mirror
