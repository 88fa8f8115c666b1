#include "mirror/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mirror/errors.hpp"

namespace mirror {

BlockPartition::BlockPartition(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  offsets_.reserve(sizes_.size() + 1);
  offsets_.push_back(0);
  for (std::size_t s : sizes_) {
    if (s == 0) throw DimensionMismatch("block sizes must be at least 1");
    offsets_.push_back(offsets_.back() + s);
  }
}

std::size_t BlockPartition::block_of(std::size_t index) const {
  if (index >= dimension()) throw DimensionMismatch("coordinate outside partition");
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
  return static_cast<std::size_t>(it - offsets_.begin()) - 1;
}

Matrix symmetrize(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("symmetrize: matrix is not square");
  return 0.5 * (a + a.transpose());
}

Matrix regularize_covariance(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols()) throw DimensionMismatch("covariance is not square");
  Matrix out = sigma;
  if (sigma.rows() == 0) return out;
  const double jitter = 1e-10 * sigma.trace() / static_cast<double>(sigma.rows());
  out.diagonal().array() += jitter;
  return out;
}

Matrix cholesky_lower(const Matrix& sigma) {
  const Eigen::Index n = sigma.rows();
  if (sigma.cols() != n) throw DimensionMismatch("cholesky_lower: matrix is not square");
  if (!sigma.allFinite()) throw NotPositiveDefinite(0);
  const double scale = n > 0 ? sigma.cwiseAbs().maxCoeff() : 0.0;
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw NotSymmetric("cholesky_lower: matrix is not symmetric");
  }
  const Matrix a = symmetrize(sigma);

  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > 0.0)) throw NotPositiveDefinite(static_cast<std::size_t>(j));
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / d;
    }
  }
  return l;
}

Matrix invert_spd(const Matrix& sigma) {
  const Matrix l = cholesky_lower(sigma);
  const Eigen::Index n = l.rows();
  // Sigma^-1 = L^-T L^-1
  Matrix linv = Matrix::Identity(n, n);
  l.triangularView<Eigen::Lower>().solveInPlace(linv);
  Matrix omega = linv.transpose() * linv;
  return symmetrize(omega);
}

namespace {

void check_triangular_input(const Matrix& t, const Vector& b) {
  if (t.rows() != t.cols()) throw DimensionMismatch("triangular solve: matrix is not square");
  if (t.rows() != b.size()) throw DimensionMismatch("triangular solve: size mismatch");
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    if (t(i, i) == 0.0 || !std::isfinite(t(i, i))) {
      throw SingularTriangular("triangular solve: zero diagonal at " + std::to_string(i));
    }
  }
}

}  // namespace

Vector solve_lower(const Matrix& lower, const Vector& b) {
  check_triangular_input(lower, b);
  return lower.triangularView<Eigen::Lower>().solve(b);
}

Vector solve_upper(const Matrix& upper, const Vector& b) {
  check_triangular_input(upper, b);
  return upper.triangularView<Eigen::Upper>().solve(b);
}

double log_abs_det_triangular(const Matrix& t) {
  return t.diagonal().array().abs().log().sum();
}

}  // namespace mirror
