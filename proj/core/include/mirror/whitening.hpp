#pragma once

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "mirror/kernels.hpp"
#include "mirror/linalg.hpp"
#include "mirror/moments.hpp"
#include "mirror/random.hpp"
#include "mirror/targets.hpp"

namespace mirror {

// A target whose parameters split into per-subject blocks followed by one
// global block (the last block of partition()). The log density factorizes
// as sum_i local_i(theta_i, global) + global_log_density(global).
class BlockTarget : public TargetDensity {
 public:
  virtual const BlockPartition& partition() const = 0;
  std::size_t subject_count() const { return partition().num_blocks() - 1; }

  virtual double local_log_density(std::size_t subject, const Vector& theta) const = 0;
  // Also writes the gradient with respect to the subject's own block.
  virtual double local_log_density_gradient(std::size_t subject, const Vector& theta,
                                            Vector& grad_block) const = 0;
  // Terms that involve the global block only (priors).
  virtual double global_log_density(const Vector& theta) const = 0;

  // Full log density; `locals` receives every subject's local term. The
  // total is the global term plus the locals summed in subject order.
  virtual double log_density_terms(const Vector& theta, std::vector<double>& locals) const = 0;
  virtual double log_density_gradient_terms(const Vector& theta, Vector& grad,
                                            std::vector<double>& locals) const;
};

// Wraps a plain target as a block target with no subjects: the single
// global block covers every coordinate.
std::shared_ptr<const BlockTarget> as_block_target(TargetPtr target);

enum class WhiteningMode { Dense, Sparse };

// Linear reparameterization z = A theta.
//   Dense:  A = C^-1 with C = chol(Sigma*), applied by triangular solve.
//   Sparse: A = R, the upper-triangular arrow-pattern factor of the
//           precision; theta = R^-1 z is applied by block solves.
class WhiteningMap {
 public:
  WhiteningMap(WhiteningMode mode, Matrix factor, BlockPartition partition);

  WhiteningMode mode() const { return mode_; }
  const BlockPartition& partition() const { return partition_; }
  // C (lower) in dense mode, R (upper) in sparse mode.
  const Matrix& factor() const { return factor_; }
  std::size_t dimension() const { return partition_.dimension(); }

  // log |det A|: -log|det C| or log|det R|.
  double log_abs_det_forward() const { return log_abs_det_forward_; }

  Vector forward(const Vector& theta) const;
  Vector inverse(const Vector& z) const;

  // Range [begin, end) of theta entries that depend on block `block` of z.
  std::pair<std::size_t, std::size_t> affected_range(std::size_t block) const;

  // Brings theta in line with z after block `block` of z changed from
  // `old_block` to its current value.
  void update_theta(std::size_t block, const Vector& z, const Vector& old_block,
                    Vector& theta) const;

  // Gradient with respect to z from the gradient with respect to theta.
  Vector pullback(const Vector& grad_theta) const;
  // Sparse mode, subject block: gradient of a term that depends on theta
  // only through theta_i (with the global block fixed).
  Vector pullback_local(std::size_t block, const Vector& grad_block) const;

  // log pi_z(z) = log pi(theta(z)) - log|det A|.
  double log_density_z(const TargetDensity& target, const Vector& z) const;

 private:
  WhiteningMode mode_;
  Matrix factor_;
  BlockPartition partition_;
  double log_abs_det_forward_ = 0.0;
};

WhiteningMap dense_whitening(const MomentEstimate& moment, const BlockPartition& partition);

// Cholesky of the precision with the (i, j) subject-subject blocks, i != j,
// zeroed; the global block must be last. Throws PatternViolation if a
// diagonal entry of R is not positive.
WhiteningMap sparse_whitening(const MomentEstimate& moment, const BlockPartition& partition);

// Uses an externally estimated R. Throws PatternViolation if R is not
// upper triangular with the arrow pattern and a positive diagonal.
WhiteningMap sparse_whitening_from_factor(Matrix r, const BlockPartition& partition);

struct BlockUpdate {
  double alpha = 0.0;
  bool accepted = false;
};

// Log acceptance ratio (target part only) of replacing block `block` of z by
// `new_block`. In sparse mode a subject block uses only that subject's
// local term; otherwise the full posterior difference is used.
double block_log_ratio(const BlockTarget& target, const WhiteningMap& map, const Vector& z,
                       std::size_t block, const Vector& new_block);

class UnitTarget;

// Sequential block Metropolis-Hastings in whitened coordinates. Each unit
// is a block (or one coordinate of the global block when
// global_componentwise is set) updated with the kernel of its block; the
// kernels run with an identity preconditioner and reflect through the
// whitened centre A mu*.
class BlockSampler {
 public:
  BlockSampler(std::shared_ptr<const BlockTarget> target, WhiteningMap map, const Vector& mu_star,
               std::vector<KernelConfig> per_block_kernels, bool global_componentwise,
               const Vector& theta0);
  ~BlockSampler();
  BlockSampler(BlockSampler&&) noexcept;
  BlockSampler& operator=(BlockSampler&&) noexcept;

  // One pass over all units in order; returns (alpha, accepted) per unit.
  const std::vector<BlockUpdate>& sweep(RandomStream& rng);

  const Vector& theta() const { return theta_; }
  const Vector& z() const { return z_; }
  std::size_t unit_count() const { return units_.size(); }
  // Block index of each unit.
  std::size_t unit_block(std::size_t unit) const { return units_[unit].block; }
  double current_log_density() const;
  const WhiteningMap& map() const { return map_; }

 private:
  friend class UnitTarget;
  struct Unit {
    std::size_t block;
    std::size_t begin;  // range in z
    std::size_t length;
    bool local;
    KernelConfig kernel;  // identity scale, centre set to the unit's part of A mu*
  };

  // Writes an accepted unit position into z and theta and refreshes the
  // cached log-density terms.
  void commit(const Unit& unit, const Vector& position, double log_density);
  double sum_locals() const;

  std::shared_ptr<const BlockTarget> target_;
  WhiteningMap map_;
  Vector mu_z_;
  std::vector<KernelConfig> kernels_;
  std::vector<Unit> units_;
  Vector z_;
  Vector theta_;
  std::vector<double> locals_;
  double global_ = 0.0;
  double full_ = 0.0;
  std::vector<BlockUpdate> last_;
  std::unique_ptr<UnitTarget> unit_target_;
};

struct BlockChainRecord {
  Matrix samples;  // T x d in theta coordinates
  std::vector<double> unit_mean_alpha;
  double mean_alpha = 0.0;  // averaged over units and sweeps
  double seconds = 0.0;
};

BlockChainRecord run_block_sampler(BlockSampler& sampler, std::size_t sweeps, RandomStream& rng);

// Single sweep on a fresh sampler built from (z, map, kernels); returns
// the updated z and the per-unit outcomes.
std::pair<Vector, std::vector<BlockUpdate>> block_mh_sweep(
    const Vector& z, const WhiteningMap& map, const Vector& mu_star,
    const std::vector<KernelConfig>& per_block_kernels,
    std::shared_ptr<const BlockTarget> target, RandomStream& rng,
    bool global_componentwise = false);

}  // namespace mirror
