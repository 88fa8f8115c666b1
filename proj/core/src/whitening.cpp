#include "mirror/whitening.hpp"

#include <chrono>
#include <cmath>

#include "mirror/errors.hpp"

namespace mirror {

namespace {

using Idx = Eigen::Index;

Idx ix(std::size_t v) { return static_cast<Idx>(v); }

class PlainBlockTarget final : public BlockTarget {
 public:
  explicit PlainBlockTarget(TargetPtr target)
      : target_(std::move(target)), partition_({target_->dimension()}) {}

  std::size_t dimension() const override { return target_->dimension(); }
  std::string name() const override { return target_->name(); }
  double log_density(const Vector& x) const override { return target_->log_density(x); }
  double log_density_gradient(const Vector& x, Vector& grad) const override {
    return target_->log_density_gradient(x, grad);
  }
  bool has_back_transform() const override { return target_->has_back_transform(); }
  void back_transform(const Vector& x, Vector& out) const override { target_->back_transform(x, out); }

  const BlockPartition& partition() const override { return partition_; }
  double local_log_density(std::size_t, const Vector&) const override {
    throw InvalidArgument("target has no subject blocks");
  }
  double local_log_density_gradient(std::size_t, const Vector&, Vector&) const override {
    throw InvalidArgument("target has no subject blocks");
  }
  double global_log_density(const Vector& x) const override { return target_->log_density(x); }
  double log_density_terms(const Vector& x, std::vector<double>& locals) const override {
    locals.clear();
    return target_->log_density(x);
  }
  double log_density_gradient_terms(const Vector& x, Vector& grad,
                                    std::vector<double>& locals) const override {
    locals.clear();
    return target_->log_density_gradient(x, grad);
  }

 private:
  TargetPtr target_;
  BlockPartition partition_;
};

void check_partition(const BlockPartition& partition, std::size_t dim) {
  if (partition.num_blocks() == 0) throw InvalidArgument("empty block partition");
  if (partition.dimension() != dim) {
    throw DimensionMismatch("partition covers " + std::to_string(partition.dimension()) +
                            " coordinates, moments have " + std::to_string(dim));
  }
}

// Validates the arrow pattern of an upper-triangular R.
void check_arrow(const Matrix& r, const BlockPartition& p) {
  const std::size_t n = p.num_blocks() - 1;
  const Idx d = r.rows();
  for (Idx i = 0; i < d; ++i) {
    if (!(r(i, i) > 0.0) || !std::isfinite(r(i, i))) {
      throw PatternViolation("R has a non-positive diagonal entry at " + std::to_string(i));
    }
    for (Idx j = 0; j < i; ++j) {
      if (r(i, j) != 0.0) throw PatternViolation("R is not upper triangular");
    }
  }
  for (std::size_t bi = 0; bi < n; ++bi) {
    for (std::size_t bj = bi + 1; bj < n; ++bj) {
      if (!r.block(ix(p.offset(bi)), ix(p.offset(bj)), ix(p.size(bi)), ix(p.size(bj))).isZero(0.0)) {
        throw PatternViolation("R couples subject blocks " + std::to_string(bi) + " and " +
                               std::to_string(bj));
      }
    }
  }
}

}  // namespace

double BlockTarget::log_density_gradient_terms(const Vector& theta, Vector& grad,
                                               std::vector<double>& locals) const {
  log_density_gradient(theta, grad);
  return log_density_terms(theta, locals);
}

std::shared_ptr<const BlockTarget> as_block_target(TargetPtr target) {
  if (!target) throw InvalidArgument("null target");
  return std::make_shared<const PlainBlockTarget>(std::move(target));
}

WhiteningMap::WhiteningMap(WhiteningMode mode, Matrix factor, BlockPartition partition)
    : mode_(mode), factor_(std::move(factor)), partition_(std::move(partition)) {
  check_partition(partition_, static_cast<std::size_t>(factor_.rows()));
  if (factor_.rows() != factor_.cols()) throw DimensionMismatch("whitening factor is not square");
  const double log_det = log_abs_det_triangular(factor_);
  log_abs_det_forward_ = mode_ == WhiteningMode::Dense ? -log_det : log_det;
}

Vector WhiteningMap::forward(const Vector& theta) const {
  if (theta.size() != factor_.rows()) throw DimensionMismatch("whitening: wrong dimension");
  if (mode_ == WhiteningMode::Dense) return factor_.triangularView<Eigen::Lower>().solve(theta);
  return factor_.triangularView<Eigen::Upper>() * theta;
}

Vector WhiteningMap::inverse(const Vector& z) const {
  if (z.size() != factor_.rows()) throw DimensionMismatch("whitening: wrong dimension");
  if (mode_ == WhiteningMode::Dense) return factor_.triangularView<Eigen::Lower>() * z;
  // Global block first, then each subject block from its own coordinates
  // and the global block only.
  Vector theta(z.size());
  const std::size_t g = partition_.num_blocks() - 1;
  const Idx go = ix(partition_.offset(g));
  const Idx gs = ix(partition_.size(g));
  theta.segment(go, gs) =
      factor_.block(go, go, gs, gs).triangularView<Eigen::Upper>().solve(z.segment(go, gs));
  for (std::size_t b = 0; b < g; ++b) {
    const Idx o = ix(partition_.offset(b));
    const Idx s = ix(partition_.size(b));
    theta.segment(o, s) = factor_.block(o, o, s, s).triangularView<Eigen::Upper>().solve(
        z.segment(o, s) - factor_.block(o, go, s, gs) * theta.segment(go, gs));
  }
  return theta;
}

std::pair<std::size_t, std::size_t> WhiteningMap::affected_range(std::size_t block) const {
  const std::size_t d = partition_.dimension();
  if (mode_ == WhiteningMode::Dense) return {partition_.offset(block), d};
  if (block + 1 == partition_.num_blocks()) return {0, d};
  return {partition_.offset(block), partition_.offset(block) + partition_.size(block)};
}

void WhiteningMap::update_theta(std::size_t block, const Vector& z, const Vector& old_block,
                                Vector& theta) const {
  const Idx o = ix(partition_.offset(block));
  const Idx s = ix(partition_.size(block));
  const Idx d = factor_.rows();
  if (mode_ == WhiteningMode::Dense) {
    // theta = C z; only rows at or below the block see the change
    theta.tail(d - o).noalias() += factor_.block(o, o, d - o, s) * (z.segment(o, s) - old_block);
    return;
  }
  const std::size_t g = partition_.num_blocks() - 1;
  const Idx go = ix(partition_.offset(g));
  const Idx gs = ix(partition_.size(g));
  if (block != g) {
    theta.segment(o, s) = factor_.block(o, o, s, s).triangularView<Eigen::Upper>().solve(
        z.segment(o, s) - factor_.block(o, go, s, gs) * theta.segment(go, gs));
    return;
  }
  theta = inverse(z);
}

Vector WhiteningMap::pullback(const Vector& grad_theta) const {
  if (mode_ == WhiteningMode::Dense) {
    return factor_.transpose().triangularView<Eigen::Upper>() * grad_theta;
  }
  return factor_.transpose().triangularView<Eigen::Lower>().solve(grad_theta);
}

Vector WhiteningMap::pullback_local(std::size_t block, const Vector& grad_block) const {
  if (mode_ != WhiteningMode::Sparse || block + 1 >= partition_.num_blocks()) {
    throw InvalidArgument("pullback_local applies to subject blocks of a sparse map");
  }
  const Idx o = ix(partition_.offset(block));
  const Idx s = ix(partition_.size(block));
  return factor_.block(o, o, s, s).transpose().triangularView<Eigen::Lower>().solve(grad_block);
}

double WhiteningMap::log_density_z(const TargetDensity& target, const Vector& z) const {
  return target.log_density(inverse(z)) - log_abs_det_forward_;
}

WhiteningMap dense_whitening(const MomentEstimate& moment, const BlockPartition& partition) {
  check_partition(partition, moment.dimension());
  return WhiteningMap(WhiteningMode::Dense, moment.chol_lower, partition);
}

WhiteningMap sparse_whitening(const MomentEstimate& moment, const BlockPartition& partition) {
  check_partition(partition, moment.dimension());
  Matrix l = cholesky_lower(invert_spd(moment.sigma_star));
  const std::size_t n = partition.num_blocks() - 1;
  for (std::size_t bi = 0; bi < n; ++bi) {
    for (std::size_t bj = 0; bj < bi; ++bj) {
      l.block(ix(partition.offset(bi)), ix(partition.offset(bj)), ix(partition.size(bi)),
              ix(partition.size(bj)))
          .setZero();
    }
  }
  Matrix r = l.transpose();
  check_arrow(r, partition);
  return WhiteningMap(WhiteningMode::Sparse, std::move(r), partition);
}

WhiteningMap sparse_whitening_from_factor(Matrix r, const BlockPartition& partition) {
  check_partition(partition, static_cast<std::size_t>(r.rows()));
  if (r.rows() != r.cols()) throw DimensionMismatch("R is not square");
  check_arrow(r, partition);
  return WhiteningMap(WhiteningMode::Sparse, std::move(r), partition);
}

double block_log_ratio(const BlockTarget& target, const WhiteningMap& map, const Vector& z,
                       std::size_t block, const Vector& new_block) {
  const BlockPartition& p = map.partition();
  if (block >= p.num_blocks()) throw InvalidArgument("block index out of range");
  if (static_cast<std::size_t>(new_block.size()) != p.size(block)) {
    throw DimensionMismatch("replacement block has the wrong size");
  }
  Vector z_new = z;
  z_new.segment(ix(p.offset(block)), new_block.size()) = new_block;
  const Vector theta = map.inverse(z);
  const Vector theta_new = map.inverse(z_new);
  if (map.mode() == WhiteningMode::Sparse && block + 1 < p.num_blocks()) {
    return target.local_log_density(block, theta_new) - target.local_log_density(block, theta);
  }
  return target.log_density(theta_new) - target.log_density(theta);
}

// Conditional target of one unit of a BlockSampler, in whitened
// coordinates. Evaluations temporarily write the point into the sampler's
// z and theta and restore them afterwards.
class UnitTarget final : public TargetDensity {
 public:
  void bind(BlockSampler* sampler, const BlockSampler::Unit* unit) {
    s_ = sampler;
    u_ = unit;
  }

  std::size_t dimension() const override { return u_->length; }
  std::string name() const override { return "block unit"; }

  double log_density(const Vector& y) const override { return evaluate(y, nullptr); }
  double log_density_gradient(const Vector& y, Vector& grad) const override {
    return evaluate(y, &grad);
  }

  // Locals recorded at `point` by a full evaluation, if still cached.
  const std::vector<double>* stashed(const Vector& point) const {
    for (const Slot& slot : slots_) {
      if (slot.used && slot.point.size() == point.size() && slot.point == point) return &slot.locals;
    }
    return nullptr;
  }

  void clear() {
    for (Slot& slot : slots_) slot.used = false;
  }

 private:
  struct Slot {
    Vector point;
    std::vector<double> locals;
    bool used = false;
  };

  double evaluate(const Vector& y, Vector* grad) const {
    BlockSampler& s = *s_;
    const BlockSampler::Unit& u = *u_;
    const BlockPartition& p = s.map_.partition();
    const Idx bo = ix(p.offset(u.block));
    const Idx bs = ix(p.size(u.block));
    const auto [tb, te] = s.map_.affected_range(u.block);

    old_block_ = s.z_.segment(bo, bs);
    saved_theta_ = s.theta_.segment(ix(tb), ix(te - tb));
    s.z_.segment(ix(u.begin), ix(u.length)) = y;
    s.map_.update_theta(u.block, s.z_, old_block_, s.theta_);

    double value = 0.0;
    if (u.local) {
      if (grad) {
        value = s.target_->local_log_density_gradient(u.block, s.theta_, grad_theta_);
        *grad = s.map_.pullback_local(u.block, grad_theta_);
      } else {
        value = s.target_->local_log_density(u.block, s.theta_);
      }
    } else {
      Slot& slot = slots_[next_];
      next_ = 1 - next_;
      if (grad) {
        value = s.target_->log_density_gradient_terms(s.theta_, grad_theta_, slot.locals);
        *grad = s.map_.pullback(grad_theta_).segment(ix(u.begin), ix(u.length));
      } else {
        value = s.target_->log_density_terms(s.theta_, slot.locals);
      }
      slot.point = y;
      slot.used = true;
    }

    s.z_.segment(bo, bs) = old_block_;
    s.theta_.segment(ix(tb), ix(te - tb)) = saved_theta_;
    return value;
  }

  BlockSampler* s_ = nullptr;
  const BlockSampler::Unit* u_ = nullptr;
  mutable Slot slots_[2];
  mutable int next_ = 0;
  mutable Vector old_block_;
  mutable Vector saved_theta_;
  mutable Vector grad_theta_;
};

BlockSampler::BlockSampler(std::shared_ptr<const BlockTarget> target, WhiteningMap map,
                           const Vector& mu_star, std::vector<KernelConfig> per_block_kernels,
                           bool global_componentwise, const Vector& theta0)
    : target_(std::move(target)),
      map_(std::move(map)),
      kernels_(std::move(per_block_kernels)),
      unit_target_(std::make_unique<UnitTarget>()) {
  if (!target_) throw InvalidArgument("null block target");
  const BlockPartition& p = map_.partition();
  if (target_->partition().sizes() != p.sizes()) {
    throw DimensionMismatch("target partition does not match the whitening partition");
  }
  if (kernels_.size() != p.num_blocks()) {
    throw InvalidArgument("need one kernel per block (" + std::to_string(p.num_blocks()) + "), got " +
                          std::to_string(kernels_.size()));
  }
  if (static_cast<std::size_t>(mu_star.size()) != p.dimension() ||
      static_cast<std::size_t>(theta0.size()) != p.dimension()) {
    throw DimensionMismatch("mu* or the start point has the wrong dimension");
  }
  mu_z_ = map_.forward(mu_star);
  theta_ = theta0;
  z_ = map_.forward(theta0);
  // keep theta exactly consistent with z
  theta_ = map_.inverse(z_);

  const std::size_t g = p.num_blocks() - 1;
  for (std::size_t b = 0; b < p.num_blocks(); ++b) {
    const bool split = b == g && global_componentwise;
    const std::size_t pieces = split ? p.size(b) : 1;
    const std::size_t len = split ? 1 : p.size(b);
    for (std::size_t k = 0; k < pieces; ++k) {
      Unit u;
      u.block = b;
      u.begin = p.offset(b) + k * len;
      u.length = len;
      u.local = map_.mode() == WhiteningMode::Sparse && b < g;
      u.kernel = kernels_[b];
      u.kernel.preconditioner = nullptr;
      u.kernel.mirror_centre = mu_z_.segment(ix(u.begin), ix(len));
      u.kernel.validate(len);
      units_.push_back(std::move(u));
    }
  }
  last_.resize(units_.size());

  full_ = target_->log_density_terms(theta_, locals_);
  global_ = target_->global_log_density(theta_);
}

BlockSampler::~BlockSampler() = default;
BlockSampler::BlockSampler(BlockSampler&&) noexcept = default;
BlockSampler& BlockSampler::operator=(BlockSampler&&) noexcept = default;

double BlockSampler::sum_locals() const {
  double sum = 0.0;
  for (double v : locals_) sum += v;
  return sum;
}

double BlockSampler::current_log_density() const { return full_; }

void BlockSampler::commit(const Unit& u, const Vector& position, double log_density) {
  const BlockPartition& p = map_.partition();
  const Vector old_block = z_.segment(ix(p.offset(u.block)), ix(p.size(u.block)));
  z_.segment(ix(u.begin), ix(u.length)) = position;
  map_.update_theta(u.block, z_, old_block, theta_);
  if (u.local) {
    locals_[u.block] = log_density;
    full_ = sum_locals() + global_;
    return;
  }
  if (const std::vector<double>* locals = unit_target_->stashed(position)) {
    locals_ = *locals;
    global_ = target_->global_log_density(theta_);
    full_ = log_density;
  } else {
    full_ = target_->log_density_terms(theta_, locals_);
    global_ = target_->global_log_density(theta_);
  }
}

const std::vector<BlockUpdate>& BlockSampler::sweep(RandomStream& rng) {
  UnitTarget& ut = *unit_target_;
  ChainState st;
  for (std::size_t k = 0; k < units_.size(); ++k) {
    const Unit& u = units_[k];
    ut.bind(this, &u);
    ut.clear();
    st.position = z_.segment(ix(u.begin), ix(u.length));
    st.log_density = u.local ? locals_[u.block] : full_;
    st.has_gradient = false;
    if (u.kernel.base == BaseKernel::Langevin) {
      ut.log_density_gradient(drift_point(u.kernel, st.position), st.drift_gradient);
      if (!st.drift_gradient.allFinite()) {
        throw NonFiniteGradient("block gradient is not finite at the drift point");
      }
      st.has_gradient = true;
    }
    const StepOutcome out = mh_step(u.kernel, st, ut, rng);
    last_[k] = {out.alpha, out.accepted};
    if (out.accepted) commit(u, st.position, st.log_density);
  }
  return last_;
}

BlockChainRecord run_block_sampler(BlockSampler& sampler, std::size_t sweeps, RandomStream& rng) {
  BlockChainRecord rec;
  const Idx d = sampler.theta().size();
  rec.samples.resize(ix(sweeps), d);
  rec.unit_mean_alpha.assign(sampler.unit_count(), 0.0);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t t = 0; t < sweeps; ++t) {
    const auto& outcomes = sampler.sweep(rng);
    for (std::size_t k = 0; k < outcomes.size(); ++k) rec.unit_mean_alpha[k] += outcomes[k].alpha;
    rec.samples.row(ix(t)) = sampler.theta().transpose();
  }
  const auto t1 = std::chrono::steady_clock::now();
  rec.seconds = std::chrono::duration<double>(t1 - t0).count();
  double total = 0.0;
  for (double& a : rec.unit_mean_alpha) {
    a = sweeps ? a / static_cast<double>(sweeps) : 0.0;
    total += a;
  }
  rec.mean_alpha = rec.unit_mean_alpha.empty() ? 0.0 : total / static_cast<double>(rec.unit_mean_alpha.size());
  return rec;
}

std::pair<Vector, std::vector<BlockUpdate>> block_mh_sweep(
    const Vector& z, const WhiteningMap& map, const Vector& mu_star,
    const std::vector<KernelConfig>& per_block_kernels, std::shared_ptr<const BlockTarget> target,
    RandomStream& rng, bool global_componentwise) {
  BlockSampler sampler(std::move(target), map, mu_star, per_block_kernels, global_componentwise,
                       map.inverse(z));
  std::vector<BlockUpdate> outcomes = sampler.sweep(rng);
  return {sampler.z(), std::move(outcomes)};
}

}  // namespace mirror
