#include "mirror/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "mirror/errors.hpp"

namespace mirror {

BurninPlan default_burnin(std::size_t dimension) {
  if (dimension <= 2) return {500, 500};
  if (dimension <= 10) return {10000, 10000};
  return {300000, 50000};
}

BurninResult run_burnin(const TargetDensity& target, const BurninOptions& options, RandomStream& rng) {
  const std::size_t d = target.dimension();
  const std::size_t b = options.iterations;
  const std::size_t seg = options.update_every;
  if (b < 100) throw InvalidArgument("burn-in needs at least 100 iterations");
  if (seg == 0 || seg > b || b % seg != 0) {
    throw InvalidArgument("update_every must divide the burn-in length");
  }
  if (seg < d + 1) throw SingularCovariance("burn-in segment shorter than d + 1 draws");

  Vector start = options.start.size() ? options.start : Vector::Zero(static_cast<Eigen::Index>(d));
  KernelConfig rw = make_kernel(KernelKind::RW, options.rw_epsilon0);
  ChainState state = init_chain(rw, target, std::move(start));

  Matrix segment(static_cast<Eigen::Index>(seg), static_cast<Eigen::Index>(d));
  std::shared_ptr<const MomentEstimate> current;
  double alpha_total = 0.0;
  const std::size_t segments = b / seg;
  for (std::size_t s = 0; s < segments; ++s) {
    const bool adapt = s == 0 && options.adapt_first_segment;
    double log_eps = std::log(rw.epsilon);
    for (std::size_t t = 0; t < seg; ++t) {
      const double alpha = mh_step(rw, state, target, rng).alpha;
      alpha_total += alpha;
      if (adapt) {
        log_eps += std::pow(static_cast<double>(t + 1), -0.6) * (alpha - kRwTargetPjump);
        rw.epsilon = std::exp(log_eps);
      }
      segment.row(static_cast<Eigen::Index>(t)) = state.position.transpose();
    }
    const bool last = s + 1 == segments;
    if (last) {
      BurninResult out;
      out.moments = MomentEstimate::from_samples(segment);
      out.last_position = state.position;
      out.mean_alpha = alpha_total / static_cast<double>(b);
      return out;
    }
    try {
      current = std::make_shared<const MomentEstimate>(MomentEstimate::from_samples(segment));
    } catch (const SingularCovariance&) {
      // keep the previous preconditioner when a segment did not move
    }
    if (current) {
      rw = make_kernel(KernelKind::RW, 2.38 / std::sqrt(static_cast<double>(d)), current);
      state = init_chain(rw, target, state.position);
    }
  }
  throw InvalidArgument("unreachable: burn-in has no segments");
}

TuningResult tune_epsilon(const KernelConfig& kernel, const TargetDensity& target,
                          double target_pjump, const Vector& start, RandomStream& rng,
                          const TuningOptions& options) {
  if (!(target_pjump > 0.0 && target_pjump < 1.0)) {
    throw InvalidArgument("target P_jump must lie in (0, 1)");
  }
  if (!(options.initial_epsilon > 0.0)) throw NonPositiveEpsilon("initial epsilon must be positive");
  if (options.budget < 16) throw InvalidArgument("tuning budget too small");

  KernelConfig k = kernel;
  k.epsilon = options.initial_epsilon;
  ChainState state = init_chain(k, target, start);

  double log_eps = std::log(options.initial_epsilon);
  std::size_t t = 0;

  auto adapt = [&](std::size_t window) {
    double avg = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < window; ++i) {
      k.epsilon = std::exp(log_eps);
      const double alpha = mh_step(k, state, target, rng).alpha;
      ++t;
      log_eps += std::pow(static_cast<double>(t), -0.6) * (alpha - target_pjump);
      log_eps = std::clamp(log_eps, -20.0, 20.0);
      if (i >= window / 2) {
        avg += log_eps;
        ++counted;
      }
    }
    log_eps = avg / static_cast<double>(counted);
  };
  auto verify = [&](std::size_t window) {
    k.epsilon = std::exp(log_eps);
    double sum = 0.0;
    for (std::size_t i = 0; i < window; ++i) sum += mh_step(k, state, target, rng).alpha;
    return sum / static_cast<double>(window);
  };

  const std::size_t b = options.budget;
  const std::size_t rounds[2][2] = {{b / 2, b / 4}, {b / 8, b - b / 2 - b / 4 - b / 8}};
  double pjump = 0.0;
  for (const auto& round : rounds) {
    adapt(round[0]);
    pjump = verify(round[1]);
    if (std::abs(pjump - target_pjump) <= options.tolerance) {
      TuningResult out;
      out.epsilon = std::exp(log_eps);
      out.pjump = pjump;
      out.last_position = state.position;
      return out;
    }
  }
  throw TuningFailed("epsilon tuning reached P_jump " + std::to_string(pjump) + " for target " +
                     std::to_string(target_pjump));
}

}  // namespace mirror
