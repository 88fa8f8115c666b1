#pragma once

#include <cstddef>

#include "mirror/kernels.hpp"
#include "mirror/moments.hpp"

namespace mirror {

inline constexpr double kDefaultMirrorC = 1.0;
inline constexpr double kDefaultMirrorEpsilon = 0.5;
inline constexpr double kRwTargetPjump = 0.234;
inline constexpr double kMalaTargetPjump = 0.574;

struct BurninPlan {
  std::size_t iterations = 0;
  std::size_t update_every = 0;
};

// 500 for d <= 2, 1e4 for 3 <= d <= 10, otherwise 3e5 iterations with
// interim re-estimation every 5e4.
BurninPlan default_burnin(std::size_t dimension);

struct BurninOptions {
  std::size_t iterations = 500;
  // Segment length; equal to `iterations` for a single pass.
  std::size_t update_every = 500;
  // Scale of the first (unpreconditioned) RW segment.
  double rw_epsilon0 = 1.0;
  // Robbins-Monro on log eps towards P_jump 0.234 during the first segment,
  // starting from rw_epsilon0. For targets whose scales are far from 1.
  bool adapt_first_segment = false;
  Vector start;
};

struct BurninResult {
  MomentEstimate moments;
  // Last burn-in state, used to start the main chain.
  Vector last_position;
  // Mean acceptance probability over the whole burn-in.
  double mean_alpha = 0.0;
};

// Random-walk burn-in. The first segment uses an identity-scale RW with
// rw_epsilon0; after each segment mu* and Sigma* are re-estimated from that
// segment alone and the next segment runs a preconditioned RW with scale
// 2.38 / sqrt(d). The returned estimate comes from the last segment only.
BurninResult run_burnin(const TargetDensity& target, const BurninOptions& options, RandomStream& rng);

struct TuningOptions {
  double initial_epsilon = 1.0;
  std::size_t budget = 20000;
  double tolerance = 0.02;
};

struct TuningResult {
  double epsilon = 0.0;
  double pjump = 0.0;     // mean alpha over the final verification window
  Vector last_position;
};

// Robbins-Monro on log(eps): log eps += t^-0.6 (alpha_t - target), with the
// Polyak average of the second half of each adaptation window as the
// candidate, followed by a fixed-eps verification window. Throws
// TuningFailed if |P_jump - target| > tolerance once the budget is spent.
TuningResult tune_epsilon(const KernelConfig& kernel, const TargetDensity& target,
                          double target_pjump, const Vector& start, RandomStream& rng,
                          const TuningOptions& options = {});

}  // namespace mirror
