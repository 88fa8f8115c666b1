#pragma once

#include <cstddef>

#include "mirror/kernels.hpp"

namespace mirror {

struct ChainRecord {
  // One row per iteration, in the reported (back-transformed) coordinates.
  Matrix samples;
  double mean_alpha = 0.0;
  double accept_rate = 0.0;
  double seconds = 0.0;
  ChainState final_state;
};

// Runs `iterations` MH transitions from `start` and records every state.
// `seconds` covers the transitions only.
ChainRecord run_chain(const KernelConfig& kernel, const TargetDensity& target, Vector start,
                      std::size_t iterations, RandomStream& rng);

}  // namespace mirror
