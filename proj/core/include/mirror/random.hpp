#pragma once

#include <cstdint>
#include <random>

#include "mirror/linalg.hpp"

namespace mirror {

// Engine plus the two distributions every sampler needs. One stream per
// chain; streams are never shared between threads.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  // Independent stream `index` derived from a master seed.
  static RandomStream derive(std::uint64_t master, std::uint64_t index);

  double gaussian() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  void fill_gaussian(Vector& z) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal_(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// SplitMix64 finalizer; used to turn (seed, tag) pairs into stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

inline RandomStream RandomStream::derive(std::uint64_t master, std::uint64_t index) {
  return RandomStream(mix_seed(master, index));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace mirror
