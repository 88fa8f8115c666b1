#include "mirror/chain.hpp"

#include <chrono>

namespace mirror {

ChainRecord run_chain(const KernelConfig& kernel, const TargetDensity& target, Vector start,
                      std::size_t iterations, RandomStream& rng) {
  ChainRecord rec;
  const auto d = static_cast<Eigen::Index>(target.dimension());
  rec.samples.resize(static_cast<Eigen::Index>(iterations), d);

  const auto t0 = std::chrono::steady_clock::now();
  ChainState state = init_chain(kernel, target, std::move(start));
  for (std::size_t t = 0; t < iterations; ++t) {
    mh_step(kernel, state, target, rng);
    rec.samples.row(static_cast<Eigen::Index>(t)) = state.position.transpose();
  }
  const auto t1 = std::chrono::steady_clock::now();
  rec.seconds = std::chrono::duration<double>(t1 - t0).count();

  if (target.has_back_transform()) {
    Vector raw(d);
    Vector out(d);
    for (Eigen::Index t = 0; t < rec.samples.rows(); ++t) {
      raw = rec.samples.row(t).transpose();
      target.back_transform(raw, out);
      rec.samples.row(t) = out.transpose();
    }
  }
  rec.mean_alpha = state.mean_alpha();
  rec.accept_rate = state.accept_rate();
  rec.final_state = std::move(state);
  return rec;
}

}  // namespace mirror
