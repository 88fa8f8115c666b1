#include <benchmark/benchmark.h>

#include "mirror/diagnostics.hpp"
#include "mirror/glmm.hpp"
#include "mirror/kernels.hpp"
#include "mirror/targets.hpp"
#include "mirror/whitening.hpp"

using namespace mirror;

namespace {

// One MH transition on N(0, I_d) with exact moments.
void BM_Step(benchmark::State& state, KernelKind kind) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  auto target = make_mvn(Vector::Zero(d), Matrix::Identity(d, d));
  auto m = std::make_shared<const MomentEstimate>(MomentEstimate::identity(static_cast<std::size_t>(d)));
  const int steps = (kind == KernelKind::HMC || kind == KernelKind::MirrorHMC) ? 6 : 1;
  const KernelConfig k = make_kernel(kind, 0.5, m, 1.0, steps);
  ChainState s = init_chain(k, *target, Vector::Zero(d));
  RandomStream rng(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mh_step(k, s, *target, rng));
  }
  state.SetItemsProcessed(state.iterations());
}

BENCHMARK_CAPTURE(BM_Step, RW, KernelKind::RW)->Arg(1)->Arg(10)->Arg(100);
BENCHMARK_CAPTURE(BM_Step, Mirror, KernelKind::Mirror)->Arg(1)->Arg(10)->Arg(100);
BENCHMARK_CAPTURE(BM_Step, MALA, KernelKind::MALA)->Arg(1)->Arg(10)->Arg(100);
BENCHMARK_CAPTURE(BM_Step, MirrorMALA, KernelKind::MirrorMALA)->Arg(1)->Arg(10)->Arg(100);
BENCHMARK_CAPTURE(BM_Step, HMC, KernelKind::HMC)->Arg(1)->Arg(10)->Arg(100);

void BM_Ess(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  RandomStream rng(2);
  std::vector<double> x(n);
  double prev = 0.0;
  for (auto& v : x) v = prev = 0.5 * prev + rng.gaussian();
  for (auto _ : state) benchmark::DoNotOptimize(effective_sample_size(x));
}
BENCHMARK(BM_Ess)->Arg(10000)->Arg(1000000)->Unit(benchmark::kMillisecond);

// One block sweep of a Poisson GLMM with 200 subjects, dense vs sparse.
void BM_GlmmSweep(benchmark::State& state) {
  const bool sparse = state.range(0) != 0;
  Vector beta(2);
  beta << 0.5, -0.3;
  const SyntheticGlmm syn =
      generate_synthetic_glmm(GlmmFamily::PoissonLog, 200, 10, beta, Vector::Constant(1, -0.5), 3);
  auto post = make_glmm_posterior(build_synthetic_model(syn.rows, GlmmFamily::PoissonLog, 2, 1));
  const auto d = static_cast<Eigen::Index>(post->dimension());
  const MomentEstimate m = MomentEstimate::from_moments(Vector::Zero(d), 0.05 * Matrix::Identity(d, d));
  const BlockPartition& part = post->partition();
  WhiteningMap map = sparse ? sparse_whitening(m, part) : dense_whitening(m, part);
  std::vector<KernelConfig> kernels(part.num_blocks(), make_kernel(KernelKind::MirrorMALA, 0.5));
  BlockSampler sampler(post, std::move(map), m.mu_star, kernels, false, Vector::Zero(d));
  RandomStream rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sweep(rng));
}
BENCHMARK(BM_GlmmSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
