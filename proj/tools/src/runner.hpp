#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mirror/experiments.hpp"
#include "mirror/moments.hpp"
#include "mirror/targets.hpp"

namespace mirror::detail {

struct JobOutput {
  std::vector<ResultRow> rows;
  std::vector<ParameterSummary> parameters;
  // Extra CSV lines for experiment-specific files, written in job order.
  std::vector<std::string> lines;
  std::optional<Matrix> samples;
};

struct Job {
  std::string key;
  std::size_t replicate = 0;
  std::function<JobOutput(std::uint64_t seed)> run;
};

// Runs the jobs on `threads` workers; outputs come back in job order. The
// first failure (in job order) is rethrown after all workers stop.
std::vector<JobOutput> run_jobs(const std::vector<Job>& jobs, std::uint64_t master,
                                std::size_t threads);

// How one chain gets its moments, step size and start.
struct ChainPlan {
  TargetPtr target;
  std::string target_name;
  std::optional<MomentEstimate> oracle;  // skips the burn-in when set
  std::size_t burnin = 500;
  std::size_t update_every = 500;
  double burnin_epsilon = 1.0;
  Vector start;
  std::size_t iterations = 1000;
  double rw_target = 0.234;
  double mala_target = 0.574;
  std::size_t tune_budget = 20000;
  double tune_tolerance = 0.02;
  bool timing = true;
  bool keep_samples = false;
  bool burnin_adapt = false;
  // When set, the burn-in of replicate r draws from its own stream seeded by
  // (burnin_seed, r), so every row of a replicate shares one burn-in.
  std::optional<std::uint64_t> burnin_seed;
};

// Burn-in (or oracle moments), optional tuning, main chain and diagnostics.
JobOutput run_plan(const ChainPlan& plan, const KernelSpec& spec, double epsilon, double c,
                   std::uint64_t seed, std::size_t replicate, RandomStream& rng);

// Same, reusing moments and a start point that the caller already has.
JobOutput run_with_moments(const ChainPlan& plan, const MomentEstimate& moments,
                           const Vector& start, const KernelSpec& spec, double epsilon, double c,
                           std::uint64_t seed, std::size_t replicate, RandomStream& rng);

// Tunes kernel.epsilon towards the plan's RW or MALA target; moves x to
// the last tuning state.
void tune_kernel(const ChainPlan& plan, const KernelSpec& spec, const MomentEstimate& moments,
                 KernelConfig& kernel, Vector& x, RandomStream& rng);

KernelConfig build_kernel(const KernelSpec& spec, double epsilon, double c,
                          const MomentEstimate& moments);

ResultRow make_row(const ChainPlan& plan, const KernelSpec& spec, double epsilon, double c,
                   std::uint64_t seed, std::size_t replicate, const Matrix& samples,
                   double mean_alpha, double accept_rate, double seconds);

std::vector<KernelSpec> kernel_list(const Config& params, const std::vector<std::string>& fallback);

std::string key_of(const std::string& experiment, const std::string& target,
                   const std::string& kernel, double epsilon, double c);

// Writes rows.csv, summary.csv and summary.json and fills result.summary.
void write_standard_outputs(const ExperimentConfig& config, ExperimentResult& result);

std::string out_path(const ExperimentConfig& config, const std::string& name);

// Experiments, one per name.
ExperimentResult run_pjump_analytic(const ExperimentConfig& config);
ExperimentResult run_trajectory_demo(const ExperimentConfig& config);
ExperimentResult run_oned_sweep(const ExperimentConfig& config, bool c_sweep);
ExperimentResult run_gaussian_grid(const ExperimentConfig& config);
ExperimentResult run_corr_gaussian(const ExperimentConfig& config);
ExperimentResult run_burnin_study(const ExperimentConfig& config);
ExperimentResult run_logistic(const ExperimentConfig& config);
ExperimentResult run_glmm(const ExperimentConfig& config);

}  // namespace mirror::detail
