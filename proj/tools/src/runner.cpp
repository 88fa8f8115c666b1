#include "runner.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "mirror/adaptation.hpp"
#include "mirror/chain.hpp"
#include "mirror/diagnostics.hpp"
#include "mirror/table.hpp"

namespace mirror::detail {

std::vector<JobOutput> run_jobs(const std::vector<Job>& jobs, std::uint64_t master,
                                std::size_t threads) {
  std::vector<JobOutput> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        out[i] = jobs[i].run(row_seed(master, jobs[i].key, jobs[i].replicate));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

KernelConfig build_kernel(const KernelSpec& spec, double epsilon, double c,
                          const MomentEstimate& moments) {
  if (spec.precondition) {
    return make_kernel(spec.kind, epsilon, std::make_shared<const MomentEstimate>(moments), c,
                       spec.leapfrog_steps);
  }
  KernelConfig k = make_kernel(spec.kind, epsilon, nullptr, c, spec.leapfrog_steps);
  if (k.mirrored) k.mirror_centre = moments.mu_star;
  return k;
}

ResultRow make_row(const ChainPlan& plan, const KernelSpec& spec, double epsilon, double c,
                   std::uint64_t seed, std::size_t replicate, const Matrix& samples,
                   double mean_alpha, double accept_rate, double seconds) {
  const DiagnosticsReport rep = summarize(samples, mean_alpha, plan.timing ? seconds : 0.0);
  ResultRow r;
  r.target = plan.target_name;
  r.kernel = spec.label();
  r.epsilon = epsilon;
  r.tuned = spec.tune;
  r.c = c;
  r.d = static_cast<std::size_t>(samples.cols());
  r.burnin = plan.oracle ? 0 : plan.burnin;
  r.seed = seed;
  r.replicate = replicate;
  r.iterations = static_cast<std::size_t>(samples.rows());
  r.pjump = rep.pjump;
  r.accept_rate = accept_rate;
  r.rho1_mean = rep.rho1_mean;
  r.e_mean = rep.efficiency_mean;
  r.ess_mean = rep.ess_mean;
  r.seconds = plan.timing ? seconds : 0.0;
  r.e_per_second = rep.efficiency_per_second();
  return r;
}

void tune_kernel(const ChainPlan& plan, const KernelSpec& spec, const MomentEstimate& moments,
                 KernelConfig& kernel, Vector& x, RandomStream& rng) {
  double goal = plan.rw_target;
  if (kernel.base == BaseKernel::Langevin) goal = plan.mala_target;
  if (kernel.base == BaseKernel::Hamiltonian) throw ConfigError("HMC kernels cannot be tuned");
  TuningOptions opt;
  const double d = static_cast<double>(moments.dimension());
  double scale = 1.0;
  if (!spec.precondition) scale = std::sqrt(moments.sigma_star.diagonal().mean());
  opt.initial_epsilon = scale * (kernel.base == BaseKernel::Langevin ? 1.65 / std::pow(d, 1.0 / 6.0)
                                                                     : 2.38 / std::sqrt(d));
  opt.budget = plan.tune_budget;
  opt.tolerance = plan.tune_tolerance;
  const TuningResult t = tune_epsilon(kernel, *plan.target, goal, x, rng, opt);
  kernel.epsilon = t.epsilon;
  x = t.last_position;
}

JobOutput run_with_moments(const ChainPlan& plan, const MomentEstimate& moments,
                           const Vector& start, const KernelSpec& spec, double epsilon, double c,
                           std::uint64_t seed, std::size_t replicate, RandomStream& rng) {
  Vector x0 = start;
  KernelConfig kernel = build_kernel(spec, epsilon, c, moments);
  if (spec.tune) tune_kernel(plan, spec, moments, kernel, x0, rng);
  ChainRecord rec = run_chain(kernel, *plan.target, x0, plan.iterations, rng);
  JobOutput out;
  out.rows.push_back(make_row(plan, spec, kernel.epsilon, c, seed, replicate, rec.samples,
                              rec.mean_alpha, rec.accept_rate, rec.seconds));
  if (plan.keep_samples) out.samples = std::move(rec.samples);
  return out;
}

JobOutput run_plan(const ChainPlan& plan, const KernelSpec& spec, double epsilon, double c,
                   std::uint64_t seed, std::size_t replicate, RandomStream& rng) {
  if (plan.oracle) {
    const Vector start = plan.start.size() ? plan.start : plan.oracle->mu_star;
    return run_with_moments(plan, *plan.oracle, start, spec, epsilon, c, seed, replicate, rng);
  }
  BurninOptions bo;
  bo.iterations = plan.burnin;
  bo.update_every = plan.update_every;
  bo.rw_epsilon0 = plan.burnin_epsilon;
  bo.adapt_first_segment = plan.burnin_adapt;
  bo.start = plan.start;
  BurninResult b;
  if (plan.burnin_seed) {
    RandomStream brng(mix_seed(*plan.burnin_seed, replicate));
    b = run_burnin(*plan.target, bo, brng);
  } else {
    b = run_burnin(*plan.target, bo, rng);
  }
  return run_with_moments(plan, b.moments, b.last_position, spec, epsilon, c, seed, replicate, rng);
}

std::vector<KernelSpec> kernel_list(const Config& params, const std::vector<std::string>& fallback) {
  std::vector<KernelSpec> out;
  for (const auto& k : params.get_list("kernels", fallback)) out.push_back(parse_kernel_spec(k));
  return out;
}

std::string key_of(const std::string& experiment, const std::string& target,
                   const std::string& kernel, double epsilon, double c) {
  return experiment + "|" + target + "|" + kernel + "|" + format_number(epsilon) + "|" +
         format_number(c);
}

std::string out_path(const ExperimentConfig& config, const std::string& name) {
  return (std::filesystem::path(config.out_dir) / name).string();
}

void write_standard_outputs(const ExperimentConfig& config, ExperimentResult& result) {
  result.summary = summarize_rows(result.rows);
  const std::string rows = out_path(config, "rows.csv");
  const std::string summary = out_path(config, "summary.csv");
  const std::string json = out_path(config, "summary.json");
  {
    std::ofstream f(rows);
    write_rows_csv(f, result.rows);
  }
  {
    std::ofstream f(summary);
    write_summary_csv(f, result.summary);
  }
  {
    std::ofstream f(json);
    write_summary_json(f, config, result.summary);
  }
  result.files.push_back(rows);
  result.files.push_back(summary);
  result.files.push_back(json);
}

}  // namespace mirror::detail

namespace mirror {

ExperimentResult run_experiment(const ExperimentConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + config.out_dir + "'");
  const std::string& e = config.experiment;
  try {
    if (e == "pjump-analytic") return detail::run_pjump_analytic(config);
    if (e == "trajectory-demo") return detail::run_trajectory_demo(config);
    if (e == "oned-sweep") return detail::run_oned_sweep(config, false);
    if (e == "c-sweep") return detail::run_oned_sweep(config, true);
    if (e == "gaussian-grid") return detail::run_gaussian_grid(config);
    if (e == "corr-gaussian") return detail::run_corr_gaussian(config);
    if (e == "burnin-study") return detail::run_burnin_study(config);
    if (e == "logistic") return detail::run_logistic(config);
    if (e == "glmm") return detail::run_glmm(config);
  } catch (const SchemaError& err) {
    throw DataError(err.what());
  } catch (const BadSubjectGrouping& err) {
    throw DataError(err.what());
  } catch (const InvalidKernelConfig& err) {
    throw ConfigError(err.what());
  } catch (const NonPositiveEpsilon& err) {
    throw ConfigError(err.what());
  }
  throw ConfigError("unknown experiment '" + e + "'");
}

}  // namespace mirror
