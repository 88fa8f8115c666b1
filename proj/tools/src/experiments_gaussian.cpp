#include <cmath>
#include <fstream>
#include <sstream>

#include "mirror/adaptation.hpp"
#include "mirror/table.hpp"
#include "runner.hpp"

namespace mirror::detail {

namespace {

ChainPlan plan_from(const ExperimentConfig& config, std::size_t iterations, std::size_t burnin,
                    std::size_t update_every) {
  const Config& p = config.params;
  ChainPlan plan;
  plan.iterations = p.get_size("iterations", iterations);
  plan.burnin = p.get_size("burnin", burnin);
  plan.update_every = p.get_size("update_every", std::min(update_every, plan.burnin));
  plan.burnin_adapt = p.get_bool("burnin_adapt", false);
  plan.rw_target = p.get_double("rw_target", kRwTargetPjump);
  plan.mala_target = p.get_double("mala_target", kMalaTargetPjump);
  plan.tune_budget = p.get_size("tune_budget", 20000);
  plan.tune_tolerance = p.get_double("tune_tolerance", 0.02);
  plan.timing = config.timing;
  if (plan.iterations < 100) throw ConfigError("iterations must be >= 100");
  return plan;
}

void add_kernel_jobs(const ExperimentConfig& config, const ChainPlan& plan,
                     const std::vector<KernelSpec>& kernels, std::vector<Job>& jobs) {
  for (const auto& k : kernels) {
    if (!k.tune && !k.epsilon) throw ConfigError("kernel " + k.label() + " needs an epsilon or :tune");
    const double eps = k.epsilon.value_or(1.0);
    for (std::size_t r = 0; r < config.replicates; ++r) {
      jobs.push_back({key_of(config.experiment, plan.target_name, k.label() + (k.tune ? ":tune" : ""),
                             eps, 1.0),
                      r, [plan, k, eps, r](std::uint64_t seed) {
                        RandomStream rng(seed);
                        return run_plan(plan, k, eps, 1.0, seed, r, rng);
                      }});
    }
  }
}

void collect(const std::vector<JobOutput>& outputs, ExperimentResult& result) {
  for (const auto& o : outputs) {
    for (const auto& row : o.rows) result.rows.push_back(row);
  }
}

const std::vector<std::string> kGridKernels = {"RW:tune",    "Mirror:0.5",     "Mirror:1",
                                               "MALA:tune",  "MirrorMALA:0.5", "MirrorMALA:1"};

void write_matrix(const std::string& file, const Matrix& m, const std::string& prefix) {
  std::ofstream out(file);
  for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << prefix << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_number(m(i, j));
    out << '\n';
  }
}

Matrix read_matrix(const std::string& file) {
  const DataTable t = DataTable::read_csv_file(file);
  Matrix m(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.number(i, j);
    }
  }
  return m;
}

}  // namespace

ExperimentResult run_gaussian_grid(const ExperimentConfig& config) {
  const Config& p = config.params;
  const ChainPlan base = plan_from(config, 100000, 10000, 10000);
  const auto kernels = kernel_list(p, kGridKernels);

  std::vector<Job> jobs;
  for (double dd : p.get_grid("dims", {2, 3, 4, 5, 6, 7, 8, 9, 10})) {
    const auto d = static_cast<std::size_t>(dd);
    if (d < 1 || static_cast<double>(d) != dd) throw ConfigError("dims must be positive integers");
    ChainPlan plan = base;
    const auto n = static_cast<Eigen::Index>(d);
    plan.target = make_mvn(Vector::Zero(n), Matrix::Identity(n, n));
    plan.target_name = "gaussian-d" + std::to_string(d);
    plan.start = Vector::Zero(n);
    plan.burnin_epsilon = p.get_double("burnin_epsilon", 2.38 / std::sqrt(dd));
    if (p.get_bool("oracle_moments", false)) plan.oracle = MomentEstimate::identity(d);
    add_kernel_jobs(config, plan, kernels, jobs);
  }
  ExperimentResult result;
  collect(run_jobs(jobs, config.seed, config.threads), result);
  write_standard_outputs(config, result);
  return result;
}

ExperimentResult run_corr_gaussian(const ExperimentConfig& config) {
  const Config& p = config.params;
  const std::size_t d = p.get_size("d", 30);
  if (d < 2) throw ConfigError("d must be >= 2");
  const BurninPlan bp = default_burnin(d);
  const ChainPlan base = plan_from(config, 100000, bp.iterations, bp.update_every);
  const auto kernels = kernel_list(p, kGridKernels);

  ExperimentResult result;
  Matrix sigma;
  if (p.has("sigma_file")) {
    try {
      sigma = read_matrix(p.require_string("sigma_file"));
    } catch (const SchemaError& e) {
      throw DataError(e.what());
    }
    if (static_cast<std::size_t>(sigma.rows()) != d || sigma.cols() != sigma.rows()) {
      throw DataError("sigma_file must hold a " + std::to_string(d) + " x " + std::to_string(d) + " matrix");
    }
  } else {
    const std::uint64_t sigma_seed = p.get_u64("sigma_seed", config.seed);
    RandomStream rng(mix_seed(sigma_seed, fnv1a("corr-gaussian-sigma")));
    sigma = inverse_wishart_identity(d, p.get_double("nu", static_cast<double>(d)), rng);
  }
  // persisted so the target can be reused or inspected
  const std::string sigma_file = out_path(config, "corr_sigma.csv");
  write_matrix(sigma_file, sigma, "s");
  result.files.push_back(sigma_file);

  ChainPlan plan = base;
  const auto n = static_cast<Eigen::Index>(d);
  plan.target = make_mvn(Vector::Zero(n), sigma);
  plan.target_name = "corr-gaussian-d" + std::to_string(d);
  plan.start = Vector::Zero(n);
  // the scales of an inverse-Wishart draw spread over orders of magnitude
  plan.burnin_epsilon = p.get_double("burnin_epsilon", 2.38 / std::sqrt(static_cast<double>(d)));
  plan.burnin_adapt = p.get_bool("burnin_adapt", true);
  if (p.get_bool("oracle_moments", false)) plan.oracle = MomentEstimate::from_moments(Vector::Zero(n), sigma);

  std::vector<Job> jobs;
  add_kernel_jobs(config, plan, kernels, jobs);
  collect(run_jobs(jobs, config.seed, config.threads), result);
  write_standard_outputs(config, result);
  return result;
}

ExperimentResult run_burnin_study(const ExperimentConfig& config) {
  const Config& p = config.params;
  const ChainPlan base = plan_from(config, 100000, 100, 100);
  const auto kernels = kernel_list(p, {"RW:tune", "Mirror:0.5", "MALA:tune", "MirrorMALA:0.5"});
  const auto lengths = p.get_grid("burnins", {100, 1000, 10000});

  struct Problem {
    std::string name;
    Vector mu;
    Matrix sigma;
  };
  std::vector<Problem> problems;
  for (const auto& name : p.get_list("targets", {"bivariate", "iw10"})) {
    if (name == "bivariate") {
      Vector mu(2);
      mu << 1, 2;
      Matrix s(2, 2);
      s << 1, 1.8, 1.8, 4;
      problems.push_back({name, mu, s});
    } else if (name == "iw10") {
      RandomStream rng(mix_seed(p.get_u64("sigma_seed", config.seed), fnv1a("burnin-study-iw10")));
      Vector mu(10);
      rng.fill_gaussian(mu);
      problems.push_back({name, mu, inverse_wishart_identity(10, 10.0, rng)});
    } else {
      throw ConfigError("burn-in study targets are bivariate and iw10, got '" + name + "'");
    }
  }

  // One burn-in per (target, B, replicate), shared by every kernel.
  std::vector<Job> jobs;
  for (const auto& prob : problems) {
    for (double bl : lengths) {
      const auto b = static_cast<std::size_t>(bl);
      if (b < 100 || static_cast<double>(b) != bl) throw ConfigError("burn-in lengths must be integers >= 100");
      ChainPlan plan = base;
      plan.target = make_mvn(prob.mu, prob.sigma);
      plan.target_name = prob.name;
      plan.burnin = b;
      plan.update_every = b;
      plan.start = Vector::Zero(prob.mu.size());
      plan.burnin_epsilon = p.get_double("burnin_epsilon", 1.0);
      for (std::size_t r = 0; r < config.replicates; ++r) {
        jobs.push_back({key_of(config.experiment, prob.name, "burnin", bl, 1.0), r,
                        [plan, kernels, prob, r](std::uint64_t seed) {
                          RandomStream rng(seed);
                          BurninOptions bo;
                          bo.iterations = plan.burnin;
                          bo.update_every = plan.update_every;
                          bo.rw_epsilon0 = plan.burnin_epsilon;
                          bo.adapt_first_segment = plan.burnin_adapt;
                          bo.start = plan.start;
                          const BurninResult br = run_burnin(*plan.target, bo, rng);
                          JobOutput out;
                          std::ostringstream line;
                          line << prob.name << ',' << plan.burnin << ',' << r << ','
                               << format_number((br.moments.mu_star - prob.mu).norm()) << ','
                               << format_number((br.moments.sigma_star - prob.sigma).norm() /
                                                prob.sigma.norm())
                               << '\n';
                          out.lines.push_back(line.str());
                          for (const auto& k : kernels) {
                            const double eps = k.epsilon.value_or(1.0);
                            JobOutput o = run_with_moments(plan, br.moments, br.last_position, k,
                                                           eps, 1.0, seed, r, rng);
                            out.rows.push_back(o.rows.front());
                          }
                          return out;
                        }});
      }
    }
  }

  ExperimentResult result;
  const auto outputs = run_jobs(jobs, config.seed, config.threads);
  collect(outputs, result);
  const std::string file = out_path(config, "moment_errors.csv");
  {
    std::ofstream out(file);
    out << "target,burnin,replicate,mu_error,sigma_rel_error\n";
    for (const auto& o : outputs) {
      for (const auto& l : o.lines) out << l;
    }
  }
  result.files.push_back(file);
  write_standard_outputs(config, result);
  return result;
}

}  // namespace mirror::detail
