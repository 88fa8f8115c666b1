#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mirror/adaptation.hpp"
#include "mirror/diagnostics.hpp"
#include "mirror/table.hpp"
#include "runner.hpp"

namespace mirror::detail {

namespace {

std::string kind_name(const KernelSpec& s) { return s.label(); }

ChainPlan plan_from(const ExperimentConfig& config) {
  const Config& p = config.params;
  ChainPlan plan;
  plan.iterations = p.get_size("iterations", 1000000);
  plan.burnin = p.get_size("burnin", 500);
  plan.update_every = p.get_size("update_every", plan.burnin);
  plan.burnin_epsilon = p.get_double("burnin_epsilon", 1.0);
  plan.rw_target = p.get_double("rw_target", kRwTargetPjump);
  plan.mala_target = p.get_double("mala_target", kMalaTargetPjump);
  plan.tune_budget = p.get_size("tune_budget", 20000);
  plan.tune_tolerance = p.get_double("tune_tolerance", 0.02);
  plan.timing = config.timing;
  if (plan.iterations < 100) throw ConfigError("iterations must be >= 100");
  return plan;
}

}  // namespace

ExperimentResult run_pjump_analytic(const ExperimentConfig& config) {
  const Config& p = config.params;
  const auto grid = p.get_grid("epsilon", linspace(0.05, 5.0, 100));
  ExperimentResult result;

  const std::string file = out_path(config, "pjump_analytic.csv");
  {
    std::ofstream out(file);
    out << "epsilon,rw_mirror,mala_mirrormala\n";
    for (double e : grid) {
      out << format_number(e) << ',' << format_number(pjump_rw_analytic(e)) << ','
          << format_number(pjump_mala_analytic(e)) << '\n';
    }
  }
  result.files.push_back(file);

  // Optional Monte Carlo check on N(0,1) with the exact moments.
  const std::size_t mc = p.get_size("mc_iterations", 0);
  if (mc > 0) {
    ChainPlan plan;
    plan.target = make_oned_target(1);
    plan.target_name = "N(0,1)";
    plan.oracle = MomentEstimate::from_moments(Vector::Zero(1), Matrix::Identity(1, 1));
    plan.iterations = mc;
    plan.timing = config.timing;
    const auto kernels = kernel_list(p, {"RW", "Mirror", "MALA", "MirrorMALA"});
    std::vector<Job> jobs;
    for (const auto& k : kernels) {
      for (double e : grid) {
        for (std::size_t r = 0; r < config.replicates; ++r) {
          jobs.push_back({key_of(config.experiment, plan.target_name, k.label(), e, 1.0), r,
                          [plan, k, e, r](std::uint64_t seed) {
                            RandomStream rng(seed);
                            return run_plan(plan, k, e, 1.0, seed, r, rng);
                          }});
        }
      }
    }
    for (auto& o : run_jobs(jobs, config.seed, config.threads)) {
      for (auto& row : o.rows) result.rows.push_back(std::move(row));
    }
    write_standard_outputs(config, result);
  }
  return result;
}

ExperimentResult run_trajectory_demo(const ExperimentConfig& config) {
  const Config& p = config.params;
  const std::string setting = p.get_string("setting", "correlated");
  if (setting != "correlated" && setting != "hmc") throw ConfigError("setting must be correlated or hmc");
  const bool hmc = setting == "hmc";

  Vector mu(2);
  mu << 1, 2;
  Matrix sigma(2, 2);
  sigma << 1, 1.8, 1.8, 4;
  Vector start(2);
  if (hmc) {
    start << -0.5, -1;
  } else {
    start << -3, 6;
  }

  ChainPlan plan;
  plan.target = make_mvn(mu, sigma);
  plan.target_name = "bivariate-normal";
  plan.burnin = p.get_size("burnin", 500);
  plan.update_every = p.get_size("update_every", plan.burnin);
  plan.burnin_epsilon = p.get_double("burnin_epsilon", 1.0);
  plan.rw_target = p.get_double("rw_target", hmc ? 0.30 : 0.30);
  plan.mala_target = p.get_double("mala_target", hmc ? 0.60 : 0.57);
  plan.tune_budget = p.get_size("tune_budget", 20000);
  plan.tune_tolerance = p.get_double("tune_tolerance", 0.02);
  plan.timing = config.timing;
  if (p.get_bool("oracle_moments", hmc)) plan.oracle = MomentEstimate::from_moments(mu, sigma);

  const std::size_t path_len = p.get_size("path_iterations", hmc ? 10 : 100);
  const std::size_t long_run = p.get_size("pjump_iterations", hmc ? 100000 : 0);
  const auto kernels =
      hmc ? kernel_list(p, {"RW:tune:identity", "MALA:tune:identity", "HMC:0.7:L=6:identity",
                             "Mirror:0.5:identity"})
           : kernel_list(p, {"RW:tune", "Mirror:0.5", "MALA:tune", "MirrorMALA:0.5"});

  std::vector<Job> jobs;
  for (const auto& k : kernels) {
    if (k.kind == KernelKind::HMC || k.kind == KernelKind::MirrorHMC) {
      if (k.tune || !k.epsilon) throw ConfigError("HMC kernels need an explicit epsilon");
    }
    const double eps = k.epsilon.value_or(1.0);
    for (std::size_t r = 0; r < config.replicates; ++r) {
      jobs.push_back({key_of(config.experiment + "/" + setting, plan.target_name, k.label(), eps, 1.0), r,
                      [plan, k, eps, r, start, path_len, long_run](std::uint64_t seed) {
                        RandomStream rng(seed);
                        MomentEstimate m;
                        if (plan.oracle) {
                          m = *plan.oracle;
                        } else {
                          BurninOptions bo;
                          bo.iterations = plan.burnin;
                          bo.update_every = plan.update_every;
                          bo.rw_epsilon0 = plan.burnin_epsilon;
                          bo.start = start;
                          m = run_burnin(*plan.target, bo, rng).moments;
                        }
                        KernelConfig kernel = build_kernel(k, eps, 1.0, m);
                        if (k.tune) {
                          // tuning starts from the estimated centre, not the demo start
                          Vector x = m.mu_star;
                          tune_kernel(plan, k, m, kernel, x, rng);
                        }
                        JobOutput out;
                        // path from the demo start
                        ChainState st = init_chain(kernel, *plan.target, start);
                        std::ostringstream path;
                        path << "iteration,x1,x2,accepted\n";
                        path << 0 << ',' << format_number(st.position[0]) << ','
                             << format_number(st.position[1]) << ",1\n";
                        for (std::size_t t = 1; t <= path_len; ++t) {
                          const StepOutcome o = mh_step(kernel, st, *plan.target, rng);
                          path << t << ',' << format_number(st.position[0]) << ','
                               << format_number(st.position[1]) << ',' << (o.accepted ? 1 : 0)
                               << '\n';
                        }
                        out.lines.push_back(path.str());
                        if (long_run > 0) {
                          ChainPlan lp = plan;
                          lp.iterations = long_run;
                          KernelSpec fixed = k;
                          fixed.tune = false;
                          JobOutput o = run_with_moments(lp, m, start, fixed, kernel.epsilon, 1.0,
                                                         seed, r, rng);
                          o.rows.front().tuned = k.tune;
                          out.rows = std::move(o.rows);
                        }
                        return out;
                      }});
    }
  }

  ExperimentResult result;
  const auto outputs = run_jobs(jobs, config.seed, config.threads);
  std::size_t j = 0;
  for (const auto& k : kernels) {
    for (std::size_t r = 0; r < config.replicates; ++r, ++j) {
      std::string name = "trajectory_" + setting + "_" + k.label();
      for (char& ch : name) {
        if (ch == '(' || ch == ')' || ch == '=') ch = '_';
      }
      if (config.replicates > 1) name += "_r" + std::to_string(r);
      const std::string file = out_path(config, name + ".csv");
      std::ofstream(file) << outputs[j].lines.front();
      result.files.push_back(file);
      for (const auto& row : outputs[j].rows) result.rows.push_back(row);
    }
  }
  if (!result.rows.empty()) write_standard_outputs(config, result);
  return result;
}

ExperimentResult run_oned_sweep(const ExperimentConfig& config, bool c_sweep) {
  const Config& p = config.params;
  ChainPlan base = plan_from(config);
  const bool oracle = p.get_bool("oracle_moments", false);

  std::vector<int> targets;
  for (double t : p.get_grid("targets", c_sweep ? std::vector<double>{1} : std::vector<double>{1, 2, 3, 4, 5})) {
    const int id = static_cast<int>(t);
    if (id < 1 || id > 5 || id != t) throw ConfigError("targets must be ids 1..5");
    targets.push_back(id);
  }
  const auto kernels = c_sweep ? kernel_list(p, {"Mirror", "MirrorMALA"})
                               : kernel_list(p, {"RW", "Mirror", "MALA", "MirrorMALA"});
  const auto eps_grid = p.get_grid("epsilon", c_sweep ? std::vector<double>{0.5} : linspace(0.05, 5.0, 100));
  const auto c_grid = p.get_grid("c", c_sweep ? linspace(0.02, 2.0, 100) : std::vector<double>{1.0});

  std::vector<Job> jobs;
  for (int id : targets) {
    ChainPlan plan = base;
    plan.target = make_oned_target(id);
    plan.target_name = "target" + std::to_string(id);
    plan.start = Vector::Zero(1);
    if (p.get_bool("shared_burnin", true)) {
      plan.burnin_seed = mix_seed(config.seed, fnv1a(config.experiment + "|burnin|" + plan.target_name));
    }
    if (oracle) {
      const auto [m, v] = oned_sampled_moments(id);
      plan.oracle = MomentEstimate::from_moments(Vector::Constant(1, m), Matrix::Constant(1, 1, v));
    }
    for (const auto& k : kernels) {
      if (k.kind == KernelKind::HMC || k.kind == KernelKind::MirrorHMC) {
        throw ConfigError("HMC kernels are not part of the 1-D sweeps");
      }
      const bool mirrored = k.kind == KernelKind::Mirror || k.kind == KernelKind::MirrorMALA;
      std::vector<double> eps = k.epsilon ? std::vector<double>{*k.epsilon} : eps_grid;
      if (k.tune) eps = {1.0};
      const std::vector<double> cs = mirrored ? c_grid : std::vector<double>{1.0};
      for (double e : eps) {
        for (double c : cs) {
          for (std::size_t r = 0; r < config.replicates; ++r) {
            jobs.push_back({key_of(config.experiment, plan.target_name, kind_name(k), e, c), r,
                            [plan, k, e, c, r](std::uint64_t seed) {
                              RandomStream rng(seed);
                              return run_plan(plan, k, e, c, seed, r, rng);
                            }});
          }
        }
      }
    }
  }

  ExperimentResult result;
  for (auto& o : run_jobs(jobs, config.seed, config.threads)) {
    for (auto& row : o.rows) result.rows.push_back(std::move(row));
  }
  write_standard_outputs(config, result);

  if (c_sweep) {
    // argmax over c of the replicate-averaged efficiency
    const std::string file = out_path(config, "c_optimum.csv");
    std::ofstream out(file);
    out << "target,kernel,epsilon,c_best,E_best\n";
    std::vector<const SummaryRow*> best;
    for (const auto& s : result.summary) {
      bool found = false;
      for (auto& b : best) {
        if (b->key.target == s.key.target && b->key.kernel == s.key.kernel &&
            b->key.epsilon == s.key.epsilon) {
          found = true;
          if (s.e_mean > b->e_mean) b = &s;
        }
      }
      if (!found) best.push_back(&s);
    }
    for (const SummaryRow* b : best) {
      out << b->key.target << ',' << b->key.kernel << ',' << format_number(b->key.epsilon) << ','
          << format_number(b->key.c) << ',' << format_number(b->e_mean) << '\n';
    }
    result.files.push_back(file);
  }
  return result;
}

}  // namespace mirror::detail
