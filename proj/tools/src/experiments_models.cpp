#include <cmath>
#include <fstream>
#include <sstream>

#include "mirror/adaptation.hpp"
#include "mirror/diagnostics.hpp"
#include "mirror/glmm.hpp"
#include "mirror/table.hpp"
#include "mirror/whitening.hpp"
#include "runner.hpp"

namespace mirror::detail {

namespace {

struct LogisticData {
  Matrix x;
  Vector y;
  std::vector<std::string> names;
};

// Correlated N(0,1) covariates (AR(1) across columns, rho = 0.5), intercept
// 0.8 and coefficients drawn from N(0, 0.3^2).
LogisticData synthetic_logistic(std::size_t n, std::size_t p, std::uint64_t seed) {
  RandomStream rng(seed);
  LogisticData d;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(p);
  d.x.resize(rows, cols);
  d.y.resize(rows);
  Vector beta(cols);
  for (Eigen::Index j = 0; j < cols; ++j) beta[j] = 0.3 * rng.gaussian();
  const double rho = 0.5;
  for (Eigen::Index i = 0; i < rows; ++i) {
    double prev = rng.gaussian();
    d.x(i, 0) = prev;
    for (Eigen::Index j = 1; j < cols; ++j) {
      prev = rho * prev + std::sqrt(1.0 - rho * rho) * rng.gaussian();
      d.x(i, j) = prev;
    }
    const double eta = 0.8 + d.x.row(i).dot(beta);
    d.y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
  }
  for (std::size_t j = 0; j < p; ++j) d.names.push_back("x" + std::to_string(j + 1));
  return d;
}

LogisticData load_logistic(const Config& p) {
  const DataTable t = DataTable::read_csv_file(p.require_string("data"));
  const std::string response = p.get_string("response", "y");
  const std::size_t ycol = t.column(response);
  std::vector<std::size_t> cols;
  if (p.has("predictors")) {
    for (const auto& name : p.get_list("predictors", {})) cols.push_back(t.column(name));
  } else {
    for (std::size_t j = 0; j < t.cols(); ++j) {
      if (j != ycol) cols.push_back(j);
    }
  }
  if (t.rows() == 0 || cols.empty()) throw DataError("logistic data needs rows and predictors");
  LogisticData d;
  d.x.resize(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(cols.size()));
  d.y.resize(static_cast<Eigen::Index>(t.rows()));
  const bool has_positive = p.has("response_positive");
  const double positive = p.get_double("response_positive", 1.0);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const double v = t.number(i, ycol);
    const auto ri = static_cast<Eigen::Index>(i);
    if (has_positive) {
      d.y[ri] = v == positive ? 1.0 : 0.0;
    } else if (v == 0.0 || v == 1.0) {
      d.y[ri] = v;
    } else {
      throw DataError("response '" + response + "' must be 0/1 (or set response_positive)");
    }
    for (std::size_t j = 0; j < cols.size(); ++j) {
      d.x(ri, static_cast<Eigen::Index>(j)) = t.number(i, cols[j]);
    }
  }
  for (std::size_t c : cols) d.names.push_back(t.header()[c]);

  const std::string standardize = p.get_string("standardize", "nonbinary");
  if (standardize != "none" && standardize != "nonbinary" && standardize != "all") {
    throw ConfigError("standardize must be none, nonbinary or all");
  }
  if (standardize != "none") {
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
      auto col = d.x.col(j);
      const bool binary = (col.array() == 0.0 || col.array() == 1.0).all();
      if (binary && standardize == "nonbinary") continue;
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(col.size() - 1));
      if (sd > 0.0) col = (col.array() - mean) / sd;
    }
  }
  return d;
}

// Burn-in for hierarchical targets. Same segment scheme as run_burnin, but
// each segment is a block RW sampler in sparse-whitened coordinates, so
// subject blocks move with the current global values instead of against a
// joint Gaussian fit of the funnel.
BurninResult run_block_burnin(const std::shared_ptr<const BlockTarget>& target,
                              const BurninOptions& bo, RandomStream& rng) {
  if (bo.iterations < 100) throw ConfigError("burnin must be >= 100");
  if (bo.update_every == 0 || bo.iterations % bo.update_every != 0) {
    throw ConfigError("update_every must divide burnin");
  }
  const BlockPartition& part = target->partition();
  const auto d = part.dimension();
  MomentEstimate m = MomentEstimate::identity(d);
  Vector theta = bo.start;
  double alpha_sum = 0.0;
  const std::size_t segments = bo.iterations / bo.update_every;
  for (std::size_t s = 0; s < segments; ++s) {
    std::vector<KernelConfig> kernels;
    for (std::size_t b = 0; b < part.num_blocks(); ++b) {
      const double eps = s == 0 ? bo.rw_epsilon0 : 2.38 / std::sqrt(static_cast<double>(part.size(b)));
      kernels.push_back(make_kernel(KernelKind::RW, eps, nullptr));
    }
    BlockSampler sampler(target, sparse_whitening(m, part), m.mu_star, std::move(kernels), false, theta);
    const BlockChainRecord rec = run_block_sampler(sampler, bo.update_every, rng);
    alpha_sum += rec.mean_alpha;
    theta = sampler.theta();
    m = MomentEstimate::from_samples(rec.samples);
  }
  BurninResult out;
  out.moments = std::move(m);
  out.last_position = std::move(theta);
  out.mean_alpha = alpha_sum / static_cast<double>(segments);
  return out;
}

}  // namespace

ExperimentResult run_logistic(const ExperimentConfig& config) {
  const Config& p = config.params;
  ExperimentResult result;

  LogisticData data;
  std::string name;
  if (p.has("data")) {
    try {
      data = load_logistic(p);
    } catch (const SchemaError& e) {
      throw DataError(e.what());
    }
    name = "logistic-data";
  } else {
    data = synthetic_logistic(p.get_size("n", 1000), p.get_size("p", 24),
                              mix_seed(p.get_u64("data_seed", config.seed), fnv1a("logistic-data")));
    name = "logistic-synthetic";
    const std::string file = out_path(config, "logistic_data.csv");
    std::ofstream out(file);
    out << "y";
    for (const auto& n : data.names) out << ',' << n;
    out << '\n';
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
      out << format_number(data.y[i]);
      for (Eigen::Index j = 0; j < data.x.cols(); ++j) out << ',' << format_number(data.x(i, j));
      out << '\n';
    }
    result.files.push_back(file);
  }

  ChainPlan plan;
  plan.target = make_logistic_posterior(data.x, data.y, p.get_double("prior_sd", 10.0));
  plan.target_name = name;
  plan.iterations = p.get_size("iterations", 100000);
  plan.burnin = p.get_size("burnin", 30000);
  plan.update_every = p.get_size("update_every", std::min<std::size_t>(10000, plan.burnin));
  plan.burnin_epsilon = p.get_double("burnin_epsilon", 0.04);
  plan.burnin_adapt = p.get_bool("burnin_adapt", false);
  plan.rw_target = p.get_double("rw_target", kRwTargetPjump);
  plan.mala_target = p.get_double("mala_target", kMalaTargetPjump);
  plan.tune_budget = p.get_size("tune_budget", 20000);
  plan.tune_tolerance = p.get_double("tune_tolerance", 0.02);
  plan.timing = config.timing;
  plan.start = Vector::Zero(static_cast<Eigen::Index>(plan.target->dimension()));

  const auto kernels = kernel_list(p, {"RW:tune", "RW:tune:identity", "Mirror:0.5", "Mirror:1",
                                       "MALA:tune", "MALA:tune:identity", "MirrorMALA:0.5",
                                       "MirrorMALA:1"});
  const std::string marg = p.get_string("marginals_kernel", "MirrorMALA:0.5");
  const std::size_t bins = p.get_size("marginal_bins", 50);

  std::vector<Job> jobs;
  std::vector<std::size_t> keep;
  for (const auto& k : kernels) {
    if (!k.tune && !k.epsilon) throw ConfigError("kernel " + k.label() + " needs an epsilon or :tune");
    const double eps = k.epsilon.value_or(1.0);
    const bool want = marg != "none" && parse_kernel_spec(marg).label() == k.label() &&
                      parse_kernel_spec(marg).epsilon == k.epsilon;
    for (std::size_t r = 0; r < config.replicates; ++r) {
      ChainPlan jp = plan;
      jp.keep_samples = want && r == 0;
      if (jp.keep_samples) keep.push_back(jobs.size());
      jobs.push_back({key_of(config.experiment, name, k.label() + (k.tune ? ":tune" : ""), eps, 1.0), r,
                      [jp, k, eps, r](std::uint64_t seed) {
                        RandomStream rng(seed);
                        return run_plan(jp, k, eps, 1.0, seed, r, rng);
                      }});
    }
  }
  auto outputs = run_jobs(jobs, config.seed, config.threads);
  for (const auto& o : outputs) {
    for (const auto& row : o.rows) result.rows.push_back(row);
  }
  for (std::size_t j : keep) {
    std::vector<std::string> names{"intercept"};
    for (const auto& n : data.names) names.push_back(n);
    for (auto& f : emit_marginals(*outputs[j].samples, bins, out_path(config, "marginals"), names)) {
      result.files.push_back(f);
    }
  }
  write_standard_outputs(config, result);
  return result;
}

ExperimentResult run_glmm(const ExperimentConfig& config) {
  const Config& p = config.params;
  ExperimentResult result;

  const std::string dataset = p.get_string("dataset", "synthetic");
  GlmmSpec spec;
  ColumnMap columns;
  for (const auto& [k, v] : p.values()) {
    if (k.rfind("column.", 0) == 0) columns[k.substr(7)] = v;
  }
  if (dataset == "synthetic") {
    const GlmmFamily family = parse_glmm_family(p.get_string("family", "poisson"));
    const auto beta_v = p.get_grid("beta", {0.5, -0.3});
    const auto zeta_v = p.get_grid("zeta", {-0.5});
    const Vector beta = Eigen::Map<const Vector>(beta_v.data(), static_cast<Eigen::Index>(beta_v.size()));
    const Vector zeta = Eigen::Map<const Vector>(zeta_v.data(), static_cast<Eigen::Index>(zeta_v.size()));
    std::size_t r = 0;
    while (r * (r + 1) / 2 < zeta_v.size()) ++r;
    if (r * (r + 1) / 2 != zeta_v.size()) throw ConfigError("zeta must have r(r+1)/2 entries");
    if (r > beta_v.size()) throw ConfigError("random effects must be a subset of the fixed effects");
    const SyntheticGlmm syn = generate_synthetic_glmm(
        family, p.get_size("n", 20), p.get_size("n_i", 4), beta, zeta,
        mix_seed(p.get_u64("data_seed", config.seed), fnv1a("glmm-data")));
    const std::string file = out_path(config, "glmm_data.csv");
    {
      std::ofstream out(file);
      syn.rows.write_csv(out);
    }
    result.files.push_back(file);
    spec = build_synthetic_model(syn.rows, family, beta_v.size(), r);
  } else if (dataset == "epilepsy" || dataset == "polypharmacy") {
    DataTable rows;
    try {
      rows = DataTable::read_csv_file(p.require_string("data"));
    } catch (const SchemaError& e) {
      throw DataError(e.what());
    }
    if (dataset == "epilepsy") {
      spec = build_epilepsy_model(rows, columns);
    } else {
      PolypharmacyOptions opt;
      opt.age_scale = p.get_double("age_scale", 1.0);
      spec = build_polypharmacy_model(rows, columns, opt);
    }
  } else {
    throw ConfigError("dataset must be synthetic, epilepsy or polypharmacy");
  }
  spec.prior_sd_beta = p.get_double("prior_sd_beta", spec.prior_sd_beta);
  spec.prior_sd_zeta = p.get_double("prior_sd_zeta", spec.prior_sd_zeta);
  auto posterior = make_glmm_posterior(spec);

  std::vector<std::string> names;
  for (const auto& s : spec.subjects) {
    for (std::size_t k = 0; k < spec.random_dim; ++k) {
      names.push_back("xi[" + s.label + (spec.random_dim > 1 ? ":" + std::to_string(k + 1) : "") + "]");
    }
  }
  for (std::size_t k = 0; k < spec.fixed_dim; ++k) {
    names.push_back(k < spec.fixed_names.size() ? "beta[" + spec.fixed_names[k] + "]"
                                                : "beta[" + std::to_string(k) + "]");
  }
  for (std::size_t k = 0; k < spec.zeta_dim(); ++k) names.push_back("zeta[" + std::to_string(k + 1) + "]");

  std::vector<WhiteningMode> modes;
  const std::string w = p.get_string("whitening", "both");
  if (w == "dense" || w == "both") modes.push_back(WhiteningMode::Dense);
  if (w == "sparse" || w == "both") modes.push_back(WhiteningMode::Sparse);
  if (modes.empty()) throw ConfigError("whitening must be dense, sparse or both");

  const auto kernels = kernel_list(p, {"MirrorMALA:0.5"});
  const double c = p.get_double("c", 1.0);
  const std::size_t sweeps = p.get_size("iterations", 10000);
  const BurninPlan bp = default_burnin(posterior->dimension());
  const std::size_t burnin = p.get_size("burnin", bp.iterations);
  const std::size_t update_every =
      p.get_size("update_every", burnin % bp.update_every == 0 ? bp.update_every : burnin);
  const double burnin_eps = p.get_double("burnin_epsilon", 0.05);
  const bool componentwise = p.get_bool("global_componentwise", false);
  const std::string moments = p.get_string("moments", "block");
  if (moments != "block" && moments != "burnin") throw ConfigError("moments must be block or burnin");
  const bool block_burnin = moments == "block";
  const bool timing = config.timing;
  if (sweeps < 100) throw ConfigError("iterations must be >= 100");

  std::vector<Job> jobs;
  for (WhiteningMode mode : modes) {
    const std::string mname = mode == WhiteningMode::Dense ? "dense" : "sparse";
    for (const auto& k : kernels) {
      if (k.tune || !k.epsilon) throw ConfigError("GLMM kernels need an explicit epsilon");
      if (k.kind == KernelKind::HMC || k.kind == KernelKind::MirrorHMC) {
        throw ConfigError("GLMM block sampling supports RW, Mirror, MALA and MirrorMALA");
      }
      const double eps = *k.epsilon;
      const std::string target = "glmm-" + dataset + "-" + mname;
      for (std::size_t r = 0; r < config.replicates; ++r) {
        jobs.push_back({key_of(config.experiment, target, k.label(), eps, c), r,
                        [=](std::uint64_t seed) {
                          RandomStream rng(seed);
                          BurninOptions bo;
                          bo.iterations = burnin;
                          bo.update_every = update_every;
                          bo.rw_epsilon0 = burnin_eps;
                          bo.start = Vector::Zero(static_cast<Eigen::Index>(posterior->dimension()));
                          const BurninResult br = block_burnin ? run_block_burnin(posterior, bo, rng)
                                                               : run_burnin(*posterior, bo, rng);
                          const BlockPartition& part = posterior->partition();
                          WhiteningMap map = mode == WhiteningMode::Dense
                                                 ? dense_whitening(br.moments, part)
                                                 : sparse_whitening(br.moments, part);
                          std::vector<KernelConfig> per_block(part.num_blocks(),
                                                              make_kernel(k.kind, eps, nullptr, c));
                          BlockSampler sampler(posterior, std::move(map), br.moments.mu_star,
                                               per_block, componentwise, br.last_position);
                          const BlockChainRecord rec = run_block_sampler(sampler, sweeps, rng);

                          ChainPlan plan;
                          plan.target_name = target;
                          plan.burnin = burnin;
                          plan.timing = timing;
                          JobOutput out;
                          out.rows.push_back(make_row(plan, k, eps, c, seed, r, rec.samples,
                                                      rec.mean_alpha, rec.mean_alpha, rec.seconds));
                          for (Eigen::Index j = 0; j < rec.samples.cols(); ++j) {
                            ParameterSummary ps;
                            ps.run = mname + "/" + k.label();
                            ps.replicate = r;
                            ps.parameter = names[static_cast<std::size_t>(j)];
                            const auto col = rec.samples.col(j);
                            ps.mean = col.mean();
                            ps.sd = std::sqrt((col.array() - ps.mean).square().sum() /
                                              static_cast<double>(col.size() - 1));
                            std::vector<double> series(col.data(), col.data() + col.size());
                            try {
                              ps.mcse = ps.sd / std::sqrt(effective_sample_size(series).ess);
                              ps.mcse_batch = ps.sd / std::sqrt(batch_means_ess(series));
                            } catch (const DegenerateSeries&) {
                              ps.mcse = 0.0;
                            }
                            out.parameters.push_back(std::move(ps));
                          }
                          return out;
                        }});
      }
    }
  }

  auto outputs = run_jobs(jobs, config.seed, config.threads);
  const std::string file = out_path(config, "glmm_posterior.csv");
  {
    std::ofstream out(file);
    out << "run,replicate,parameter,mean,sd,mcse,mcse_batch\n";
    for (auto& o : outputs) {
      for (auto& row : o.rows) result.rows.push_back(std::move(row));
      for (auto& ps : o.parameters) {
        out << ps.run << ',' << ps.replicate << ',' << ps.parameter << ',' << format_number(ps.mean)
            << ',' << format_number(ps.sd) << ',' << format_number(ps.mcse) << ','
            << format_number(ps.mcse_batch) << '\n';
        result.parameters.push_back(std::move(ps));
      }
    }
  }
  result.files.push_back(file);
  write_standard_outputs(config, result);
  return result;
}

}  // namespace mirror::detail
