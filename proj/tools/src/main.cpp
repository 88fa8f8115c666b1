#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mirror/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Run a sampler experiment and write its CSV/JSON outputs."};
  std::string config_path;
  std::string experiment;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t replicates = 0;
  std::size_t threads = 0;
  std::vector<std::string> overrides;
  bool no_timing = false;
  app.add_option("--config", config_path, "key = value settings file");
  app.add_option("--experiment", experiment,
                 "pjump-analytic, trajectory-demo, oned-sweep, c-sweep, gaussian-grid, "
                 "corr-gaussian, burnin-study, logistic or glmm");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--replicates", replicates, "replicates per grid point");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--set", overrides, "extra key=value setting (repeatable)");
  app.add_flag("--no-timing", no_timing, "write 0 for every timing column");
  CLI11_PARSE(app, argc, argv);

  try {
    mirror::Config cfg;
    if (!config_path.empty()) cfg = mirror::Config::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw mirror::ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!experiment.empty()) cfg.set("experiment", experiment);
    if (app.count("--seed")) cfg.set("seed", std::to_string(seed));
    if (!out.empty()) cfg.set("out", out);
    if (app.count("--replicates")) cfg.set("replicates", std::to_string(replicates));
    if (app.count("--threads")) cfg.set("threads", std::to_string(threads));
    if (no_timing) cfg.set("timing", "false");

    const mirror::ExperimentConfig ec = mirror::ExperimentConfig::from(cfg);
    const mirror::ExperimentResult result = mirror::run_experiment(ec);
    for (const auto& f : result.files) std::cout << f << '\n';
    return mirror::kExitOk;
  } catch (const mirror::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return mirror::kExitConfig;
  } catch (const mirror::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return mirror::kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
