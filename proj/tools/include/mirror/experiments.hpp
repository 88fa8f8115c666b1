#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mirror/errors.hpp"
#include "mirror/kernels.hpp"
#include "mirror/linalg.hpp"
#include "mirror/moments.hpp"
#include "mirror/random.hpp"
#include "mirror/targets.hpp"

namespace mirror {

// Bad configuration: exit status 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing or malformed input data: exit status 3.
class DataError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

// Plain "key = value" settings; '#' starts a comment. Later assignments
// win, so command-line overrides are applied with set().
class Config {
 public:
  static Config parse(std::istream& in, const std::string& origin = "<config>");
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Comma-separated numbers, or linspace(lo, hi, n). Empty lists are rejected.
  std::vector<double> get_grid(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<double> parse_grid(const std::string& text);
std::vector<double> linspace(double lo, double hi, std::size_t n);

// Kernel entry of an experiment, written "Kind[:eps|:tune][:identity][:L=n]",
// e.g. "MirrorMALA:0.5", "RW:tune:identity", "HMC:0.7:L=6".
struct KernelSpec {
  KernelKind kind = KernelKind::RW;
  std::optional<double> epsilon;  // unset: taken from the grid or tuned
  bool tune = false;
  bool precondition = true;
  int leapfrog_steps = 1;

  // Name used in output rows, e.g. "RW(identity)".
  std::string label() const;
};

KernelSpec parse_kernel_spec(const std::string& text);

struct ExperimentConfig {
  std::string experiment;
  Config params;
  std::uint64_t seed = 1;
  std::size_t replicates = 1;
  std::size_t threads = 1;
  std::string out_dir = "out";
  // Off: every seconds column is written as 0 so reruns are byte-identical.
  bool timing = true;

  // Reads experiment, seed, replicates, threads, out and timing from `params`.
  static ExperimentConfig from(const Config& params);
};

// One diagnostics row: a chain for (target, kernel, eps, c, d, replicate).
struct ResultRow {
  std::string target;
  std::string kernel;
  double epsilon = 0.0;
  // Epsilon came from tuning; such rows group by kernel, not by epsilon.
  bool tuned = false;
  double c = 1.0;
  std::size_t d = 0;
  std::size_t burnin = 0;
  std::uint64_t seed = 0;
  std::size_t replicate = 0;
  std::size_t iterations = 0;
  double pjump = 0.0;
  double accept_rate = 0.0;
  double rho1_mean = 0.0;
  double e_mean = 0.0;
  double ess_mean = 0.0;
  double seconds = 0.0;
  double e_per_second = 0.0;
};

// Replicate average of the rows sharing (target, kernel, eps, c, d, burnin).
struct SummaryRow {
  ResultRow key;  // identifying fields; epsilon is the mean for tuned rows
  std::size_t replicates = 0;
  double pjump = 0.0;
  double accept_rate = 0.0;
  double rho1_mean = 0.0;
  double e_mean = 0.0;
  double e_sd = 0.0;
  double ess_mean = 0.0;
  double seconds = 0.0;
  double e_per_second = 0.0;
};

// Posterior summary of one parameter from one chain.
struct ParameterSummary {
  std::string run;  // e.g. "sparse/MirrorMALA"
  std::size_t replicate = 0;
  std::string parameter;
  double mean = 0.0;
  double sd = 0.0;
  double mcse = 0.0;        // sd / sqrt(ESS), AR-fit ESS
  double mcse_batch = 0.0;  // same with the batch-means ESS
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
  std::vector<ParameterSummary> parameters;
  std::vector<std::string> files;
};

std::vector<SummaryRow> summarize_rows(const std::vector<ResultRow>& rows);

void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& summary);
void write_summary_json(std::ostream& out, const ExperimentConfig& config,
                        const std::vector<SummaryRow>& summary);

// FNV-1a of a row key; sub-seeds are mix_seed(master, fnv1a(key)).
std::uint64_t fnv1a(const std::string& text);
std::uint64_t row_seed(std::uint64_t master, const std::string& key, std::size_t replicate);

// Writes every file of the experiment below config.out_dir. Throws
// ConfigError or DataError.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Histogram density of one coordinate with the moment-matched normal curve
// evaluated at the bin centres.
struct MarginalDensity {
  std::vector<double> left;
  std::vector<double> right;
  std::vector<double> density;
  std::vector<double> normal;
  double mean = 0.0;
  double sd = 0.0;
  bool degenerate = false;  // constant column: no bins
};

MarginalDensity marginal_density(std::span<const double> values, std::size_t bins);

// One CSV per column (marginal_<k>.csv) plus marginals.json with the
// moments and the DegenerateSeries flags. Returns the files written.
std::vector<std::string> emit_marginals(const Matrix& samples, std::size_t bins,
                                        const std::string& dir,
                                        const std::vector<std::string>& names = {});

// Sigma ~ inverse-Wishart(nu, I_d) via the Bartlett decomposition.
Matrix inverse_wishart_identity(std::size_t d, double nu, RandomStream& rng);

// Mean and variance of a univariate target in its sampled coordinate, by
// quadrature of exp(log_density) on a fine grid.
std::pair<double, double> oned_sampled_moments(int target_id);

}  // namespace mirror
