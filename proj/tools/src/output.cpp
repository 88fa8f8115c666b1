#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <tuple>

#include "json.hpp"
#include "mirror/experiments.hpp"
#include "mirror/linalg.hpp"
#include "mirror/table.hpp"
#include "mirror/targets.hpp"

namespace mirror {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t row_seed(std::uint64_t master, const std::string& key, std::size_t replicate) {
  return mix_seed(master, fnv1a(key + "#" + std::to_string(replicate)));
}

std::vector<SummaryRow> summarize_rows(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<std::string, std::string, bool, double, double, std::size_t, std::size_t>;
  std::vector<Key> order;
  std::vector<std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) {
    const Key k{r.target, r.kernel, r.tuned, r.tuned ? 0.0 : r.epsilon, r.c, r.d, r.burnin};
    const auto it = std::find(order.begin(), order.end(), k);
    if (it == order.end()) {
      order.push_back(k);
      groups.push_back({&r});
    } else {
      groups[static_cast<std::size_t>(it - order.begin())].push_back(&r);
    }
  }

  std::vector<SummaryRow> out;
  for (const auto& g : groups) {
    SummaryRow s;
    s.key = *g.front();
    s.replicates = g.size();
    const double n = static_cast<double>(g.size());
    s.key.epsilon = 0.0;
    for (const ResultRow* r : g) {
      s.key.epsilon += r->epsilon;
      s.pjump += r->pjump;
      s.accept_rate += r->accept_rate;
      s.rho1_mean += r->rho1_mean;
      s.e_mean += r->e_mean;
      s.ess_mean += r->ess_mean;
      s.seconds += r->seconds;
      s.e_per_second += r->e_per_second;
    }
    s.key.epsilon /= n;
    s.pjump /= n;
    s.accept_rate /= n;
    s.rho1_mean /= n;
    s.e_mean /= n;
    s.ess_mean /= n;
    s.seconds /= n;
    s.e_per_second /= n;
    if (g.size() > 1) {
      double ss = 0.0;
      for (const ResultRow* r : g) ss += (r->e_mean - s.e_mean) * (r->e_mean - s.e_mean);
      s.e_sd = std::sqrt(ss / (n - 1.0));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "target,kernel,epsilon,tuned,c,d,burnin,iterations,seed,replicate,pjump,accept_rate,"
         "rho1_mean,E_mean,ess_mean,seconds,E_per_second\n";
  for (const auto& r : rows) {
    out << r.target << ',' << r.kernel << ',' << format_number(r.epsilon) << ','
        << (r.tuned ? 1 : 0) << ',' << format_number(r.c) << ',' << r.d << ',' << r.burnin << ',' << r.iterations << ','
        << r.seed << ',' << r.replicate << ',' << format_number(r.pjump) << ','
        << format_number(r.accept_rate) << ',' << format_number(r.rho1_mean) << ','
        << format_number(r.e_mean) << ',' << format_number(r.ess_mean) << ','
        << format_number(r.seconds) << ',' << format_number(r.e_per_second) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& summary) {
  out << "target,kernel,epsilon,tuned,c,d,burnin,iterations,replicates,pjump,accept_rate,rho1_mean,"
         "E_mean,E_sd,ess_mean,seconds,E_per_second\n";
  for (const auto& s : summary) {
    out << s.key.target << ',' << s.key.kernel << ',' << format_number(s.key.epsilon) << ','
        << (s.key.tuned ? 1 : 0) << ',' << format_number(s.key.c) << ',' << s.key.d << ',' << s.key.burnin << ','
        << s.key.iterations << ',' << s.replicates << ',' << format_number(s.pjump) << ','
        << format_number(s.accept_rate) << ',' << format_number(s.rho1_mean) << ','
        << format_number(s.e_mean) << ',' << format_number(s.e_sd) << ','
        << format_number(s.ess_mean) << ',' << format_number(s.seconds) << ','
        << format_number(s.e_per_second) << '\n';
  }
}

void write_summary_json(std::ostream& out, const ExperimentConfig& config,
                        const std::vector<SummaryRow>& summary) {
  nlohmann::ordered_json j;
  j["experiment"] = config.experiment;
  j["seed"] = config.seed;
  j["replicates"] = config.replicates;
  nlohmann::ordered_json settings = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config.params.values()) {
    if (k != "threads" && k != "out") settings[k] = v;
  }
  j["settings"] = settings;
  auto& arr = j["summary"] = nlohmann::ordered_json::array();
  for (const auto& s : summary) {
    nlohmann::ordered_json row;
    row["target"] = s.key.target;
    row["kernel"] = s.key.kernel;
    row["epsilon"] = s.key.epsilon;
    row["tuned"] = s.key.tuned;
    row["c"] = s.key.c;
    row["d"] = s.key.d;
    row["burnin"] = s.key.burnin;
    row["iterations"] = s.key.iterations;
    row["replicates"] = s.replicates;
    row["pjump"] = s.pjump;
    row["accept_rate"] = s.accept_rate;
    row["rho1_mean"] = s.rho1_mean;
    row["E_mean"] = s.e_mean;
    row["E_sd"] = s.e_sd;
    row["ess_mean"] = s.ess_mean;
    row["seconds"] = s.seconds;
    row["E_per_second"] = s.e_per_second;
    arr.push_back(std::move(row));
  }
  out << j.dump(2) << '\n';
}

MarginalDensity marginal_density(std::span<const double> values, std::size_t bins) {
  if (bins < 10) throw InvalidArgument("marginal density needs at least 10 bins");
  MarginalDensity m;
  if (values.empty()) {
    m.degenerate = true;
    return m;
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  if (!(hi > lo) || !(m.sd > 0.0)) {
    m.degenerate = true;
    return m;
  }

  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<double> counts(bins, 0.0);
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    if (b >= bins) b = bins - 1;
    counts[b] += 1.0;
  }
  m.left.resize(bins);
  m.right.resize(bins);
  m.density.resize(bins);
  m.normal.resize(bins);
  const double norm = 1.0 / (m.sd * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t b = 0; b < bins; ++b) {
    m.left[b] = lo + width * static_cast<double>(b);
    m.right[b] = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
    m.density[b] = counts[b] / (n * width);
    const double zc = (0.5 * (m.left[b] + m.right[b]) - m.mean) / m.sd;
    m.normal[b] = norm * std::exp(-0.5 * zc * zc);
  }
  return m;
}

std::vector<std::string> emit_marginals(const Matrix& samples, std::size_t bins,
                                        const std::string& dir,
                                        const std::vector<std::string>& names) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  nlohmann::ordered_json meta = nlohmann::ordered_json::array();
  std::vector<double> column(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index k = 0; k < samples.cols(); ++k) {
    for (Eigen::Index t = 0; t < samples.rows(); ++t) column[static_cast<std::size_t>(t)] = samples(t, k);
    const MarginalDensity m = marginal_density(column, bins);
    const std::string file = dir + "/marginal_" + std::to_string(k) + ".csv";
    std::ofstream out(file);
    out << "left,right,density,normal\n";
    for (std::size_t b = 0; b < m.density.size(); ++b) {
      out << format_number(m.left[b]) << ',' << format_number(m.right[b]) << ','
          << format_number(m.density[b]) << ',' << format_number(m.normal[b]) << '\n';
    }
    files.push_back(file);

    nlohmann::ordered_json entry;
    entry["coordinate"] = k;
    entry["name"] = static_cast<std::size_t>(k) < names.size() ? names[static_cast<std::size_t>(k)]
                                                              : "x" + std::to_string(k);
    entry["file"] = "marginal_" + std::to_string(k) + ".csv";
    entry["mean"] = m.mean;
    entry["sd"] = m.sd;
    entry["DegenerateSeries"] = m.degenerate;
    meta.push_back(std::move(entry));
  }
  const std::string meta_file = dir + "/marginals.json";
  std::ofstream(meta_file) << meta.dump(2) << '\n';
  files.push_back(meta_file);
  return files;
}

Matrix inverse_wishart_identity(std::size_t d, double nu, RandomStream& rng) {
  if (nu <= static_cast<double>(d) - 1.0) throw InvalidArgument("inverse-Wishart needs nu > d - 1");
  const auto n = static_cast<Eigen::Index>(d);
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::chi_squared_distribution<double> chi(nu - static_cast<double>(i));
    a(i, i) = std::sqrt(chi(rng.engine()));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.gaussian();
  }
  // W = A A^T ~ Wishart(nu, I); Sigma = W^-1
  return symmetrize(invert_spd(a * a.transpose()));
}

std::pair<double, double> oned_sampled_moments(int target_id) {
  const TargetPtr target = make_oned_target(target_id);
  const double lo = -40.0;
  const double hi = 40.0;
  const std::size_t n = 400001;
  const double h = (hi - lo) / static_cast<double>(n - 1);
  std::vector<double> lp(n);
  double peak = -INFINITY;
  Vector x(1);
  for (std::size_t i = 0; i < n; ++i) {
    x[0] = lo + h * static_cast<double>(i);
    lp[i] = target->log_density(x);
    if (std::isfinite(lp[i])) peak = std::max(peak, lp[i]);
  }
  double z = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(lp[i])) continue;
    const double w = std::exp(lp[i] - peak) * ((i == 0 || i + 1 == n) ? 0.5 : 1.0);
    const double xi = lo + h * static_cast<double>(i);
    z += w;
    m1 += w * xi;
    m2 += w * xi * xi;
  }
  const double mean = m1 / z;
  return {mean, m2 / z - mean * mean};
}

}  // namespace mirror
