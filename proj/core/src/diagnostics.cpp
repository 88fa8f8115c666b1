#include "mirror/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "mirror/errors.hpp"

namespace mirror {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Biased autocovariances gamma_0..gamma_max_lag of the demeaned series.
std::vector<double> autocovariances(std::span<const double> x, std::size_t max_lag) {
  const std::size_t n = x.size();
  const double m = mean_of(x);
  std::vector<double> centred(n);
  for (std::size_t i = 0; i < n; ++i) centred[i] = x[i] - m;
  std::vector<double> acov(max_lag + 1, 0.0);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    double s = 0.0;
    const double* a = centred.data();
    const double* b = centred.data() + k;
    const std::size_t len = n - k;
    for (std::size_t i = 0; i < len; ++i) s += a[i] * b[i];
    acov[k] = s / static_cast<double>(n);
  }
  return acov;
}

void require_epsilon(double epsilon) {
  if (!(epsilon > 0.0)) throw NonPositiveEpsilon("epsilon must be positive");
}

}  // namespace

double autocorrelation(std::span<const double> series, std::size_t lag) {
  if (series.size() <= lag + 1) throw DegenerateSeries("series too short for the requested lag");
  const auto acov = autocovariances(series, lag);
  if (!(acov[0] > 0.0)) throw DegenerateSeries("series has zero variance");
  return acov[lag] / acov[0];
}

EssEstimate effective_sample_size(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 100) throw DegenerateSeries("effective_sample_size needs at least 100 values");
  const std::size_t order_max =
      std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::floor(10.0 * std::log10(static_cast<double>(n)))));
  const auto r = autocovariances(series, order_max);
  if (!(r[0] > 0.0)) throw DegenerateSeries("series has zero variance");

  // Levinson-Durbin recursion; keep the coefficients of every order so the
  // AIC-selected one can be recovered.
  std::vector<std::vector<double>> coefs(order_max + 1);
  std::vector<double> vars(order_max + 1);
  vars[0] = r[0];
  std::vector<double> phi;
  for (std::size_t k = 1; k <= order_max; ++k) {
    double num = r[k];
    for (std::size_t j = 1; j < k; ++j) num -= phi[j - 1] * r[k - j];
    const double reflection = num / vars[k - 1];
    std::vector<double> next(k);
    for (std::size_t j = 1; j < k; ++j) next[j - 1] = phi[j - 1] - reflection * phi[k - j - 1];
    next[k - 1] = reflection;
    phi = std::move(next);
    coefs[k] = phi;
    vars[k] = vars[k - 1] * (1.0 - reflection * reflection);
    if (!(vars[k] > 0.0)) {
      // Perfectly predictable at this order; stop extending.
      coefs.resize(k);
      vars.resize(k);
      break;
    }
  }

  std::size_t best = 0;
  double best_aic = INFINITY;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    const double aic = static_cast<double>(n) * std::log(vars[k]) + 2.0 * static_cast<double>(k);
    if (aic < best_aic) {
      best_aic = aic;
      best = k;
    }
  }

  const double var_pred = vars[best] * static_cast<double>(n) / static_cast<double>(n - (best + 1));
  double coef_sum = 0.0;
  for (double a : coefs[best]) coef_sum += a;
  const double denom = 1.0 - coef_sum;
  const double f0 = var_pred / (denom * denom);
  const double sample_var = r[0] * static_cast<double>(n) / static_cast<double>(n - 1);

  EssEstimate out;
  out.ar_order = best;
  out.spectral_density_zero = f0;
  out.efficiency = sample_var / f0;
  out.ess = out.efficiency * static_cast<double>(n);
  return out;
}

double batch_means_ess(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 100) throw DegenerateSeries("batch_means_ess needs at least 100 values");
  const auto batches = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t size = n / batches;
  const std::size_t used = batches * size;
  const auto head = series.first(used);
  const double m = mean_of(head);
  double var = 0.0;
  for (double v : head) var += (v - m) * (v - m);
  var /= static_cast<double>(used - 1);
  if (!(var > 0.0)) throw DegenerateSeries("series has zero variance");
  double bvar = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const double bm = mean_of(head.subspan(b * size, size));
    bvar += (bm - m) * (bm - m);
  }
  bvar /= static_cast<double>(batches - 1);
  const double f0 = bvar * static_cast<double>(size);
  return static_cast<double>(used) * var / f0;
}

double pjump_rw_analytic(double epsilon) {
  require_epsilon(epsilon);
  return 2.0 / std::numbers::pi * std::atan(2.0 / epsilon);
}

double pjump_mala_analytic(double epsilon) {
  require_epsilon(epsilon);
  const double e = epsilon;
  const double e2 = e * e;
  // arccot(x) = atan(1/x) for x > 0
  const double acot_term = std::atan(4.0 / (e * (e2 + 2.0)));
  const double s = acot_term + std::atan(2.0 / e - e / 2.0) + std::atan(e / 2.0) +
                   std::atan(4.0 * e / (e2 * e2 - 2.0 * e2 + 8.0));
  return s / std::numbers::pi;
}

DiagnosticsReport summarize(const Matrix& samples, double mean_alpha, double wall_time) {
  DiagnosticsReport rep;
  const auto t = static_cast<std::size_t>(samples.rows());
  const auto d = static_cast<std::size_t>(samples.cols());
  rep.iterations = t;
  rep.pjump = mean_alpha;
  rep.wall_time = wall_time;
  rep.rho1.resize(d);
  rep.efficiency.resize(d);
  rep.ess.resize(d);
  rep.degenerate.assign(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    std::span<const double> col(samples.col(static_cast<Eigen::Index>(j)).data(), t);
    try {
      rep.rho1[j] = autocorrelation(col, 1);
      const auto e = effective_sample_size(col);
      rep.efficiency[j] = e.efficiency;
      rep.ess[j] = e.ess;
    } catch (const DegenerateSeries&) {
      rep.degenerate[j] = true;
      rep.rho1[j] = 1.0;
      rep.efficiency[j] = 0.0;
      rep.ess[j] = 0.0;
    }
  }
  if (d > 0) {
    const double dd = static_cast<double>(d);
    rep.rho1_mean = std::accumulate(rep.rho1.begin(), rep.rho1.end(), 0.0) / dd;
    rep.efficiency_mean = std::accumulate(rep.efficiency.begin(), rep.efficiency.end(), 0.0) / dd;
    rep.ess_mean = std::accumulate(rep.ess.begin(), rep.ess.end(), 0.0) / dd;
  }
  return rep;
}

DiagnosticsReport summarize(const Matrix& samples, std::span<const double> alphas, double wall_time) {
  const double mean_alpha =
      alphas.empty() ? 0.0 : std::accumulate(alphas.begin(), alphas.end(), 0.0) / static_cast<double>(alphas.size());
  return summarize(samples, mean_alpha, wall_time);
}

}  // namespace mirror
