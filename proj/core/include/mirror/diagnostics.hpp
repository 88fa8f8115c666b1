#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mirror/linalg.hpp"

namespace mirror {

// Lag-k sample autocorrelation with the biased (1/n) autocovariance
// normalized by the lag-0 autocovariance. Throws DegenerateSeries when the
// series is constant or too short.
double autocorrelation(std::span<const double> series, std::size_t lag);

struct EssEstimate {
  double ess = 0.0;
  double efficiency = 0.0;          // E = ess / n
  double spectral_density_zero = 0.0;
  std::size_t ar_order = 0;
};

// Effective sample size from the spectral density at frequency zero of a
// Yule-Walker AR fit whose order minimizes AIC over
// 0..min(n-1, floor(10 log10 n)):  E = var(x) / f(0),  f(0) = s^2 / (1 - sum a_k)^2.
// Requires n >= 100.
EssEstimate effective_sample_size(std::span<const double> series);

// Batch-means cross-check of the ESS with floor(sqrt(n)) batches.
double batch_means_ess(std::span<const double> series);

// Closed-form average acceptance probability on N(0,1) with exact moments.
// RW and Mirror (c = 1) share the first curve; MALA and MirrorMALA the second.
double pjump_rw_analytic(double epsilon);
double pjump_mala_analytic(double epsilon);

struct DiagnosticsReport {
  std::vector<double> rho1;
  std::vector<double> efficiency;
  std::vector<double> ess;
  // Coordinates whose series was constant (rho1 reported as 1, E as 0).
  std::vector<bool> degenerate;
  double rho1_mean = 0.0;
  double efficiency_mean = 0.0;
  double ess_mean = 0.0;
  double pjump = 0.0;
  double wall_time = 0.0;
  std::size_t iterations = 0;

  double efficiency_per_second() const { return wall_time > 0.0 ? efficiency_mean / wall_time : 0.0; }
};

// Per-coordinate diagnostics of a T x d sample matrix (one row per draw).
// pjump is the mean of `alphas`.
DiagnosticsReport summarize(const Matrix& samples, std::span<const double> alphas, double wall_time);

// Same, with the mean acceptance probability already reduced.
DiagnosticsReport summarize(const Matrix& samples, double mean_alpha, double wall_time);

}  // namespace mirror
