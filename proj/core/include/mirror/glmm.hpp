#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mirror/linalg.hpp"
#include "mirror/table.hpp"
#include "mirror/whitening.hpp"

namespace mirror {

enum class GlmmFamily { PoissonLog, BernoulliLogit };

std::string to_string(GlmmFamily family);
GlmmFamily parse_glmm_family(const std::string& name);

// Observations of one subject: rows of x (fixed effects) and z (random
// effects) line up with y.
struct SubjectData {
  Matrix x;
  Matrix z;
  Vector y;
  std::string label;
};

// Parameters are laid out as theta = (xi_1, ..., xi_n, beta, zeta) with
// xi_i of length r, beta of length p and zeta = vech(W*) of length
// r(r+1)/2.
struct GlmmSpec {
  GlmmFamily family = GlmmFamily::PoissonLog;
  std::vector<SubjectData> subjects;
  std::size_t fixed_dim = 0;
  std::size_t random_dim = 1;
  double prior_sd_beta = 10.0;
  double prior_sd_zeta = 10.0;
  std::vector<std::string> fixed_names;

  std::size_t subject_count() const { return subjects.size(); }
  std::size_t zeta_dim() const { return random_dim * (random_dim + 1) / 2; }
  std::size_t parameter_dim() const {
    return subject_count() * random_dim + fixed_dim + zeta_dim();
  }
  std::size_t observation_count() const;
  // Offsets of beta and zeta inside theta.
  std::size_t beta_offset() const { return subject_count() * random_dim; }
  std::size_t zeta_offset() const { return beta_offset() + fixed_dim; }

  // n blocks of size r followed by one block holding (beta, zeta).
  BlockPartition partition() const;

  // DimensionMismatch on inconsistent designs, InvalidArgument when the
  // responses do not fit the family.
  void validate() const;
};

// zeta = vech(W*), where W = chol(G) and W* is W with a log diagonal.
// Columns are stacked: (W*_11, W*_21, ..., W*_r1, W*_22, ...).
Vector vech_wstar(const Matrix& g);

struct CovFactor {
  Matrix w;
  Matrix g;
};
CovFactor unvech_wstar(const Vector& zeta, std::size_t r);

double glmm_log_posterior(const GlmmSpec& spec, const Vector& theta);
Vector glmm_grad(const GlmmSpec& spec, const Vector& theta);

// Change in log p(xi_i | zeta) + sum_j log p(y_ij | beta, xi_i) when xi_i
// moves from xi_old to xi_new. `subject` is zero-based.
double subject_block_logratio(const GlmmSpec& spec, std::size_t subject, const Vector& xi_old,
                              const Vector& xi_new, const Vector& beta, const Vector& zeta);

// Posterior as a block target. Every observation-level likelihood term
// that gets evaluated bumps the evaluation counter.
class GlmmPosterior final : public BlockTarget {
 public:
  explicit GlmmPosterior(GlmmSpec spec);

  const GlmmSpec& spec() const { return spec_; }

  std::size_t dimension() const override { return spec_.parameter_dim(); }
  std::string name() const override;
  double log_density(const Vector& theta) const override;
  double log_density_gradient(const Vector& theta, Vector& grad) const override;

  const BlockPartition& partition() const override { return partition_; }
  double local_log_density(std::size_t subject, const Vector& theta) const override;
  double local_log_density_gradient(std::size_t subject, const Vector& theta,
                                    Vector& grad_block) const override;
  double global_log_density(const Vector& theta) const override;
  double log_density_terms(const Vector& theta, std::vector<double>& locals) const override;

  std::uint64_t evaluations() const { return evaluations_.load(std::memory_order_relaxed); }
  void reset_evaluations() const { evaluations_.store(0, std::memory_order_relaxed); }

 private:
  // Local term of one subject given W; adds the data gradient wrt xi_i
  // and the linear-predictor residuals when the outputs are non-null.
  double local_term(std::size_t subject, const Vector& theta, const Matrix& w, Vector* grad_xi,
                    Vector* residual) const;

  GlmmSpec spec_;
  BlockPartition partition_;
  mutable std::atomic<std::uint64_t> evaluations_{0};
};

std::shared_ptr<GlmmPosterior> make_glmm_posterior(GlmmSpec spec);

// Logical column name -> header name in the input CSV. Missing keys fall
// back to the logical name itself.
using ColumnMap = std::map<std::string, std::string>;

// Epilepsy counts: logical columns subject, visit, y, base (baseline
// 8-week count), trt, age (years). Covariates are Base = log(base/4), Trt,
// Age = log(age) centred at its mean over subjects, Base x Trt and V4 =
// [visit == 4]. Poisson family, random intercept.
GlmmSpec build_epilepsy_model(const DataTable& rows, const ColumnMap& columns = {});

struct PolypharmacyOptions {
  // Age is divided by this before use; 1 keeps it unscaled.
  double age_scale = 1.0;
};

// Polypharmacy: logical columns subject, y, gender, race, age, mhv1, mhv2,
// mhv3, inptmhv. inptmhv is reduced to an indicator of any inpatient visit.
// Bernoulli family, random intercept.
GlmmSpec build_polypharmacy_model(const DataTable& rows, const ColumnMap& columns = {},
                                  const PolypharmacyOptions& options = {});

// Generic schema written by generate_synthetic_glmm: subject, visit, y,
// x1..x{p-1}. The intercept is added; the random-effect design is the
// first r columns of (1, x1, ...).
GlmmSpec build_synthetic_model(const DataTable& rows, GlmmFamily family, std::size_t fixed_dim,
                               std::size_t random_dim);

struct SyntheticGlmm {
  DataTable rows;
  Vector beta;
  Vector zeta;
  std::vector<Vector> xi;
};

// Covariates x_k ~ N(0,1); r is inferred from the length of zeta_true.
SyntheticGlmm generate_synthetic_glmm(GlmmFamily family, std::size_t n, std::size_t n_i,
                                      const Vector& beta_true, const Vector& zeta_true,
                                      std::uint64_t seed);

}  // namespace mirror
