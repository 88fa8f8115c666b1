#include "mirror/glmm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "mirror/errors.hpp"
#include "mirror/random.hpp"
#include "mirror/targets.hpp"

namespace mirror {

namespace {

using Idx = Eigen::Index;

Idx ix(std::size_t v) { return static_cast<Idx>(v); }

// log p(y | eta) without the y-only constant, and d/d eta.
inline double log_lik(GlmmFamily family, double y, double eta, double* residual) {
  if (family == GlmmFamily::PoissonLog) {
    const double mu = std::exp(eta);
    if (residual) *residual = y - mu;
    return y * eta - mu;
  }
  if (residual) {
    const double p = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    *residual = y - p;
  }
  return y * eta - log1p_exp(eta);
}

// Prior log p(xi | W) = -|W^-1 xi|^2 / 2 - sum log W_kk, with u = W^-1 xi.
double xi_prior(const Matrix& w, const Vector& xi, Vector& u) {
  u = w.triangularView<Eigen::Lower>().solve(xi);
  return -0.5 * u.squaredNorm() - w.diagonal().array().log().sum();
}

double subject_data_term(const GlmmSpec& spec, const SubjectData& s, const Vector& beta,
                         const Vector& xi, Vector* residuals) {
  double sum = 0.0;
  if (residuals) residuals->resize(s.y.size());
  for (Idx j = 0; j < s.y.size(); ++j) {
    const double eta = s.x.row(j).dot(beta) + s.z.row(j).dot(xi);
    sum += log_lik(spec.family, s.y[j], eta, residuals ? &(*residuals)[j] : nullptr);
  }
  return sum;
}

std::string key(const ColumnMap& columns, const std::string& logical) {
  const auto it = columns.find(logical);
  return it == columns.end() ? logical : it->second;
}

// Rows grouped by subject label in order of first appearance.
std::vector<std::pair<std::string, std::vector<std::size_t>>> group_rows(const DataTable& t,
                                                                         std::size_t subject_col) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const std::string& label = t.cell(r, subject_col);
    if (label.empty()) throw BadSubjectGrouping("row " + std::to_string(r + 1) + " has no subject id");
    const auto [it, inserted] = index.emplace(label, groups.size());
    if (inserted) groups.push_back({label, {}});
    groups[it->second].second.push_back(r);
  }
  if (groups.empty()) throw SchemaError("input has no rows");
  return groups;
}

void require_constant(const DataTable& t, const std::vector<std::size_t>& rows, std::size_t col,
                      const std::string& subject) {
  const double first = t.number(rows.front(), col);
  for (std::size_t r : rows) {
    if (t.number(r, col) != first) {
      throw BadSubjectGrouping("subject '" + subject + "' has varying '" + t.header()[col] + "'");
    }
  }
}

}  // namespace

std::string to_string(GlmmFamily family) {
  return family == GlmmFamily::PoissonLog ? "poisson" : "bernoulli";
}

GlmmFamily parse_glmm_family(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "poisson" || n == "poisson-log") return GlmmFamily::PoissonLog;
  if (n == "bernoulli" || n == "bernoulli-logit" || n == "logistic") return GlmmFamily::BernoulliLogit;
  throw InvalidArgument("unknown GLMM family '" + name + "'");
}

std::size_t GlmmSpec::observation_count() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += static_cast<std::size_t>(s.y.size());
  return n;
}

BlockPartition GlmmSpec::partition() const {
  std::vector<std::size_t> sizes(subject_count(), random_dim);
  sizes.push_back(fixed_dim + zeta_dim());
  return BlockPartition(std::move(sizes));
}

void GlmmSpec::validate() const {
  if (subjects.empty()) throw InvalidArgument("GLMM needs at least one subject");
  if (fixed_dim == 0 || random_dim == 0) throw InvalidArgument("GLMM needs p >= 1 and r >= 1");
  if (!(prior_sd_beta > 0.0) || !(prior_sd_zeta > 0.0)) throw InvalidArgument("prior sd must be positive");
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const SubjectData& s = subjects[i];
    if (static_cast<std::size_t>(s.x.cols()) != fixed_dim ||
        static_cast<std::size_t>(s.z.cols()) != random_dim || s.x.rows() != s.y.size() ||
        s.z.rows() != s.y.size()) {
      throw DimensionMismatch("subject " + std::to_string(i) + ": design does not match responses");
    }
    for (Idx j = 0; j < s.y.size(); ++j) {
      const double y = s.y[j];
      const bool ok = family == GlmmFamily::PoissonLog ? (y >= 0.0 && y == std::floor(y))
                                                       : (y == 0.0 || y == 1.0);
      if (!ok) {
        throw InvalidArgument("subject " + std::to_string(i) + ": response " + std::to_string(y) +
                              " does not fit the " + to_string(family) + " family");
      }
    }
  }
}

Vector vech_wstar(const Matrix& g) {
  const Matrix w = cholesky_lower(g);
  const Idx r = w.rows();
  Vector zeta(r * (r + 1) / 2);
  Idx k = 0;
  for (Idx col = 0; col < r; ++col) {
    for (Idx row = col; row < r; ++row) {
      zeta[k++] = row == col ? std::log(w(row, col)) : w(row, col);
    }
  }
  return zeta;
}

CovFactor unvech_wstar(const Vector& zeta, std::size_t r) {
  if (static_cast<std::size_t>(zeta.size()) != r * (r + 1) / 2) {
    throw DimensionMismatch("zeta has length " + std::to_string(zeta.size()) + ", expected " +
                            std::to_string(r * (r + 1) / 2));
  }
  CovFactor out;
  out.w = Matrix::Zero(ix(r), ix(r));
  Idx k = 0;
  for (Idx col = 0; col < ix(r); ++col) {
    for (Idx row = col; row < ix(r); ++row) {
      out.w(row, col) = row == col ? std::exp(zeta[k]) : zeta[k];
      ++k;
    }
  }
  out.g = out.w * out.w.transpose();
  return out;
}

GlmmPosterior::GlmmPosterior(GlmmSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  partition_ = spec_.partition();
}

std::string GlmmPosterior::name() const {
  return "glmm-" + to_string(spec_.family) + "-n" + std::to_string(spec_.subject_count());
}

double GlmmPosterior::local_term(std::size_t subject, const Vector& theta, const Matrix& w,
                                 Vector* grad_xi, Vector* residual) const {
  const std::size_t r = spec_.random_dim;
  const SubjectData& s = spec_.subjects[subject];
  const Vector xi = theta.segment(ix(subject * r), ix(r));
  const auto beta = theta.segment(ix(spec_.beta_offset()), ix(spec_.fixed_dim));
  Vector u;
  const double prior = xi_prior(w, xi, u);
  Vector res;
  const double data = subject_data_term(spec_, s, beta, xi, grad_xi || residual ? &res : nullptr);
  evaluations_.fetch_add(static_cast<std::uint64_t>(s.y.size()), std::memory_order_relaxed);
  if (grad_xi) {
    *grad_xi = -w.transpose().triangularView<Eigen::Upper>().solve(u);
    grad_xi->noalias() += s.z.transpose() * res;
  }
  if (residual) *residual = std::move(res);
  return prior + data;
}

double GlmmPosterior::local_log_density(std::size_t subject, const Vector& theta) const {
  const auto w = unvech_wstar(theta.segment(ix(spec_.zeta_offset()), ix(spec_.zeta_dim())),
                              spec_.random_dim)
                     .w;
  return local_term(subject, theta, w, nullptr, nullptr);
}

double GlmmPosterior::local_log_density_gradient(std::size_t subject, const Vector& theta,
                                                 Vector& grad_block) const {
  const auto w = unvech_wstar(theta.segment(ix(spec_.zeta_offset()), ix(spec_.zeta_dim())),
                              spec_.random_dim)
                     .w;
  return local_term(subject, theta, w, &grad_block, nullptr);
}

double GlmmPosterior::global_log_density(const Vector& theta) const {
  const auto beta = theta.segment(ix(spec_.beta_offset()), ix(spec_.fixed_dim));
  const auto zeta = theta.segment(ix(spec_.zeta_offset()), ix(spec_.zeta_dim()));
  const double vb = spec_.prior_sd_beta * spec_.prior_sd_beta;
  const double vz = spec_.prior_sd_zeta * spec_.prior_sd_zeta;
  return -0.5 * beta.squaredNorm() / vb - 0.5 * zeta.squaredNorm() / vz;
}

double GlmmPosterior::log_density_terms(const Vector& theta, std::vector<double>& locals) const {
  if (static_cast<std::size_t>(theta.size()) != dimension()) {
    throw DimensionMismatch("GLMM parameter has the wrong dimension");
  }
  const auto w = unvech_wstar(theta.segment(ix(spec_.zeta_offset()), ix(spec_.zeta_dim())),
                              spec_.random_dim)
                     .w;
  locals.resize(spec_.subject_count());
  double sum = 0.0;
  for (std::size_t i = 0; i < spec_.subject_count(); ++i) {
    locals[i] = local_term(i, theta, w, nullptr, nullptr);
    sum += locals[i];
  }
  return sum + global_log_density(theta);
}

double GlmmPosterior::log_density(const Vector& theta) const {
  thread_local std::vector<double> locals;
  return log_density_terms(theta, locals);
}

double GlmmPosterior::log_density_gradient(const Vector& theta, Vector& grad) const {
  if (static_cast<std::size_t>(theta.size()) != dimension()) {
    throw DimensionMismatch("GLMM parameter has the wrong dimension");
  }
  const std::size_t n = spec_.subject_count();
  const std::size_t r = spec_.random_dim;
  const std::size_t p = spec_.fixed_dim;
  const CovFactor cov =
      unvech_wstar(theta.segment(ix(spec_.zeta_offset()), ix(spec_.zeta_dim())), r);
  const Matrix& w = cov.w;

  grad.setZero(theta.size());
  Matrix uut = Matrix::Zero(ix(r), ix(r));
  Vector grad_xi;
  Vector res;
  Vector u;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += local_term(i, theta, w, &grad_xi, &res);
    grad.segment(ix(i * r), ix(r)) = grad_xi;
    grad.segment(ix(spec_.beta_offset()), ix(p)).noalias() += spec_.subjects[i].x.transpose() * res;
    u = w.triangularView<Eigen::Lower>().solve(theta.segment(ix(i * r), ix(r)));
    uut.noalias() += u * u.transpose();
  }

  // d/dW of sum_i -|W^-1 xi_i|^2/2 - n sum log W_kk is
  // lower(W^-T sum u u^T) - n diag(1/W_kk)
  const Matrix s = w.transpose().triangularView<Eigen::Upper>().solve(uut);
  Idx k = 0;
  for (Idx col = 0; col < ix(r); ++col) {
    for (Idx row = col; row < ix(r); ++row) {
      double gw = s(row, col);
      if (row == col) {
        gw -= static_cast<double>(n) / w(row, col);
        gw *= w(row, col);  // through W_kk = exp(zeta)
      }
      grad[ix(spec_.zeta_offset()) + k] = gw;
      ++k;
    }
  }

  const double vb = spec_.prior_sd_beta * spec_.prior_sd_beta;
  const double vz = spec_.prior_sd_zeta * spec_.prior_sd_zeta;
  grad.segment(ix(spec_.beta_offset()), ix(p)) -= theta.segment(ix(spec_.beta_offset()), ix(p)) / vb;
  grad.segment(ix(spec_.zeta_offset()), ix(spec_.zeta_dim())) -=
      theta.segment(ix(spec_.zeta_offset()), ix(spec_.zeta_dim())) / vz;
  return sum + global_log_density(theta);
}

std::shared_ptr<GlmmPosterior> make_glmm_posterior(GlmmSpec spec) {
  return std::make_shared<GlmmPosterior>(std::move(spec));
}

double glmm_log_posterior(const GlmmSpec& spec, const Vector& theta) {
  return GlmmPosterior(spec).log_density(theta);
}

Vector glmm_grad(const GlmmSpec& spec, const Vector& theta) {
  Vector g;
  GlmmPosterior(spec).log_density_gradient(theta, g);
  return g;
}

double subject_block_logratio(const GlmmSpec& spec, std::size_t subject, const Vector& xi_old,
                              const Vector& xi_new, const Vector& beta, const Vector& zeta) {
  if (subject >= spec.subject_count()) throw InvalidArgument("subject index out of range");
  const Matrix w = unvech_wstar(zeta, spec.random_dim).w;
  const SubjectData& s = spec.subjects[subject];
  Vector u;
  const double new_term = xi_prior(w, xi_new, u) + subject_data_term(spec, s, beta, xi_new, nullptr);
  const double old_term = xi_prior(w, xi_old, u) + subject_data_term(spec, s, beta, xi_old, nullptr);
  return new_term - old_term;
}

GlmmSpec build_epilepsy_model(const DataTable& rows, const ColumnMap& columns) {
  const std::size_t c_subject = rows.column(key(columns, "subject"));
  const std::size_t c_visit = rows.column(key(columns, "visit"));
  const std::size_t c_y = rows.column(key(columns, "y"));
  const std::size_t c_base = rows.column(key(columns, "base"));
  const std::size_t c_trt = rows.column(key(columns, "trt"));
  const std::size_t c_age = rows.column(key(columns, "age"));

  const auto groups = group_rows(rows, c_subject);
  double mean_log_age = 0.0;
  for (const auto& [label, idx] : groups) {
    require_constant(rows, idx, c_base, label);
    require_constant(rows, idx, c_trt, label);
    require_constant(rows, idx, c_age, label);
    const double age = rows.number(idx.front(), c_age);
    if (!(age > 0.0)) throw SchemaError("subject '" + label + "': age must be positive");
    mean_log_age += std::log(age);
  }
  mean_log_age /= static_cast<double>(groups.size());

  GlmmSpec spec;
  spec.family = GlmmFamily::PoissonLog;
  spec.fixed_dim = 6;
  spec.random_dim = 1;
  spec.fixed_names = {"(Intercept)", "Base", "Trt", "Age", "Base:Trt", "V4"};
  for (const auto& [label, idx] : groups) {
    const double base_count = rows.number(idx.front(), c_base);
    if (!(base_count > 0.0)) throw SchemaError("subject '" + label + "': baseline count must be positive");
    const double base = std::log(base_count / 4.0);
    const double trt = rows.number(idx.front(), c_trt);
    const double age = std::log(rows.number(idx.front(), c_age)) - mean_log_age;

    SubjectData s;
    s.label = label;
    s.x.resize(ix(idx.size()), 6);
    s.z = Matrix::Ones(ix(idx.size()), 1);
    s.y.resize(ix(idx.size()));
    std::vector<double> visits;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const double visit = rows.number(idx[j], c_visit);
      if (std::find(visits.begin(), visits.end(), visit) != visits.end()) {
        throw BadSubjectGrouping("subject '" + label + "' repeats visit " + rows.cell(idx[j], c_visit));
      }
      visits.push_back(visit);
      s.x.row(ix(j)) << 1.0, base, trt, age, base * trt, visit == 4.0 ? 1.0 : 0.0;
      s.y[ix(j)] = rows.number(idx[j], c_y);
    }
    spec.subjects.push_back(std::move(s));
  }
  spec.validate();
  return spec;
}

GlmmSpec build_polypharmacy_model(const DataTable& rows, const ColumnMap& columns,
                                  const PolypharmacyOptions& options) {
  if (!(options.age_scale > 0.0)) throw InvalidArgument("age_scale must be positive");
  const std::size_t c_subject = rows.column(key(columns, "subject"));
  const std::size_t c_y = rows.column(key(columns, "y"));
  const std::size_t c_gender = rows.column(key(columns, "gender"));
  const std::size_t c_race = rows.column(key(columns, "race"));
  const std::size_t c_age = rows.column(key(columns, "age"));
  const std::size_t c_inpt = rows.column(key(columns, "inptmhv"));
  // Either a raw visit count or the three indicators.
  const bool raw_mhv = rows.has_column(key(columns, "mhv"));
  std::size_t c_mhv[3] = {0, 0, 0};
  if (raw_mhv) {
    c_mhv[0] = rows.column(key(columns, "mhv"));
  } else {
    c_mhv[0] = rows.column(key(columns, "mhv1"));
    c_mhv[1] = rows.column(key(columns, "mhv2"));
    c_mhv[2] = rows.column(key(columns, "mhv3"));
  }

  GlmmSpec spec;
  spec.family = GlmmFamily::BernoulliLogit;
  spec.fixed_dim = 8;
  spec.random_dim = 1;
  spec.fixed_names = {"(Intercept)", "Gender", "Race", "Age", "MHV_1", "MHV_2", "MHV_3", "INPTMHV"};
  for (const auto& [label, idx] : group_rows(rows, c_subject)) {
    require_constant(rows, idx, c_gender, label);
    require_constant(rows, idx, c_race, label);
    SubjectData s;
    s.label = label;
    s.x.resize(ix(idx.size()), 8);
    s.z = Matrix::Ones(ix(idx.size()), 1);
    s.y.resize(ix(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const std::size_t row = idx[j];
      double m1 = 0.0, m2 = 0.0, m3 = 0.0;
      if (raw_mhv) {
        const double m = rows.number(row, c_mhv[0]);
        m1 = (m >= 1.0 && m <= 5.0) ? 1.0 : 0.0;
        m2 = (m >= 6.0 && m <= 14.0) ? 1.0 : 0.0;
        m3 = m >= 15.0 ? 1.0 : 0.0;
      } else {
        m1 = rows.number(row, c_mhv[0]);
        m2 = rows.number(row, c_mhv[1]);
        m3 = rows.number(row, c_mhv[2]);
      }
      s.x.row(ix(j)) << 1.0, rows.number(row, c_gender), rows.number(row, c_race),
          rows.number(row, c_age) / options.age_scale, m1, m2, m3,
          rows.number(row, c_inpt) > 0.0 ? 1.0 : 0.0;
      s.y[ix(j)] = rows.number(row, c_y);
    }
    spec.subjects.push_back(std::move(s));
  }
  spec.validate();
  return spec;
}

GlmmSpec build_synthetic_model(const DataTable& rows, GlmmFamily family, std::size_t fixed_dim,
                               std::size_t random_dim) {
  if (fixed_dim == 0 || random_dim == 0 || random_dim > fixed_dim) {
    throw InvalidArgument("synthetic GLMM needs 1 <= r <= p");
  }
  const std::size_t c_subject = rows.column("subject");
  const std::size_t c_y = rows.column("y");
  std::vector<std::size_t> c_x;
  for (std::size_t k = 1; k < fixed_dim; ++k) c_x.push_back(rows.column("x" + std::to_string(k)));

  GlmmSpec spec;
  spec.family = family;
  spec.fixed_dim = fixed_dim;
  spec.random_dim = random_dim;
  spec.fixed_names.push_back("(Intercept)");
  for (std::size_t k = 1; k < fixed_dim; ++k) spec.fixed_names.push_back("x" + std::to_string(k));
  for (const auto& [label, idx] : group_rows(rows, c_subject)) {
    SubjectData s;
    s.label = label;
    s.x.resize(ix(idx.size()), ix(fixed_dim));
    s.y.resize(ix(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      s.x(ix(j), 0) = 1.0;
      for (std::size_t k = 1; k < fixed_dim; ++k) s.x(ix(j), ix(k)) = rows.number(idx[j], c_x[k - 1]);
      s.y[ix(j)] = rows.number(idx[j], c_y);
    }
    s.z = s.x.leftCols(ix(random_dim));
    spec.subjects.push_back(std::move(s));
  }
  spec.validate();
  return spec;
}

SyntheticGlmm generate_synthetic_glmm(GlmmFamily family, std::size_t n, std::size_t n_i,
                                      const Vector& beta_true, const Vector& zeta_true,
                                      std::uint64_t seed) {
  if (n == 0 || n_i == 0) throw InvalidArgument("synthetic GLMM needs n >= 1 and n_i >= 1");
  const std::size_t p = static_cast<std::size_t>(beta_true.size());
  std::size_t r = 0;
  while ((r + 1) * (r + 2) / 2 <= static_cast<std::size_t>(zeta_true.size())) ++r;
  if (r == 0 || r * (r + 1) / 2 != static_cast<std::size_t>(zeta_true.size())) {
    throw InvalidArgument("zeta length is not r(r+1)/2");
  }
  if (p < r) throw InvalidArgument("need at least r fixed effects");
  const Matrix w = unvech_wstar(zeta_true, r).w;

  std::vector<std::string> header = {"subject", "visit", "y"};
  for (std::size_t k = 1; k < p; ++k) header.push_back("x" + std::to_string(k));
  SyntheticGlmm out;
  out.rows = DataTable(header);
  out.beta = beta_true;
  out.zeta = zeta_true;

  RandomStream rng(seed);
  Vector e(ix(r));
  Vector x(ix(p));
  for (std::size_t i = 0; i < n; ++i) {
    rng.fill_gaussian(e);
    const Vector xi = w * e;
    out.xi.push_back(xi);
    for (std::size_t j = 0; j < n_i; ++j) {
      x[0] = 1.0;
      for (std::size_t k = 1; k < p; ++k) x[ix(k)] = rng.gaussian();
      const double eta = x.dot(beta_true) + x.head(ix(r)).dot(xi);
      double y = 0.0;
      if (family == GlmmFamily::PoissonLog) {
        y = static_cast<double>(std::poisson_distribution<long>(std::exp(eta))(rng.engine()));
      } else {
        const double prob = 1.0 / (1.0 + std::exp(-eta));
        y = rng.uniform() < prob ? 1.0 : 0.0;
      }
      std::vector<std::string> row = {"s" + std::to_string(i + 1), std::to_string(j + 1),
                                      format_number(y)};
      for (std::size_t k = 1; k < p; ++k) row.push_back(format_number(x[ix(k)]));
      out.rows.add_row(std::move(row));
    }
  }
  return out;
}

}  // namespace mirror
