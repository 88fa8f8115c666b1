#include "mirror/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "mirror/errors.hpp"

namespace mirror {

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::RW: return "RW";
    case KernelKind::Mirror: return "Mirror";
    case KernelKind::MALA: return "MALA";
    case KernelKind::MirrorMALA: return "MirrorMALA";
    case KernelKind::HMC: return "HMC";
    case KernelKind::MirrorHMC: return "MirrorHMC";
  }
  return "unknown";
}

KernelKind parse_kernel_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "rw") return KernelKind::RW;
  if (lower == "mirror") return KernelKind::Mirror;
  if (lower == "mala") return KernelKind::MALA;
  if (lower == "mirrormala") return KernelKind::MirrorMALA;
  if (lower == "hmc") return KernelKind::HMC;
  if (lower == "mirrorhmc") return KernelKind::MirrorHMC;
  throw InvalidKernelConfig("unknown kernel '" + std::string(name) + "'");
}

KernelKind KernelConfig::kind() const {
  switch (base) {
    case BaseKernel::RandomWalk: return mirrored ? KernelKind::Mirror : KernelKind::RW;
    case BaseKernel::Langevin: return mirrored ? KernelKind::MirrorMALA : KernelKind::MALA;
    case BaseKernel::Hamiltonian: return mirrored ? KernelKind::MirrorHMC : KernelKind::HMC;
  }
  return KernelKind::RW;
}

const Vector& KernelConfig::centre() const {
  if (mirror_centre) return *mirror_centre;
  if (preconditioner) return preconditioner->mu_star;
  throw MissingPreconditioner("mirrored kernel needs mu* (preconditioner or explicit centre)");
}

void KernelConfig::validate(std::size_t dim) const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidKernelConfig("epsilon must be positive and finite");
  }
  if (!(c > 0.0) || !std::isfinite(c)) throw InvalidKernelConfig("c must be positive and finite");
  if (leapfrog_steps < 1) throw InvalidKernelConfig("leapfrog steps must be at least 1");
  const auto d = static_cast<Eigen::Index>(dim);
  if (preconditioner && (preconditioner->mu_star.size() != d || preconditioner->chol_lower.rows() != d)) {
    throw InvalidKernelConfig("preconditioner dimension does not match target");
  }
  if (mirrored) {
    if (centre().size() != d) throw InvalidKernelConfig("mirror centre dimension mismatch");
    if (base == BaseKernel::Hamiltonian && c != 1.0) {
      throw InvalidKernelConfig("MirrorHMC requires c = 1 (the reflection must be an involution)");
    }
  }
}

KernelConfig make_kernel(KernelKind kind, double epsilon,
                         std::shared_ptr<const MomentEstimate> preconditioner, double c,
                         int leapfrog_steps) {
  KernelConfig k;
  switch (kind) {
    case KernelKind::RW: k.base = BaseKernel::RandomWalk; break;
    case KernelKind::Mirror: k.base = BaseKernel::RandomWalk; k.mirrored = true; break;
    case KernelKind::MALA: k.base = BaseKernel::Langevin; break;
    case KernelKind::MirrorMALA: k.base = BaseKernel::Langevin; k.mirrored = true; break;
    case KernelKind::HMC: k.base = BaseKernel::Hamiltonian; break;
    case KernelKind::MirrorHMC: k.base = BaseKernel::Hamiltonian; k.mirrored = true; break;
  }
  k.epsilon = epsilon;
  k.c = c;
  k.leapfrog_steps = leapfrog_steps;
  k.preconditioner = std::move(preconditioner);
  return k;
}

KernelConfig mirrorize(KernelConfig base, Vector mu_star, double c) {
  base.mirrored = true;
  base.mirror_centre = std::move(mu_star);
  base.c = c;
  return base;
}

namespace {

bool all_finite(const Vector& v) { return v.allFinite(); }

// out = m(x) for mirrored kernels, x otherwise.
void drift_point_into(const KernelConfig& k, const Vector& x, Vector& out) {
  if (!k.mirrored) {
    out = x;
    return;
  }
  const Vector& mu = k.centre();
  out = mu + k.c * (mu - x);
}

// out = eps^2/2 Sigma* g
void langevin_drift_into(const KernelConfig& k, const Vector& g, Vector& out) {
  const double half_eps2 = 0.5 * k.epsilon * k.epsilon;
  if (k.preconditioner) {
    out.noalias() = k.preconditioner->sigma_star * g;
    out *= half_eps2;
  } else {
    out = half_eps2 * g;
  }
}

// Residual to - mean(from). For mirrored kernels it is written as
// (to - mu) + c (from - mu) - drift so that with c = 1 the forward and
// backward residuals are computed by the same floating-point operations.
void residual_into(const KernelConfig& k, const Vector& from, const Vector& to,
                   const Vector* drift_gradient, Vector& drift, Vector& out) {
  if (k.mirrored) {
    const Vector& mu = k.centre();
    out = (to - mu) + k.c * (from - mu);
  } else {
    out = to - from;
  }
  if (k.base == BaseKernel::Langevin) {
    langevin_drift_into(k, *drift_gradient, drift);
    out -= drift;
  }
}

double gaussian_log_kernel(const KernelConfig& k, Vector& residual) {
  if (k.preconditioner) {
    k.preconditioner->chol_lower.triangularView<Eigen::Lower>().solveInPlace(residual);
  }
  return -0.5 * residual.squaredNorm() / (k.epsilon * k.epsilon);
}

struct Scratch {
  Vector drift;
  Vector resid;
  Vector point;
  Vector z;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

StepOutcome hmc_transition(const KernelConfig& k, ChainState& state, const TargetDensity& target,
                           RandomStream& rng);

}  // namespace

Vector drift_point(const KernelConfig& kernel, const Vector& x) {
  Vector out;
  drift_point_into(kernel, x, out);
  return out;
}

Vector proposal_mean(const KernelConfig& kernel, const Vector& x, const TargetDensity& target) {
  if (kernel.base == BaseKernel::Hamiltonian) {
    throw InvalidKernelConfig("HMC proposals have no Gaussian mean");
  }
  Vector mean = drift_point(kernel, x);
  if (kernel.base == BaseKernel::Langevin) {
    Vector g;
    target.log_density_gradient(mean, g);
    if (!all_finite(g)) throw NonFiniteGradient("gradient is not finite at the drift point");
    Vector drift;
    langevin_drift_into(kernel, g, drift);
    mean += drift;
  }
  return mean;
}

double log_proposal_density(const KernelConfig& kernel, const Vector& from, const Vector& to,
                            const TargetDensity& target) {
  if (kernel.base == BaseKernel::Hamiltonian) {
    throw InvalidKernelConfig("HMC proposals have no Gaussian density");
  }
  Vector g;
  if (kernel.base == BaseKernel::Langevin) {
    target.log_density_gradient(drift_point(kernel, from), g);
  }
  Vector drift;
  Vector resid;
  residual_into(kernel, from, to, &g, drift, resid);
  return gaussian_log_kernel(kernel, resid);
}

ChainState init_chain(const KernelConfig& kernel, const TargetDensity& target, Vector start) {
  if (static_cast<std::size_t>(start.size()) != target.dimension()) {
    throw DimensionMismatch("start point dimension does not match target");
  }
  kernel.validate(target.dimension());
  ChainState s;
  s.position = std::move(start);
  s.log_density = target.log_density(s.position);
  if (kernel.base == BaseKernel::Langevin) {
    target.log_density_gradient(drift_point(kernel, s.position), s.drift_gradient);
    if (!all_finite(s.drift_gradient)) {
      throw NonFiniteGradient("gradient is not finite at the starting drift point");
    }
    s.has_gradient = true;
  }
  return s;
}

void propose(const KernelConfig& k, const ChainState& state, const TargetDensity& target,
             RandomStream& rng, Proposal& out) {
  if (k.base == BaseKernel::Hamiltonian) {
    throw InvalidKernelConfig("propose: HMC kernels use hmc_step");
  }
  const bool langevin = k.base == BaseKernel::Langevin;
  if (langevin && (!state.has_gradient || !all_finite(state.drift_gradient))) {
    throw NonFiniteGradient("gradient is not finite at the current drift point");
  }
  Scratch& s = scratch();
  const auto d = state.position.size();

  // candidate = a(x) + drift + eps L z
  s.z.resize(d);
  rng.fill_gaussian(s.z);
  drift_point_into(k, state.position, out.candidate);
  if (langevin) {
    langevin_drift_into(k, state.drift_gradient, s.drift);
    out.candidate += s.drift;
  }
  if (k.preconditioner) {
    s.point.noalias() = k.preconditioner->chol_lower.triangularView<Eigen::Lower>() * s.z;
    out.candidate += k.epsilon * s.point;
  } else {
    out.candidate += k.epsilon * s.z;
  }

  out.valid = true;
  if (langevin) {
    if (k.mirrored) {
      out.candidate_log_density = target.log_density(out.candidate);
      drift_point_into(k, out.candidate, s.point);
      target.log_density_gradient(s.point, out.candidate_drift_gradient);
    } else {
      out.candidate_log_density = target.log_density_gradient(out.candidate, out.candidate_drift_gradient);
    }
    if (!all_finite(out.candidate_drift_gradient)) out.valid = false;
  } else {
    out.candidate_log_density = target.log_density(out.candidate);
  }
  if (std::isnan(out.candidate_log_density) || out.candidate_log_density == -INFINITY) {
    out.valid = false;
  }
  if (!out.valid) {
    out.log_q_forward = 0.0;
    out.log_q_backward = 0.0;
    return;
  }

  residual_into(k, state.position, out.candidate, &state.drift_gradient, s.drift, s.resid);
  out.log_q_forward = gaussian_log_kernel(k, s.resid);
  residual_into(k, out.candidate, state.position, &out.candidate_drift_gradient, s.drift, s.resid);
  out.log_q_backward = gaussian_log_kernel(k, s.resid);
}

Proposal propose(const KernelConfig& kernel, const ChainState& state, const TargetDensity& target,
                 RandomStream& rng) {
  Proposal p;
  propose(kernel, state, target, rng, p);
  return p;
}

double acceptance_probability(double log_target_new, double log_target_old, double log_q_backward,
                              double log_q_forward) {
  const double log_ratio = log_target_new - log_target_old + log_q_backward - log_q_forward;
  if (std::isnan(log_ratio)) return 0.0;
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

StepOutcome mh_step(const KernelConfig& kernel, ChainState& state, const TargetDensity& target,
                    RandomStream& rng) {
  if (kernel.base == BaseKernel::Hamiltonian) return hmc_transition(kernel, state, target, rng);

  thread_local Proposal prop;
  propose(kernel, state, target, rng, prop);
  StepOutcome out;
  out.alpha = prop.valid ? acceptance_probability(prop.candidate_log_density, state.log_density,
                                                  prop.log_q_backward, prop.log_q_forward)
                         : 0.0;
  const double u = rng.uniform();
  out.accepted = u < out.alpha;
  if (out.accepted) {
    state.position.swap(prop.candidate);
    state.log_density = prop.candidate_log_density;
    if (kernel.base == BaseKernel::Langevin) {
      state.drift_gradient.swap(prop.candidate_drift_gradient);
      state.has_gradient = true;
    }
    ++state.accept_count;
  }
  ++state.iterations;
  state.alpha_sum += out.alpha;
  return out;
}

void leapfrog(const TargetDensity& target, double epsilon, int steps, Vector& position,
              Vector& momentum) {
  Vector grad;
  target.log_density_gradient(position, grad);
  for (int s = 0; s < steps; ++s) {
    momentum += 0.5 * epsilon * grad;
    position += epsilon * momentum;
    target.log_density_gradient(position, grad);
    momentum += 0.5 * epsilon * grad;
  }
}

namespace {

// Integrates in whitened momentum w = L^T p, where L L^T = M^-1:
// kick w += h L^T grad, drift x += eps L w, kinetic energy |w|^2 / 2.
// For MirrorHMC the position is reflected through the centre once, at a
// random point of the trajectory; reflection and leapfrog both preserve
// volume, so the plain energy ratio is exact.
StepOutcome hmc_run(ChainState& state, const TargetDensity& target, double epsilon, int steps,
                    const Matrix* chol, const Vector* centre, RandomStream& rng) {
  const auto d = state.position.size();
  Vector w(d);
  rng.fill_gaussian(w);
  const double h0 = -state.log_density + 0.5 * w.squaredNorm();

  Vector x = state.position;
  Vector grad;
  Vector tmp(d);
  double lp = target.log_density_gradient(x, grad);

  auto kick = [&](double h) {
    if (chol) {
      tmp.noalias() = chol->transpose().triangularView<Eigen::Upper>() * grad;
      w += h * tmp;
    } else {
      w += h * grad;
    }
  };
  auto drift = [&](double h) {
    if (chol) {
      tmp.noalias() = chol->triangularView<Eigen::Lower>() * w;
      x += h * tmp;
    } else {
      x += h * w;
    }
  };
  auto refresh = [&] { lp = target.log_density_gradient(x, grad); };
  auto full_step = [&] {
    kick(0.5 * epsilon);
    drift(epsilon);
    refresh();
    kick(0.5 * epsilon);
  };

  if (!centre) {
    for (int s = 0; s < steps; ++s) full_step();
  } else {
    // Reflect after k of the L steps, k uniform on 0..L. The reversed map of
    // "reflect after k" is "reflect after L-k", so the uniform mixture is
    // reversible. A fixed midpoint would send x - mu* to -(x - mu*) on a
    // Gaussian whatever the momentum.
    const int k = std::min(steps, static_cast<int>(rng.uniform() * (steps + 1)));
    for (int s = 0; s < k; ++s) full_step();
    x = 2.0 * (*centre) - x;
    refresh();
    for (int s = k; s < steps; ++s) full_step();
  }

  StepOutcome out;
  const bool finite = std::isfinite(lp) && grad.allFinite() && w.allFinite();
  if (finite) {
    const double h1 = -lp + 0.5 * w.squaredNorm();
    out.alpha = acceptance_probability(-h1, -h0, 0.0, 0.0);
  }
  const double u = rng.uniform();
  out.accepted = u < out.alpha;
  if (out.accepted) {
    state.position = std::move(x);
    state.log_density = lp;
    ++state.accept_count;
  }
  ++state.iterations;
  state.alpha_sum += out.alpha;
  return out;
}

StepOutcome hmc_transition(const KernelConfig& k, ChainState& state, const TargetDensity& target,
                           RandomStream& rng) {
  const Matrix* chol = k.preconditioner ? &k.preconditioner->chol_lower : nullptr;
  const Vector* centre = k.mirrored ? &k.centre() : nullptr;
  return hmc_run(state, target, k.epsilon, k.leapfrog_steps, chol, centre, rng);
}

}  // namespace

StepOutcome hmc_step(ChainState& state, const TargetDensity& target, double epsilon, int steps,
                     const Matrix& mass_inverse, RandomStream& rng) {
  if (!(epsilon > 0.0)) throw InvalidKernelConfig("epsilon must be positive");
  if (steps < 1) throw InvalidKernelConfig("leapfrog steps must be at least 1");
  if (mass_inverse.rows() != state.position.size()) {
    throw DimensionMismatch("mass matrix dimension does not match the state");
  }
  Vector g;
  target.log_density_gradient(state.position, g);
  if (!g.allFinite()) throw NonFiniteGradient("gradient is not finite at the current state");
  const Matrix chol = cholesky_lower(mass_inverse);
  const bool identity = mass_inverse.isIdentity(0.0);
  return hmc_run(state, target, epsilon, steps, identity ? nullptr : &chol, nullptr, rng);
}

}  // namespace mirror
