#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "mirror/linalg.hpp"
#include "mirror/moments.hpp"
#include "mirror/random.hpp"
#include "mirror/targets.hpp"

namespace mirror {

enum class BaseKernel { RandomWalk, Langevin, Hamiltonian };

enum class KernelKind { RW, Mirror, MALA, MirrorMALA, HMC, MirrorHMC };

std::string to_string(KernelKind kind);
// Accepts the names produced by to_string, case-insensitively.
KernelKind parse_kernel_kind(std::string_view name);

// Proposal configuration. A mirrored kernel first reflects the current
// state through the centre, m(x) = mu* + c (mu* - x), and then applies the
// base proposal from m(x):
//   RW          x' = x + eps L z
//   Mirror      x' = m(x) + eps L z
//   MALA        x' = x + eps^2/2 Sigma* grad(x) + eps L z
//   MirrorMALA  x' = m(x) + eps^2/2 Sigma* grad(m(x)) + eps L z
// with Sigma* = L L^T from the preconditioner, or the identity when no
// preconditioner is attached.
struct KernelConfig {
  BaseKernel base = BaseKernel::RandomWalk;
  bool mirrored = false;
  double epsilon = 0.5;
  double c = 1.0;
  int leapfrog_steps = 1;
  std::shared_ptr<const MomentEstimate> preconditioner;
  // Overrides preconditioner->mu_star as the reflection centre.
  std::optional<Vector> mirror_centre;

  KernelKind kind() const;

  // Throws InvalidKernelConfig for eps <= 0, c <= 0, L < 1, size
  // mismatches or a MirrorHMC with c != 1; MissingPreconditioner when a
  // mirrored kernel has no centre.
  void validate(std::size_t dim) const;

  const Vector& centre() const;
};

KernelConfig make_kernel(KernelKind kind, double epsilon,
                         std::shared_ptr<const MomentEstimate> preconditioner = nullptr,
                         double c = 1.0, int leapfrog_steps = 1);

// Mirror-type combinator: wraps an RW, MALA or HMC configuration so that
// proposals start from the reflection of the current state through mu_star.
KernelConfig mirrorize(KernelConfig base, Vector mu_star, double c);

struct ChainState {
  Vector position;
  double log_density = 0.0;
  // Gradient of log pi at the drift point: x for MALA, m(x) for MirrorMALA.
  Vector drift_gradient;
  bool has_gradient = false;
  std::size_t iterations = 0;
  std::size_t accept_count = 0;
  double alpha_sum = 0.0;

  double mean_alpha() const { return iterations ? alpha_sum / static_cast<double>(iterations) : 0.0; }
  double accept_rate() const {
    return iterations ? static_cast<double>(accept_count) / static_cast<double>(iterations) : 0.0;
  }
};

// Validates the configuration and fills the cached log-density (and the
// drift gradient for Langevin kernels). Throws NonFiniteGradient if the
// drift gradient at the start is not finite.
ChainState init_chain(const KernelConfig& kernel, const TargetDensity& target, Vector start);

// Reflection m(x) for mirrored kernels, x otherwise.
Vector drift_point(const KernelConfig& kernel, const Vector& x);

// Mean of the Gaussian proposal from x (RW and Langevin families).
Vector proposal_mean(const KernelConfig& kernel, const Vector& x, const TargetDensity& target);

// log q(to | from) up to a constant shared by both directions.
double log_proposal_density(const KernelConfig& kernel, const Vector& from, const Vector& to,
                            const TargetDensity& target);

struct Proposal {
  Vector candidate;
  double log_q_forward = 0.0;
  double log_q_backward = 0.0;
  double candidate_log_density = 0.0;
  Vector candidate_drift_gradient;
  // False when the candidate's log-density or drift gradient is not finite;
  // such candidates are rejected.
  bool valid = true;
};

// Draws a candidate for RW/Langevin kernels. Throws NonFiniteGradient if
// the cached drift gradient of `state` is not finite.
void propose(const KernelConfig& kernel, const ChainState& state, const TargetDensity& target,
             RandomStream& rng, Proposal& out);
Proposal propose(const KernelConfig& kernel, const ChainState& state, const TargetDensity& target,
                 RandomStream& rng);

struct StepOutcome {
  double alpha = 0.0;
  bool accepted = false;
};

// One Metropolis-Hastings transition; dispatches to HMC for Hamiltonian
// kernels. A uniform variate is drawn on every step.
StepOutcome mh_step(const KernelConfig& kernel, ChainState& state, const TargetDensity& target,
                    RandomStream& rng);

// Metropolis acceptance probability from the four log terms.
double acceptance_probability(double log_target_new, double log_target_old, double log_q_backward,
                              double log_q_forward);

// L leapfrog steps with identity mass; modifies position and momentum in place.
void leapfrog(const TargetDensity& target, double epsilon, int steps, Vector& position,
              Vector& momentum);

// Fixed-length HMC transition with momentum p ~ N(0, M) and kinetic energy
// p^T M^-1 p / 2. `mass_inverse` must be SPD.
StepOutcome hmc_step(ChainState& state, const TargetDensity& target, double epsilon, int steps,
                     const Matrix& mass_inverse, RandomStream& rng);

}  // namespace mirror
