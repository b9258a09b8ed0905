#pragma once

#include <cstdint>

#include "nuts/chain.hpp"
#include "nuts/hamiltonian.hpp"
#include "nuts/model.hpp"
#include "nuts/rng.hpp"

namespace nuts {

/**
 * HMC settings. Two modes:
 *  - fixed: `adapt_iterations == 0`, `step_size > 0`, `num_steps >= 1`;
 *  - adaptive: `adapt_iterations > 0`, target `delta` and simulation
 *    length `sim_length`; the number of steps per iteration is
 *    max(1, round(sim_length / eps)).
 */
struct HmcConfig {
  int iterations = 2000;
  int adapt_iterations = 1000;
  double delta = 0.65;
  double sim_length = 1.0;
  double step_size = 0.0;
  int num_steps = 0;
  /// Upper bound on leapfrog steps per iteration in adaptive mode.
  int max_steps = 1 << 16;

  bool fixed() const { return adapt_iterations == 0; }
  void validate() const;
};

struct HmcStep {
  PhaseState state;  // next position with cached density; momentum unspecified
  double accept_prob = 0.0;
  std::int64_t grads = 0;
  bool accepted = false;
  bool divergent = false;
};

/// One Metropolis-corrected trajectory from a cached state (L gradients).
HmcStep hmc_iteration(const TargetModel& model, const PhaseState& current, double step_size,
                      int num_steps, RngStream& rng);
/// As above from a bare position (L + 1 gradients).
HmcStep hmc_iteration(const TargetModel& model, const VectorXd& theta, double step_size,
                      int num_steps, RngStream& rng);

/// max(1, round(sim_length / eps)) with halves rounded away from zero,
/// clamped to `max_steps`.
int hmc_num_steps(double sim_length, double step_size, int max_steps = 1 << 16);

ChainOutput hmc_run(const TargetModel& model, const VectorXd& theta0, const HmcConfig& config,
                    RngStream& rng);

}  // namespace nuts
