#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nuts/chain.hpp"
#include "nuts/hamiltonian.hpp"
#include "nuts/model.hpp"
#include "nuts/rng.hpp"

namespace nuts {

struct NutsConfig {
  int iterations = 2000;
  int adapt_iterations = 1000;
  double delta = 0.6;
  int max_depth = 10;
  double delta_max = 1000.0;
  /// Initial step size; 0 runs the step-size search. With no adaptation
  /// this is the fixed step size.
  double step_size = 0.0;
  /// Use explicit candidate sets instead of the recursive sampler.
  bool naive = false;

  void validate() const;
};

inline constexpr int kNaiveMaxDepth = 16;

/// True while neither trajectory end is moving back towards the other.
bool uturn_stop(const PhaseState& minus, const PhaseState& plus);

/// False when the state's joint log density falls more than `delta_max`
/// below the slice level, or is non-finite.
bool divergence_stop(double log_u, const PhaseState& state, double delta_max);

/// Result of building one balanced subtree.
struct TreeOutcome {
  PhaseState minus;
  PhaseState plus;
  /// Selected state; its momentum is not meaningful.
  PhaseState proposal;
  std::int64_t n = 0;
  bool s = true;
  double alpha = 0.0;
  std::int64_t n_alpha = 0;
};

/// Work counters shared by one trajectory's recursion.
struct TreeCounters {
  std::int64_t grads = 0;
  int live_states = 0;
  int peak_states = 0;
  bool divergent = false;
};

/**
 * Builds a depth-`depth` subtree of 2^depth leapfrog steps in direction
 * `direction` starting from `state`. `joint0` is the joint log density
 * of the iteration's initial state. The second half is skipped as soon
 * as the first half stops.
 */
TreeOutcome build_tree(const TargetModel& model, const PhaseState& state, double log_u,
                       int direction, int depth, double step_size, double joint0,
                       double delta_max, RngStream& rng, TreeCounters& counters);

struct NutsStep {
  PhaseState state;
  int tree_depth = 0;
  std::int64_t n_states = 1;
  std::int64_t n_admissible = 1;
  double accept_stat = 0.0;
  std::int64_t grads = 0;
  bool divergent = false;
  bool moved = false;
  Termination termination = Termination::none;
  /// Peak number of phase states held by the recursion.
  int peak_states = 0;
};

NutsStep nuts_iteration(const TargetModel& model, const PhaseState& current, double step_size,
                        const NutsConfig& config, RngStream& rng);

/// Explicit trajectory with its candidate set.
struct NaiveTrajectory {
  /// Slice-admissible states accepted into the candidate set; element 0 is
  /// the initial state.
  std::vector<PhaseState> candidates;
  PhaseState minus;
  PhaseState plus;
  int depth = 0;
  std::int64_t grads = 0;
  std::int64_t n_states = 1;
  /// Summed acceptance statistic over the final doubling.
  double alpha = 0.0;
  std::int64_t n_alpha = 0;
  bool divergent = false;
  Termination termination = Termination::none;
};

/// Grows a trajectory from `start` with directions from `next_direction`,
/// building full subtrees and storing every candidate state.
NaiveTrajectory naive_trajectory(const TargetModel& model, const PhaseState& start, double log_u,
                                 double step_size, int max_depth, double delta_max,
                                 const std::function<int()>& next_direction);

struct NaiveStep {
  PhaseState state;
  double log_u = 0.0;
  NaiveTrajectory trajectory;
};

/// Throws ConfigError when `config.max_depth` exceeds 16.
NaiveStep naive_nuts_iteration(const TargetModel& model, const PhaseState& current,
                               double step_size, const NutsConfig& config, RngStream& rng);

/// NUTS with dual-averaging step-size adaptation over the first
/// `adapt_iterations` iterations.
ChainOutput nuts_run(const TargetModel& model, const VectorXd& theta0, const NutsConfig& config,
                     RngStream& rng);

}  // namespace nuts
