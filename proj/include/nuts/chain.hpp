#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nuts {

/// Why a NUTS trajectory stopped growing.
enum class Termination : std::uint8_t {
  none,       // not a NUTS iteration
  uturn,      // U-turn across the full trajectory
  subtree,    // a subtree reported a U-turn or divergence
  max_depth,  // depth cap reached
};

const char* to_string(Termination t);

struct IterationStats {
  double accept_stat = 0.0;
  double step_size = 0.0;
  int tree_depth = 0;
  /// Phase states on the final trajectory, including the initial one.
  std::int64_t n_states = 1;
  std::int64_t grads = 0;
  bool accepted = false;
  bool divergent = false;
  Termination termination = Termination::none;
};

/**
 * Output of one chain: every iteration's draw (adaptation included) and
 * its statistics. Consumers slice off the first `adapt_iterations` rows.
 */
struct ChainOutput {
  Eigen::MatrixXd draws;  // iterations x dim
  std::vector<IterationStats> stats;
  /// Averaged step size after each adaptation iteration.
  std::vector<double> eps_bar_trace;
  int adapt_iterations = 0;
  /// Step size used after adaptation (or the fixed step size).
  double final_step_size = 0.0;
  /// Leapfrog steps spent by the initial step-size search (not in stats).
  std::int64_t init_grads = 0;
  std::vector<std::string> warnings;

  std::int64_t total_grads() const;
  /// Gradient evaluations after the adaptation phase.
  std::int64_t kept_grads() const;
  Eigen::MatrixXd kept_draws() const;
  double mean_accept_stat_kept() const;
};

}  // namespace nuts
