#pragma once

#include <Eigen/Dense>

#include "nuts/model.hpp"
#include "nuts/rng.hpp"

namespace nuts {

/**
 * Position/momentum pair with the log density and gradient cached at
 * `theta`. `divergent` marks states whose position or density became
 * non-finite during integration; their `logp` is -infinity.
 */
struct PhaseState {
  VectorXd theta;
  VectorXd r;
  double logp = 0.0;
  VectorXd grad;
  bool divergent = false;
};

/// Evaluates the model at `theta` and attaches momentum `r`.
PhaseState make_state(const TargetModel& model, VectorXd theta, VectorXd r);

/// L(theta) - r.r / 2.
inline double joint_log_density(const PhaseState& s) {
  return s.logp - 0.5 * s.r.squaredNorm();
}

VectorXd sample_momentum(Index dim, RngStream& rng);

/// One leapfrog step of signed size `step`, reusing the cached gradient.
/// Performs exactly one gradient evaluation.
PhaseState leapfrog(const TargetModel& model, const PhaseState& state, double step);

}  // namespace nuts
