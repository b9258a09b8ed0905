#pragma once

#include <functional>

#include "nuts/chain.hpp"
#include "nuts/model.hpp"
#include "nuts/rng.hpp"

namespace nuts {

struct RwmConfig {
  double proposal_scale = 1.0;
  int iterations = 10000;
  /// Leading iterations treated as burn-in in the output.
  int burn_in = 0;
};

/// Random-walk Metropolis with isotropic N(0, scale^2 I) proposals. Each
/// iteration costs one density evaluation, recorded as `grads = 1`.
ChainOutput rwm_run(const TargetModel& model, const VectorXd& theta0, const RwmConfig& config,
                    RngStream& rng);

double acceptance_rate(const ChainOutput& chain);

struct ScaleTuning {
  int pilot_iterations = 2000;
  int max_pilots = 30;
  double tolerance = 0.02;
};

/**
 * Bisection on log(scale) for a decreasing acceptance curve. Returns the
 * first scale within tolerance, or the closest one after `max_pilots`
 * evaluations. Throws TuningError if the target cannot be bracketed.
 */
double tune_log_scale(const std::function<double(double)>& rate_at, double target,
                      double initial_scale, const ScaleTuning& tuning = {});

/// Pilot-run tuning of the RWM proposal scale towards `target_rate`.
double rwm_tune_scale(const TargetModel& model, const VectorXd& theta0, double target_rate,
                      RngStream& rng, const ScaleTuning& tuning = {});

/// Systematic-scan Gibbs sampler for a zero-mean Gaussian given by its
/// precision. Each sweep updates every coordinate once; cost is recorded
/// as one unit per sweep.
ChainOutput gibbs_mvn_run(const MvnSpec& spec, const VectorXd& theta0, int sweeps,
                          RngStream& rng, int burn_in = 0);

}  // namespace nuts
