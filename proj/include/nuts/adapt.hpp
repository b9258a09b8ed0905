#pragma once

#include <cstdint>

#include "nuts/hamiltonian.hpp"
#include "nuts/model.hpp"
#include "nuts/rng.hpp"

namespace nuts {

/**
 * Nesterov dual-averaging controller on log step size.
 *
 * Drives the running average of `delta - alpha` to zero. `log_eps` is the
 * step size to use next; `log_eps_avg` is the iterate average that is
 * frozen when adaptation ends.
 */
struct DualAveragingState {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_avg = 0.0;
  double h_bar = 0.0;
  std::int64_t t = 0;
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
  double delta = 0.65;

  /// Fresh controller for initial step `eps0` with mu = log(10 eps0).
  static DualAveragingState start(double eps0, double delta, double gamma = 0.05,
                                  double t0 = 10.0, double kappa = 0.75);

  /// Throws ConfigError when a constant is outside its domain.
  void validate() const;

  double step_size() const;
  double averaged_step_size() const;
};

DualAveragingState da_update(const DualAveragingState& state, double alpha_stat);

/// log(10 * eps0).
double shrinkage_target(double eps0);

struct EpsilonSearch {
  double epsilon = 1.0;
  /// +1 if the search doubled, -1 if it halved.
  int direction = 1;
  /// log p(theta', r') - log p(theta, r) at the returned epsilon.
  double log_ratio = 0.0;
  int leapfrog_steps = 0;
};

inline constexpr int kMaxEpsilonTrials = 100;

/**
 * Doubles or halves epsilon (starting at 1) until the one-step joint
 * density ratio crosses 1/2. Throws InitError after 100 rescalings.
 */
EpsilonSearch find_reasonable_epsilon(const TargetModel& model, const VectorXd& theta,
                                      const VectorXd& momentum);
EpsilonSearch find_reasonable_epsilon(const TargetModel& model, const VectorXd& theta,
                                      RngStream& rng);

}  // namespace nuts
