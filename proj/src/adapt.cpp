#include "nuts/adapt.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "nuts/errors.hpp"

namespace nuts {

DualAveragingState DualAveragingState::start(double eps0, double delta, double gamma,
                                             double t0, double kappa) {
  if (!(eps0 > 0.0) || !std::isfinite(eps0))
    throw ConfigError("initial step size must be positive and finite");
  DualAveragingState s;
  s.mu = shrinkage_target(eps0);
  s.log_eps = std::log(eps0);
  s.gamma = gamma;
  s.t0 = t0;
  s.kappa = kappa;
  s.delta = delta;
  s.validate();
  return s;
}

void DualAveragingState::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("target delta must lie in (0, 1)");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(t0 >= 0.0)) throw ConfigError("t0 must be nonnegative");
  if (!(kappa > 0.5 && kappa <= 1.0)) throw ConfigError("kappa must lie in (0.5, 1]");
}

double DualAveragingState::step_size() const { return std::exp(log_eps); }
double DualAveragingState::averaged_step_size() const { return std::exp(log_eps_avg); }

DualAveragingState da_update(const DualAveragingState& state, double alpha_stat) {
  if (!std::isfinite(alpha_stat))
    throw ConfigError("dual averaging received a non-finite acceptance statistic");
  DualAveragingState next = state;
  next.t = state.t + 1;
  const double m = static_cast<double>(next.t);
  const double w = 1.0 / (m + state.t0);
  next.h_bar = (1.0 - w) * state.h_bar + w * (state.delta - alpha_stat);
  next.log_eps = state.mu - std::sqrt(m) / state.gamma * next.h_bar;
  const double eta = std::pow(m, -state.kappa);
  next.log_eps_avg = eta * next.log_eps + (1.0 - eta) * state.log_eps_avg;
  return next;
}

double shrinkage_target(double eps0) {
  if (!(eps0 > 0.0)) throw ConfigError("initial step size must be positive");
  return std::log(10.0 * eps0);
}

EpsilonSearch find_reasonable_epsilon(const TargetModel& model, const VectorXd& theta,
                                      const VectorXd& momentum) {
  const PhaseState start = make_state(model, theta, momentum);
  const double joint0 = joint_log_density(start);
  auto log_ratio_at = [&](double eps) {
    const double d = joint_log_density(leapfrog(model, start, eps)) - joint0;
    return std::isnan(d) ? -std::numeric_limits<double>::infinity() : d;
  };

  EpsilonSearch out;
  out.log_ratio = log_ratio_at(out.epsilon);
  out.leapfrog_steps = 1;
  out.direction = out.log_ratio > -std::numbers::ln2 ? 1 : -1;
  const double a = out.direction;
  // (ratio)^a > 2^-a  <=>  a * log_ratio > -a * log 2
  for (int trial = 0; a * out.log_ratio > -a * std::numbers::ln2; ++trial) {
    if (trial == kMaxEpsilonTrials)
      throw InitError("step-size search did not settle after 100 rescalings; "
                      "the density may be flat, supply a step size manually");
    out.epsilon *= a > 0 ? 2.0 : 0.5;
    out.log_ratio = log_ratio_at(out.epsilon);
    ++out.leapfrog_steps;
  }
  return out;
}

EpsilonSearch find_reasonable_epsilon(const TargetModel& model, const VectorXd& theta,
                                      RngStream& rng) {
  return find_reasonable_epsilon(model, theta, sample_momentum(model.dim(), rng));
}

}  // namespace nuts
