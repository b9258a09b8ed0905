#include "nuts/hmc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "nuts/adapt.hpp"
#include "nuts/errors.hpp"

namespace nuts {

void HmcConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be positive");
  if (adapt_iterations < 0 || adapt_iterations >= iterations)
    throw ConfigError("adapt iterations must satisfy 0 <= M_adapt < M");
  if (fixed()) {
    if (!(step_size > 0.0)) throw ConfigError("fixed HMC needs a positive step size");
    if (num_steps < 1) throw ConfigError("fixed HMC needs at least one leapfrog step");
  } else {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("target delta must lie in (0, 1)");
    if (!(sim_length > 0.0)) throw ConfigError("simulation length must be positive");
    if (step_size < 0.0) throw ConfigError("initial step size must be nonnegative");
  }
  if (max_steps < 1) throw ConfigError("max_steps must be positive");
}

int hmc_num_steps(double sim_length, double step_size, int max_steps) {
  const double raw = std::round(sim_length / step_size);
  if (!(raw < static_cast<double>(max_steps))) return max_steps;
  return std::max(1, static_cast<int>(raw));
}

HmcStep hmc_iteration(const TargetModel& model, const PhaseState& current, double step_size,
                      int num_steps, RngStream& rng) {
  if (!(step_size > 0.0)) throw ConfigError("step size must be positive");
  if (num_steps < 1) throw ConfigError("number of leapfrog steps must be positive");

  PhaseState proposal = current;
  proposal.r = sample_momentum(model.dim(), rng);
  const double joint0 = joint_log_density(proposal);
  for (int i = 0; i < num_steps; ++i) proposal = leapfrog(model, proposal, step_size);

  HmcStep out;
  out.grads = num_steps;
  const double log_ratio = joint_log_density(proposal) - joint0;
  if (proposal.divergent || std::isnan(log_ratio)) {
    out.divergent = true;
    out.accept_prob = 0.0;
  } else {
    out.accept_prob = std::min(1.0, std::exp(log_ratio));
  }
  // Compare on the log scale; uniform_open_zero keeps log() finite.
  if (!out.divergent && std::log(rng.uniform_open_zero()) < log_ratio) {
    out.accepted = true;
    out.state = std::move(proposal);
  } else {
    out.state = current;
  }
  return out;
}

HmcStep hmc_iteration(const TargetModel& model, const VectorXd& theta, double step_size,
                      int num_steps, RngStream& rng) {
  const PhaseState start = make_state(model, theta, VectorXd::Zero(model.dim()));
  HmcStep out = hmc_iteration(model, start, step_size, num_steps, rng);
  out.grads += 1;
  return out;
}

ChainOutput hmc_run(const TargetModel& model, const VectorXd& theta0, const HmcConfig& config,
                    RngStream& rng) {
  config.validate();
  eval_model(model, theta0);

  ChainOutput out;
  out.adapt_iterations = config.adapt_iterations;
  out.draws.resize(config.iterations, model.dim());
  out.stats.reserve(static_cast<std::size_t>(config.iterations));

  PhaseState current = make_state(model, theta0, VectorXd::Zero(model.dim()));

  double eps = config.step_size;
  DualAveragingState da;
  if (!config.fixed()) {
    if (eps <= 0.0) {
      const EpsilonSearch search = find_reasonable_epsilon(model, theta0, rng);
      eps = search.epsilon;
      out.init_grads = search.leapfrog_steps;
    }
    da = DualAveragingState::start(eps, config.delta);
  }

  std::deque<bool> window;
  int window_rejects = 0;
  bool storm_reported = false;

  for (int m = 1; m <= config.iterations; ++m) {
    const int steps = config.fixed() ? config.num_steps
                                     : hmc_num_steps(config.sim_length, eps, config.max_steps);
    HmcStep step = hmc_iteration(model, current, eps, steps, rng);
    current = std::move(step.state);
    out.draws.row(m - 1) = current.theta.transpose();

    IterationStats st;
    st.accept_stat = step.accept_prob;
    st.step_size = eps;
    st.n_states = steps + 1;
    st.grads = step.grads;
    st.accepted = step.accepted;
    st.divergent = step.divergent;
    out.stats.push_back(st);

    if (m <= config.adapt_iterations) {
      window.push_back(!step.accepted);
      window_rejects += !step.accepted;
      if (window.size() > 100) {
        window_rejects -= window.front();
        window.pop_front();
      }
      if (!storm_reported && window.size() == 100 && window_rejects >= 90) {
        out.warnings.push_back("divergence storm: >= 90% of 100 adaptation iterations rejected "
                               "ending at iteration " + std::to_string(m));
        storm_reported = true;
      }
      da = da_update(da, step.accept_prob);
      eps = da.step_size();
      out.eps_bar_trace.push_back(da.averaged_step_size());
      if (m == config.adapt_iterations) eps = da.averaged_step_size();
    }
  }
  out.final_step_size = eps;
  return out;
}

}  // namespace nuts
