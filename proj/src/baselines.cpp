#include "nuts/baselines.hpp"

#include <cmath>
#include <limits>

#include "nuts/errors.hpp"

namespace nuts {

ChainOutput rwm_run(const TargetModel& model, const VectorXd& theta0, const RwmConfig& config,
                    RngStream& rng) {
  if (!(config.proposal_scale > 0.0)) throw ConfigError("proposal scale must be positive");
  if (config.iterations < 1) throw ConfigError("iterations must be positive");
  if (config.burn_in < 0 || config.burn_in >= config.iterations)
    throw ConfigError("burn-in must satisfy 0 <= burn_in < iterations");
  const Evaluation start = eval_model(model, theta0);

  ChainOutput out;
  out.adapt_iterations = config.burn_in;
  out.final_step_size = config.proposal_scale;
  out.draws.resize(config.iterations, model.dim());
  out.stats.reserve(static_cast<std::size_t>(config.iterations));

  VectorXd theta = theta0;
  double logp = start.logp;
  VectorXd scratch(model.dim());
  for (int m = 0; m < config.iterations; ++m) {
    const VectorXd proposal = theta + config.proposal_scale * rng.normal_vector(model.dim());
    const double proposal_logp = model.log_density_gradient(proposal, scratch);
    const double log_ratio = proposal_logp - logp;

    IterationStats st;
    st.step_size = config.proposal_scale;
    st.grads = 1;
    st.divergent = std::isnan(log_ratio);
    st.accept_stat = st.divergent ? 0.0 : std::min(1.0, std::exp(log_ratio));
    if (!st.divergent && std::log(rng.uniform_open_zero()) < log_ratio) {
      theta = proposal;
      logp = proposal_logp;
      st.accepted = true;
    }
    out.draws.row(m) = theta.transpose();
    out.stats.push_back(st);
  }
  return out;
}

double acceptance_rate(const ChainOutput& chain) {
  if (chain.stats.empty()) return 0.0;
  double accepted = 0.0;
  for (const auto& s : chain.stats) accepted += s.accepted;
  return accepted / static_cast<double>(chain.stats.size());
}

double tune_log_scale(const std::function<double(double)>& rate_at, double target,
                      double initial_scale, const ScaleTuning& tuning) {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("target rate must lie in (0, 1)");
  if (!(initial_scale > 0.0)) throw ConfigError("initial scale must be positive");

  int pilots = 0;
  double best_scale = initial_scale;
  double best_gap = std::numeric_limits<double>::infinity();
  auto probe = [&](double log_scale) {
    const double rate = rate_at(std::exp(log_scale));
    ++pilots;
    const double gap = std::abs(rate - target);
    if (gap < best_gap) {
      best_gap = gap;
      best_scale = std::exp(log_scale);
    }
    return rate;
  };

  // Acceptance decreases with scale: lo has rate above target, hi below.
  double lo = std::log(initial_scale);
  double rate = probe(lo);
  if (best_gap <= tuning.tolerance) return best_scale;
  double hi = lo;
  const double stride = std::log(4.0);
  if (rate > target) {
    do {
      lo = hi;
      hi += stride;
      if (pilots >= tuning.max_pilots) throw TuningError("could not bracket target acceptance");
      rate = probe(hi);
      if (best_gap <= tuning.tolerance) return best_scale;
    } while (rate > target);
  } else {
    do {
      hi = lo;
      lo -= stride;
      if (pilots >= tuning.max_pilots) throw TuningError("could not bracket target acceptance");
      rate = probe(lo);
      if (best_gap <= tuning.tolerance) return best_scale;
    } while (rate <= target);
  }

  while (pilots < tuning.max_pilots) {
    const double mid = 0.5 * (lo + hi);
    rate = probe(mid);
    if (best_gap <= tuning.tolerance) break;
    if (rate > target)
      lo = mid;
    else
      hi = mid;
  }
  return best_scale;
}

double rwm_tune_scale(const TargetModel& model, const VectorXd& theta0, double target_rate,
                      RngStream& rng, const ScaleTuning& tuning) {
  if (!(target_rate > 0.0 && target_rate < 1.0))
    throw ConfigError("target rate must lie in (0, 1)");
  VectorXd state = theta0;
  auto rate_at = [&](double scale) {
    RwmConfig pilot{scale, tuning.pilot_iterations, 0};
    const ChainOutput run = rwm_run(model, state, pilot, rng);
    state = run.draws.bottomRows(1).transpose();
    return acceptance_rate(run);
  };
  const double initial = 2.4 / std::sqrt(static_cast<double>(model.dim()));
  return tune_log_scale(rate_at, target_rate, initial, tuning);
}

ChainOutput gibbs_mvn_run(const MvnSpec& spec, const VectorXd& theta0, int sweeps,
                          RngStream& rng, int burn_in) {
  const auto& a = spec.precision;
  const Index dim = spec.dim();
  if (theta0.size() != dim) throw ConfigError("initial position does not match precision size");
  if (sweeps < 1) throw ConfigError("sweeps must be positive");
  if (burn_in < 0 || burn_in >= sweeps) throw ConfigError("burn-in must satisfy 0 <= burn_in < sweeps");
  for (Index d = 0; d < dim; ++d)
    if (!(a(d, d) > 0.0)) throw ConfigError("precision diagonal must be positive");

  ChainOutput out;
  out.adapt_iterations = burn_in;
  out.draws.resize(sweeps, dim);
  out.stats.reserve(static_cast<std::size_t>(sweeps));
  VectorXd theta = theta0;
  for (int m = 0; m < sweeps; ++m) {
    for (Index d = 0; d < dim; ++d) {
      // theta_d | rest ~ N(-(sum_{j != d} A_dj theta_j) / A_dd, 1 / A_dd)
      const double off = a.row(d).dot(theta) - a(d, d) * theta[d];
      theta[d] = -off / a(d, d) + rng.normal() / std::sqrt(a(d, d));
    }
    out.draws.row(m) = theta.transpose();
    IterationStats st;
    st.accept_stat = 1.0;
    st.accepted = true;
    st.grads = 1;
    out.stats.push_back(st);
  }
  return out;
}

}  // namespace nuts
