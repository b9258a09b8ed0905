#include "nuts/nuts.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nuts/adapt.hpp"
#include "nuts/errors.hpp"

namespace nuts {

void NutsConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be positive");
  if (adapt_iterations < 0 || adapt_iterations >= iterations)
    throw ConfigError("adapt iterations must satisfy 0 <= M_adapt < M");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("target delta must lie in (0, 1)");
  if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
  if (naive && max_depth > kNaiveMaxDepth)
    throw ConfigError("naive NUTS stores every state; max_depth must be <= 16");
  if (!(delta_max > 0.0)) throw ConfigError("delta_max must be positive");
  if (step_size < 0.0) throw ConfigError("step size must be nonnegative");
}

bool uturn_stop(const PhaseState& minus, const PhaseState& plus) {
  const VectorXd span = plus.theta - minus.theta;
  return !(span.dot(minus.r) < 0.0) && !(span.dot(plus.r) < 0.0);
}

bool divergence_stop(double log_u, const PhaseState& state, double delta_max) {
  const double joint = joint_log_density(state);
  if (!std::isfinite(joint)) return false;
  return !(joint - log_u < -delta_max);
}

namespace {

// Accounts for phase states held by a recursion frame.
class HeldStates {
 public:
  HeldStates(TreeCounters& counters, int count) : counters_(counters), count_(count) {
    counters_.live_states += count_;
    counters_.peak_states = std::max(counters_.peak_states, counters_.live_states);
  }
  ~HeldStates() { counters_.live_states -= count_; }
  HeldStates(const HeldStates&) = delete;
  HeldStates& operator=(const HeldStates&) = delete;

 private:
  TreeCounters& counters_;
  int count_;
};

double acceptance_term(double joint, double joint0) {
  if (!std::isfinite(joint)) return 0.0;
  return std::min(1.0, std::exp(joint - joint0));
}

}  // namespace

TreeOutcome build_tree(const TargetModel& model, const PhaseState& state, double log_u,
                       int direction, int depth, double step_size, double joint0,
                       double delta_max, RngStream& rng, TreeCounters& counters) {
  if (depth == 0) {
    TreeOutcome leaf;
    leaf.proposal = leapfrog(model, state, direction * step_size);
    ++counters.grads;
    const double joint = joint_log_density(leaf.proposal);
    leaf.n = log_u <= joint ? 1 : 0;
    leaf.s = divergence_stop(log_u, leaf.proposal, delta_max);
    if (!leaf.s) counters.divergent = true;
    leaf.alpha = acceptance_term(joint, joint0);
    leaf.n_alpha = 1;
    leaf.minus = leaf.proposal;
    leaf.plus = leaf.proposal;
    return leaf;
  }

  TreeOutcome tree = build_tree(model, state, log_u, direction, depth - 1, step_size, joint0,
                                delta_max, rng, counters);
  if (!tree.s) return tree;

  HeldStates held_first(counters, 3);
  TreeOutcome second =
      build_tree(model, direction < 0 ? tree.minus : tree.plus, log_u, direction, depth - 1,
                 step_size, joint0, delta_max, rng, counters);
  HeldStates held_second(counters, 3);

  const std::int64_t total = tree.n + second.n;
  if (second.n > 0 && rng.uniform() * static_cast<double>(total) < static_cast<double>(second.n))
    tree.proposal = std::move(second.proposal);
  tree.alpha += second.alpha;
  tree.n_alpha += second.n_alpha;
  if (direction < 0)
    tree.minus = std::move(second.minus);
  else
    tree.plus = std::move(second.plus);
  tree.s = second.s && uturn_stop(tree.minus, tree.plus);
  tree.n = total;
  return tree;
}

NutsStep nuts_iteration(const TargetModel& model, const PhaseState& current, double step_size,
                        const NutsConfig& config, RngStream& rng) {
  if (!(step_size > 0.0)) throw ConfigError("step size must be positive");

  PhaseState start = current;
  start.r = sample_momentum(model.dim(), rng);
  const double joint0 = joint_log_density(start);
  const double log_u = joint0 + std::log(rng.uniform_open_zero());

  NutsStep out;
  TreeCounters counters;
  HeldStates held_top(counters, 3);
  PhaseState minus = start;
  PhaseState plus = start;
  out.state = std::move(start);
  std::int64_t n = 1;

  for (bool keep_going = true; keep_going;) {
    if (out.tree_depth >= config.max_depth) {
      out.termination = Termination::max_depth;
      break;
    }
    const int direction = rng.direction();
    TreeOutcome sub = build_tree(model, direction < 0 ? minus : plus, log_u, direction,
                                 out.tree_depth, step_size, joint0, config.delta_max, rng,
                                 counters);
    if (direction < 0)
      minus = std::move(sub.minus);
    else
      plus = std::move(sub.plus);

    if (sub.s) {
      // Accept the new subtree's proposal with probability min(1, n'/n).
      if (rng.uniform() * static_cast<double>(n) < static_cast<double>(sub.n)) {
        out.state = std::move(sub.proposal);
        out.moved = true;
      }
    }
    n += sub.n;
    out.accept_stat = sub.n_alpha > 0 ? sub.alpha / static_cast<double>(sub.n_alpha) : 0.0;
    ++out.tree_depth;

    if (!sub.s) {
      keep_going = false;
      out.termination = Termination::subtree;
    } else if (!uturn_stop(minus, plus)) {
      keep_going = false;
      out.termination = Termination::uturn;
    }
  }

  out.grads = counters.grads;
  out.n_states = counters.grads + 1;
  out.n_admissible = n;
  out.divergent = counters.divergent;
  out.peak_states = counters.peak_states;
  return out;
}

namespace {

struct NaiveSubtree {
  PhaseState minus;
  PhaseState plus;
  bool s = true;
};

struct NaiveContext {
  const TargetModel& model;
  double log_u;
  double step_size;
  double joint0;
  double delta_max;
  NaiveTrajectory& trajectory;
};

NaiveSubtree naive_build(NaiveContext& ctx, const PhaseState& state, int direction, int depth,
                         std::vector<PhaseState>& set) {
  if (depth == 0) {
    PhaseState next = leapfrog(ctx.model, state, direction * ctx.step_size);
    ++ctx.trajectory.grads;
    const double joint = joint_log_density(next);
    NaiveSubtree leaf;
    leaf.s = divergence_stop(ctx.log_u, next, ctx.delta_max);
    if (!leaf.s) ctx.trajectory.divergent = true;
    ctx.trajectory.alpha += acceptance_term(joint, ctx.joint0);
    ++ctx.trajectory.n_alpha;
    if (ctx.log_u <= joint) set.push_back(next);
    leaf.minus = next;
    leaf.plus = std::move(next);
    return leaf;
  }
  NaiveSubtree tree = naive_build(ctx, state, direction, depth - 1, set);
  NaiveSubtree second =
      naive_build(ctx, direction < 0 ? tree.minus : tree.plus, direction, depth - 1, set);
  if (direction < 0)
    tree.minus = std::move(second.minus);
  else
    tree.plus = std::move(second.plus);
  tree.s = tree.s && second.s && uturn_stop(tree.minus, tree.plus);
  return tree;
}

}  // namespace

NaiveTrajectory naive_trajectory(const TargetModel& model, const PhaseState& start, double log_u,
                                 double step_size, int max_depth, double delta_max,
                                 const std::function<int()>& next_direction) {
  if (max_depth > kNaiveMaxDepth)
    throw ConfigError("naive NUTS stores every state; max_depth must be <= 16");
  NaiveTrajectory out;
  out.candidates.push_back(start);
  out.minus = start;
  out.plus = start;
  NaiveContext ctx{model, log_u, step_size, joint_log_density(start), delta_max, out};

  for (bool keep_going = true; keep_going;) {
    if (out.depth >= max_depth) {
      out.termination = Termination::max_depth;
      break;
    }
    const int direction = next_direction();
    out.alpha = 0.0;
    out.n_alpha = 0;
    std::vector<PhaseState> new_set;
    NaiveSubtree sub =
        naive_build(ctx, direction < 0 ? out.minus : out.plus, direction, out.depth, new_set);
    if (direction < 0)
      out.minus = std::move(sub.minus);
    else
      out.plus = std::move(sub.plus);
    // A stopped subtree's candidates are discarded.
    if (sub.s)
      std::move(new_set.begin(), new_set.end(), std::back_inserter(out.candidates));
    ++out.depth;
    if (!sub.s) {
      keep_going = false;
      out.termination = Termination::subtree;
    } else if (!uturn_stop(out.minus, out.plus)) {
      keep_going = false;
      out.termination = Termination::uturn;
    }
  }
  out.n_states = out.grads + 1;
  return out;
}

NaiveStep naive_nuts_iteration(const TargetModel& model, const PhaseState& current,
                               double step_size, const NutsConfig& config, RngStream& rng) {
  if (config.max_depth > kNaiveMaxDepth)
    throw ConfigError("naive NUTS stores every state; max_depth must be <= 16");
  if (!(step_size > 0.0)) throw ConfigError("step size must be positive");

  PhaseState start = current;
  start.r = sample_momentum(model.dim(), rng);
  NaiveStep out;
  out.log_u = joint_log_density(start) + std::log(rng.uniform_open_zero());
  out.trajectory = naive_trajectory(model, start, out.log_u, step_size, config.max_depth,
                                    config.delta_max, [&rng] { return rng.direction(); });
  const auto& set = out.trajectory.candidates;
  const auto pick = std::min(set.size() - 1,
                             static_cast<std::size_t>(rng.uniform() * static_cast<double>(set.size())));
  out.state = set[pick];
  return out;
}

ChainOutput nuts_run(const TargetModel& model, const VectorXd& theta0, const NutsConfig& config,
                     RngStream& rng) {
  config.validate();
  eval_model(model, theta0);

  ChainOutput out;
  out.adapt_iterations = config.adapt_iterations;
  out.draws.resize(config.iterations, model.dim());
  out.stats.reserve(static_cast<std::size_t>(config.iterations));

  PhaseState current = make_state(model, theta0, VectorXd::Zero(model.dim()));

  double eps = config.step_size;
  if (eps <= 0.0) {
    const EpsilonSearch search = find_reasonable_epsilon(model, theta0, rng);
    eps = search.epsilon;
    out.init_grads = search.leapfrog_steps;
  }
  DualAveragingState da = DualAveragingState::start(eps, config.delta);

  int depth_hits = 0;
  for (int m = 1; m <= config.iterations; ++m) {
    IterationStats st;
    st.step_size = eps;
    if (config.naive) {
      NaiveStep step = naive_nuts_iteration(model, current, eps, config, rng);
      const NaiveTrajectory& tr = step.trajectory;
      st.accept_stat = tr.n_alpha > 0 ? tr.alpha / static_cast<double>(tr.n_alpha) : 0.0;
      st.tree_depth = tr.depth;
      st.n_states = tr.n_states;
      st.grads = tr.grads;
      st.accepted = step.state.theta != current.theta;
      st.divergent = tr.divergent;
      st.termination = tr.termination;
      current = std::move(step.state);
    } else {
      NutsStep step = nuts_iteration(model, current, eps, config, rng);
      st.accept_stat = step.accept_stat;
      st.tree_depth = step.tree_depth;
      st.n_states = step.n_states;
      st.grads = step.grads;
      st.accepted = step.moved;
      st.divergent = step.divergent;
      st.termination = step.termination;
      current = std::move(step.state);
    }
    if (st.termination == Termination::max_depth) ++depth_hits;
    out.draws.row(m - 1) = current.theta.transpose();
    out.stats.push_back(st);

    if (m <= config.adapt_iterations) {
      da = da_update(da, st.accept_stat);
      eps = da.step_size();
      out.eps_bar_trace.push_back(da.averaged_step_size());
      if (m == config.adapt_iterations) eps = da.averaged_step_size();
    }
  }
  out.final_step_size = eps;
  if (depth_hits > 0)
    out.warnings.push_back(std::to_string(depth_hits) + " iterations reached max_depth " +
                           std::to_string(config.max_depth) + "; consider a larger cap");
  return out;
}

}  // namespace nuts
