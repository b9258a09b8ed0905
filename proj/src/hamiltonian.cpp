#include "nuts/hamiltonian.hpp"

#include <cmath>
#include <limits>

#include "nuts/errors.hpp"

namespace nuts {

namespace {

void mark_divergence(PhaseState& s) {
  if (!s.theta.allFinite() || !std::isfinite(s.logp) || !s.grad.allFinite()) {
    s.divergent = true;
    s.logp = -std::numeric_limits<double>::infinity();
  }
}

}  // namespace

PhaseState make_state(const TargetModel& model, VectorXd theta, VectorXd r) {
  if (theta.size() != model.dim() || r.size() != model.dim())
    throw ConfigError("phase state dimension does not match model");
  PhaseState s;
  s.theta = std::move(theta);
  s.r = std::move(r);
  s.grad.resize(model.dim());
  s.logp = model.log_density_gradient(s.theta, s.grad);
  mark_divergence(s);
  return s;
}

VectorXd sample_momentum(Index dim, RngStream& rng) {
  if (dim < 1) throw ConfigError("momentum dimension must be positive");
  return rng.normal_vector(dim);
}

PhaseState leapfrog(const TargetModel& model, const PhaseState& state, double step) {
  PhaseState next;
  next.r = state.r + (0.5 * step) * state.grad;
  next.theta = state.theta + step * next.r;
  next.grad.resize(state.grad.size());
  next.logp = model.log_density_gradient(next.theta, next.grad);
  next.r += (0.5 * step) * next.grad;
  mark_divergence(next);
  return next;
}

}  // namespace nuts
