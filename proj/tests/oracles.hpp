#pragma once

// Test-only reference computations, kept independent of the library paths
// they are used to check.

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "nuts/model.hpp"
#include "nuts/rng.hpp"

namespace oracle {

/// Plain central differences with step 1e-5 * (1 + |theta_d|).
inline Eigen::VectorXd finite_difference_gradient(const nuts::TargetModel& model,
                                                  const Eigen::VectorXd& theta) {
  Eigen::VectorXd g(theta.size());
  Eigen::VectorXd scratch(theta.size());
  for (Eigen::Index d = 0; d < theta.size(); ++d) {
    const double h = 1e-5 * (1.0 + std::abs(theta[d]));
    Eigen::VectorXd up = theta, down = theta;
    up[d] += h;
    down[d] -= h;
    g[d] = (model.log_density_gradient(up, scratch) - model.log_density_gradient(down, scratch)) /
           (2.0 * h);
  }
  return g;
}

inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    const double scale = std::max({1.0, std::abs(a[d]), std::abs(b[d])});
    worst = std::max(worst, std::abs(a[d] - b[d]) / scale);
  }
  return worst;
}

/// Stationary AR(1) with unit innovations; marginal variance 1 / (1 - phi^2).
inline Eigen::VectorXd ar1(double phi, Eigen::Index n, std::uint64_t seed) {
  nuts::RngStream rng(seed);
  Eigen::VectorXd x(n);
  x[0] = rng.normal() / std::sqrt(1.0 - phi * phi);
  for (Eigen::Index i = 1; i < n; ++i) x[i] = phi * x[i - 1] + rng.normal();
  return x;
}

/// Direct double-loop ESS with the first-dip-below-cutoff truncation.
inline double brute_force_ess(const std::vector<double>& f, double mean, double var,
                              double cutoff = 0.05) {
  const std::size_t m = f.size();
  double sum = 0.0;
  for (std::size_t s = 1; s < m; ++s) {
    double acc = 0.0;
    for (std::size_t i = s; i < m; ++i) acc += (f[i] - mean) * (f[i - s] - mean);
    const double rho = acc / (var * static_cast<double>(m - s));
    sum += (1.0 - static_cast<double>(s) / static_cast<double>(m)) * rho;
    if (rho < cutoff) break;
  }
  return static_cast<double>(m) / (1.0 + 2.0 * sum);
}

/// Batch-means standard error of a scalar series, an estimate independent
/// of the autocorrelation-based ESS.
inline double batch_means_se(const Eigen::VectorXd& x, int batches = 50) {
  const Eigen::Index size = x.size() / batches;
  Eigen::VectorXd means(batches);
  for (int b = 0; b < batches; ++b) means[b] = x.segment(b * size, size).mean();
  const double mu = means.mean();
  const double var = (means.array() - mu).square().sum() / (batches - 1);
  return std::sqrt(var / batches);
}

/// Wraps a model so that every kernel call increments a shared counter.
struct CountingModel {
  std::shared_ptr<std::int64_t> calls = std::make_shared<std::int64_t>(0);
  nuts::TargetModel model;

  explicit CountingModel(const nuts::TargetModel& inner)
      : model(make(inner, calls)) {}

  std::int64_t count() const { return *calls; }
  void reset() { *calls = 0; }

 private:
  static nuts::TargetModel make(const nuts::TargetModel& inner,
                                std::shared_ptr<std::int64_t> calls) {
    return nuts::TargetModel(
        inner.name() + "_counted", inner.dim(),
        [inner, calls](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
          ++*calls;
          return inner.log_density_gradient(theta, grad);
        },
        inner.gaussian());
  }
};

}  // namespace oracle
