#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "nuts/data.hpp"

namespace nuts {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Log density and its gradient at one position.
struct Evaluation {
  double logp = 0.0;
  VectorXd grad;
};

/// Zero-mean Gaussian target given by its precision matrix.
struct MvnSpec {
  MatrixXd precision;
  /// Seed that produced `precision` (after any regeneration), if random.
  std::uint64_t seed = 0;

  Index dim() const { return precision.rows(); }
  MatrixXd covariance() const;
  /// Throws ConfigError unless symmetric within 1e-12 and Cholesky succeeds.
  void validate() const;
};

/**
 * A differentiable log density over unconstrained coordinates.
 *
 * Values are immutable after construction and may be shared across
 * threads. Evaluation through `log_density_gradient` is unchecked: the
 * result may be non-finite, which samplers interpret as a divergence.
 */
class TargetModel {
 public:
  /// Computes L(theta) and writes the gradient into `grad` (already sized).
  using Kernel = std::function<double(const VectorXd& theta, VectorXd& grad)>;

  TargetModel(std::string name, Index dim, Kernel kernel,
              std::shared_ptr<const MvnSpec> gaussian = nullptr);

  const std::string& name() const noexcept { return name_; }
  Index dim() const noexcept { return dim_; }

  double log_density_gradient(const VectorXd& theta, VectorXd& grad) const {
    return (*kernel_)(theta, grad);
  }

  Evaluation eval(const VectorXd& theta) const;

  /// Set for Gaussian targets; Gibbs and analytic references use it.
  const std::shared_ptr<const MvnSpec>& gaussian() const noexcept { return gaussian_; }

 private:
  std::string name_;
  Index dim_;
  std::shared_ptr<const Kernel> kernel_;
  std::shared_ptr<const MvnSpec> gaussian_;
};

/**
 * Checked evaluation. Throws ConfigError on dimension mismatch or
 * non-finite input and EvalError (with coordinate) on non-finite output.
 */
Evaluation eval_model(const TargetModel& model, const VectorXd& theta);

struct GradientReport {
  VectorXd analytic;
  VectorXd numeric;
  VectorXd relative_error;
  double max_error = 0.0;
  std::vector<Index> flagged;
};

inline constexpr double kGradientTolerance = 1e-5;

/**
 * Compares the analytic gradient against central differences with
 * per-coordinate step `step * (1 + |theta_d|)`. Relative error is
 * |analytic - numeric| / max(1, |analytic|, |numeric|).
 */
GradientReport check_gradient(const TargetModel& model, const VectorXd& theta,
                              double step = 1e-5,
                              double tolerance = kGradientTolerance);

// Built-in targets.

TargetModel make_flat(Index dim);
TargetModel make_mvn(MvnSpec spec);
TargetModel make_std_normal(Index dim);
TargetModel make_logreg(LogRegData data);
/// Parameters (alpha, beta[P], log sigma^2); interactions are expanded here.
TargetModel make_hlr(const HlrSpec& spec);
/// Parameters (log s_1..log s_T, log nu) with the volatility precision
/// integrated out.
TargetModel make_sv(SvData data);
/// Density of z = log x for x ~ Exponential(rate), Jacobian included.
TargetModel make_log_exponential(double rate);

/// Wishart(identity scale, dof) draw via the Bartlett decomposition.
MatrixXd wishart_identity(Index dim, double dof, std::uint64_t seed);

struct MvnModelSpec {
  Index dim = 10;
  std::uint64_t seed = 1;
  /// Degrees of freedom; 0 means `dim`.
  double dof = 0.0;
};

using ModelSpec = std::variant<MvnModelSpec, LogRegData, HlrSpec, SvData>;

TargetModel build_target(const ModelSpec& spec);

/// Generates the Wishart precision, regenerating with seed+1 until PD.
MvnSpec build_mvn_spec(const MvnModelSpec& spec);

}  // namespace nuts
