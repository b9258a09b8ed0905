#include "nuts/model.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <random>

#include <boost/math/special_functions/digamma.hpp>

#include "nuts/errors.hpp"
#include "nuts/rng.hpp"

namespace nuts {

MatrixXd MvnSpec::covariance() const {
  return precision.llt().solve(MatrixXd::Identity(dim(), dim()));
}

void MvnSpec::validate() const {
  if (precision.rows() != precision.cols() || precision.rows() == 0)
    throw ConfigError("precision matrix must be square and non-empty");
  if ((precision - precision.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ConfigError("precision matrix is not symmetric");
  if (precision.llt().info() != Eigen::Success)
    throw ConfigError("precision matrix is not positive definite");
}

TargetModel::TargetModel(std::string name, Index dim, Kernel kernel,
                         std::shared_ptr<const MvnSpec> gaussian)
    : name_(std::move(name)),
      dim_(dim),
      kernel_(std::make_shared<const Kernel>(std::move(kernel))),
      gaussian_(std::move(gaussian)) {
  if (dim_ < 1) throw ConfigError("model dimension must be positive");
}

Evaluation TargetModel::eval(const VectorXd& theta) const {
  Evaluation out;
  out.grad.resize(dim_);
  out.logp = log_density_gradient(theta, out.grad);
  return out;
}

Evaluation eval_model(const TargetModel& model, const VectorXd& theta) {
  if (theta.size() != model.dim())
    throw ConfigError("position has length " + std::to_string(theta.size()) +
                      ", model '" + model.name() + "' expects " +
                      std::to_string(model.dim()));
  for (Index d = 0; d < theta.size(); ++d)
    if (!std::isfinite(theta[d]))
      throw ConfigError("non-finite position coordinate " + std::to_string(d));
  Evaluation out = model.eval(theta);
  for (Index d = 0; d < out.grad.size(); ++d)
    if (!std::isfinite(out.grad[d]))
      throw EvalError("non-finite gradient at coordinate " + std::to_string(d), d);
  if (std::isnan(out.logp) || out.logp == std::numeric_limits<double>::infinity())
    throw EvalError("non-finite log density", -1);
  return out;
}

GradientReport check_gradient(const TargetModel& model, const VectorXd& theta,
                              double step, double tolerance) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
  GradientReport report;
  report.analytic = eval_model(model, theta).grad;
  const Index n = model.dim();
  report.numeric.resize(n);
  report.relative_error.resize(n);
  VectorXd probe = theta;
  VectorXd scratch(n);
  for (Index d = 0; d < n; ++d) {
    const double h = step * (1.0 + std::abs(theta[d]));
    probe[d] = theta[d] + h;
    const double up = model.log_density_gradient(probe, scratch);
    probe[d] = theta[d] - h;
    const double down = model.log_density_gradient(probe, scratch);
    probe[d] = theta[d];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw EvalError("non-finite density while probing coordinate " + std::to_string(d), d);
    report.numeric[d] = (up - down) / (2.0 * h);
    const double a = report.analytic[d];
    const double num = report.numeric[d];
    const double scale = std::max({1.0, std::abs(a), std::abs(num)});
    report.relative_error[d] = std::abs(a - num) / scale;
    if (report.relative_error[d] > tolerance) report.flagged.push_back(d);
  }
  report.max_error = n > 0 ? report.relative_error.maxCoeff() : 0.0;
  return report;
}

TargetModel make_flat(Index dim) {
  return TargetModel("flat", dim, [](const VectorXd&, VectorXd& grad) {
    grad.setZero();
    return 0.0;
  });
}

TargetModel make_mvn(MvnSpec spec) {
  spec.validate();
  auto shared = std::make_shared<const MvnSpec>(std::move(spec));
  const Index dim = shared->dim();
  return TargetModel(
      "mvn", dim,
      [shared](const VectorXd& theta, VectorXd& grad) {
        grad.noalias() = -shared->precision * theta;
        return 0.5 * theta.dot(grad);
      },
      shared);
}

TargetModel make_std_normal(Index dim) {
  MvnSpec spec;
  spec.precision = MatrixXd::Identity(dim, dim);
  return make_mvn(std::move(spec));
}

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Log-likelihood of labels under eta = alpha + X beta; accumulates
// d/d eta into `deta`.
double logistic_loglik(const LogRegData& data, double alpha,
                       const Eigen::Ref<const VectorXd>& beta, VectorXd& deta) {
  deta.resize(data.rows());
  if (data.rows() == 0) return 0.0;
  const VectorXd eta = (data.predictors * beta).array() + alpha;
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    const double margin = data.labels[i] * eta[i];
    ll -= softplus(-margin);
    deta[i] = data.labels[i] * logistic(-margin);
  }
  return ll;
}

void validate_logreg(const LogRegData& data) {
  if (data.labels.size() != data.rows())
    throw ConfigError("label count does not match predictor rows");
  for (Index i = 0; i < data.labels.size(); ++i)
    if (data.labels[i] != 1.0 && data.labels[i] != -1.0)
      throw ConfigError("labels must be +1 or -1");
  if (!(data.prior_variance > 0.0)) throw ConfigError("prior variance must be positive");
}

}  // namespace

TargetModel make_logreg(LogRegData data) {
  validate_logreg(data);
  auto shared = std::make_shared<const LogRegData>(std::move(data));
  const Index k = shared->cols();
  return TargetModel("logreg", k + 1, [shared, k](const VectorXd& theta, VectorXd& grad) {
    const double alpha = theta[0];
    const auto beta = theta.tail(k);
    const double inv_var = 1.0 / shared->prior_variance;
    VectorXd deta;
    double lp = logistic_loglik(*shared, alpha, beta, deta);
    lp -= 0.5 * inv_var * (alpha * alpha + beta.squaredNorm());
    grad[0] = deta.sum() - inv_var * alpha;
    if (shared->rows() > 0)
      grad.tail(k).noalias() = shared->predictors.transpose() * deta;
    else
      grad.tail(k).setZero();
    grad.tail(k) -= inv_var * beta;
    return lp;
  });
}

TargetModel make_hlr(const HlrSpec& spec) {
  validate_logreg(spec.base_data);
  if (!(spec.rate > 0.0)) throw ConfigError("HLR prior rate must be positive");
  LogRegData expanded = spec.base_data;
  expanded.predictors = interaction_expand(spec.base_data.predictors);
  auto shared = std::make_shared<const LogRegData>(std::move(expanded));
  const Index p = shared->cols();
  const double rate = spec.rate;
  return TargetModel("hlr", p + 2, [shared, p, rate](const VectorXd& theta, VectorXd& grad) {
    const double alpha = theta[0];
    const auto beta = theta.segment(1, p);
    const double log_var = theta[p + 1];
    const double inv_var = std::exp(-log_var);
    const double sq = alpha * alpha + beta.squaredNorm();
    const double half_count = 0.5 * static_cast<double>(p + 1);
    VectorXd deta;
    double lp = logistic_loglik(*shared, alpha, beta, deta);
    // Gaussian prior with its normalizer, exponential prior, log-Jacobian.
    lp += -0.5 * inv_var * sq - half_count * log_var - rate * std::exp(log_var) + log_var;
    grad[0] = deta.sum() - inv_var * alpha;
    if (shared->rows() > 0)
      grad.segment(1, p).noalias() = shared->predictors.transpose() * deta;
    else
      grad.segment(1, p).setZero();
    grad.segment(1, p) -= inv_var * beta;
    grad[p + 1] = 0.5 * inv_var * sq - half_count - rate * std::exp(log_var) + 1.0;
    return lp;
  });
}

TargetModel make_sv(SvData data) {
  if (data.log_return_diffs.size() < 1) throw ConfigError("SV model needs T >= 2");
  if (!data.log_return_diffs.allFinite()) throw ConfigError("SV returns must be finite");
  if (!(data.rate > 0.0)) throw ConfigError("SV prior rate must be positive");
  auto shared = std::make_shared<const SvData>(std::move(data));
  const Index t = shared->series_length();
  return TargetModel("sv", t + 1, [shared, t](const VectorXd& theta, VectorXd& grad) {
    using boost::math::digamma;
    const double rate = shared->rate;
    const auto z = theta.head(t);
    const double log_nu = theta[t];
    const double nu = std::exp(log_nu);
    grad.setZero();

    // Exponential priors on nu and s_1 with log-Jacobians.
    double lp = -rate * nu + log_nu - rate * std::exp(z[0]) + z[0];
    grad[0] = -rate * std::exp(z[0]) + 1.0;
    double dnu = -rate;

    const double dnu_const =
        0.5 * digamma(0.5 * (nu + 1.0)) - 0.5 * digamma(0.5 * nu) - 0.5 / nu;
    const double lt_const = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                            0.5 * std::log(std::numbers::pi * nu);
    for (Index i = 1; i < t; ++i) {
      const double x = shared->log_return_diffs[i - 1] * std::exp(-z[i]);
      const double x2 = x * x;
      const double log1p_term = std::log1p(x2 / nu);
      // Student-t observation density of the return, including the 1/s_i scale.
      lp += lt_const - 0.5 * (nu + 1.0) * log1p_term - z[i];
      grad[i] += (nu + 1.0) * x2 / (nu + x2) - 1.0;
      dnu += dnu_const - 0.5 * log1p_term + 0.5 * (nu + 1.0) * x2 / (nu * (nu + x2));
    }
    grad[t] = nu * dnu + 1.0;

    // Gaussian random walk on log s with its precision integrated out.
    double half_ss = 0.0;
    for (Index i = 1; i < t; ++i) half_ss += 0.5 * (z[i] - z[i - 1]) * (z[i] - z[i - 1]);
    const double shape = 0.5 * static_cast<double>(t + 1);
    const double base = rate + half_ss;
    lp -= shape * std::log(base);
    const double coef = -shape / base;
    for (Index i = 1; i < t; ++i) {
      const double diff = z[i] - z[i - 1];
      grad[i] += coef * diff;
      grad[i - 1] -= coef * diff;
    }
    return lp;
  });
}

TargetModel make_log_exponential(double rate) {
  if (!(rate > 0.0)) throw ConfigError("exponential rate must be positive");
  return TargetModel("log-exponential", 1, [rate](const VectorXd& theta, VectorXd& grad) {
    const double e = std::exp(theta[0]);
    grad[0] = 1.0 - rate * e;
    return theta[0] - rate * e;
  });
}

MatrixXd wishart_identity(Index dim, double dof, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("Wishart dimension must be positive");
  if (dof < static_cast<double>(dim))
    throw ConfigError("Wishart degrees of freedom must be at least the dimension");
  RngStream rng(derive_seed({seed, 0x3157ULL}));
  MatrixXd lower = MatrixXd::Zero(dim, dim);
  for (Index i = 0; i < dim; ++i) {
    std::chi_squared_distribution<double> chi2(dof - static_cast<double>(i));
    lower(i, i) = std::sqrt(chi2(rng.engine()));
    for (Index j = 0; j < i; ++j) lower(i, j) = rng.normal();
  }
  MatrixXd a = lower * lower.transpose();
  // Exact symmetry.
  return 0.5 * (a + a.transpose());
}

MvnSpec build_mvn_spec(const MvnModelSpec& spec) {
  const double dof = spec.dof > 0.0 ? spec.dof : static_cast<double>(spec.dim);
  MvnSpec out;
  for (std::uint64_t seed = spec.seed;; ++seed) {
    out.precision = wishart_identity(spec.dim, dof, seed);
    out.seed = seed;
    if (out.precision.llt().info() == Eigen::Success) break;
    std::clog << "nuts: Wishart draw with seed " << seed
              << " is not positive definite; regenerating with seed " << seed + 1 << '\n';
  }
  return out;
}

TargetModel build_target(const ModelSpec& spec) {
  struct Visitor {
    TargetModel operator()(const MvnModelSpec& s) const { return make_mvn(build_mvn_spec(s)); }
    TargetModel operator()(const LogRegData& d) const { return make_logreg(d); }
    TargetModel operator()(const HlrSpec& s) const { return make_hlr(s); }
    TargetModel operator()(const SvData& d) const { return make_sv(d); }
  };
  return std::visit(Visitor{}, spec);
}

}  // namespace nuts
