#include "nuts/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nuts/errors.hpp"

namespace nuts {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

void check_reference(const MomentReference& ref) {
  if (!(ref.variance > 0.0) || !std::isfinite(ref.variance))
    throw ConfigError("reference variance must be positive and finite");
}

double lag_product(const VectorXd& centred, Index lag) {
  const Index m = centred.size();
  return centred.tail(m - lag).dot(centred.head(m - lag));
}

}  // namespace

std::vector<double> autocorrelation(const Eigen::Ref<const VectorXd>& chain,
                                    const MomentReference& ref, Index max_lag) {
  check_reference(ref);
  const Index m = chain.size();
  if (m < 2) throw ConfigError("autocorrelation needs at least 2 draws");
  if (max_lag < 0 || max_lag >= m) throw ConfigError("max_lag must lie in [0, M)");
  const VectorXd centred = chain.array() - ref.mean;
  std::vector<double> rho(static_cast<std::size_t>(max_lag) + 1);
  for (Index s = 0; s <= max_lag; ++s)
    rho[static_cast<std::size_t>(s)] =
        lag_product(centred, s) / (ref.variance * static_cast<double>(m - s));
  return rho;
}

EssResult ess(const Eigen::Ref<const VectorXd>& chain, const MomentReference& ref,
              const EssOptions& options) {
  check_reference(ref);
  const Index m = chain.size();
  if (m < 10) throw ConfigError("ESS needs at least 10 draws");
  const double md = static_cast<double>(m);
  const VectorXd centred = chain.array() - ref.mean;

  EssResult out;
  out.degenerate = (chain.array() == chain[0]).all();
  out.cutoff_reached = false;
  double sum = 0.0;
  Index s = 1;
  for (; s < m; ++s) {
    const double rho = lag_product(centred, s) / (ref.variance * (md - static_cast<double>(s)));
    const bool below = rho < options.cutoff;
    if (!below || options.include_cutoff_lag) sum += (1.0 - static_cast<double>(s) / md) * rho;
    if (below) {
      out.cutoff_reached = true;
      break;
    }
  }
  out.cutoff = std::min(s, m - 1);
  double denominator = 1.0 + 2.0 * sum;
  if (denominator <= 1.0 / md) {
    denominator = 1.0 / md;
    out.super_efficient = true;
  }
  out.value = md / denominator;
  return out;
}

EssReport ess_report(const Eigen::MatrixXd& draws, const std::vector<DimensionReference>& refs,
                     std::int64_t grads, const EssOptions& options) {
  const Index dims = draws.cols();
  if (static_cast<Index>(refs.size()) != dims)
    throw ConfigError("reference count " + std::to_string(refs.size()) +
                      " does not match draw dimension " + std::to_string(dims));
  if (dims == 0) throw ConfigError("ESS report needs at least one dimension");

  EssReport report;
  report.grads = grads;
  report.min_ess = std::numeric_limits<double>::infinity();
  auto note = [&](const EssResult& r, Index d, const char* which) {
    const std::string where = std::string(which) + "[" + std::to_string(d) + "]";
    if (!r.cutoff_reached) report.flags.push_back("cutoff not reached: " + where);
    if (r.super_efficient) report.flags.push_back("super-efficient chain: " + where);
    if (r.degenerate) report.flags.push_back("degenerate chain: " + where);
  };
  for (Index d = 0; d < dims; ++d) {
    const auto& ref = refs[static_cast<std::size_t>(d)];
    const VectorXd col = draws.col(d);
    const EssResult first = ess(col, ref.first, options);
    const VectorXd sq = (col.array() - ref.first.mean).square();
    const EssResult second = ess(sq, ref.second, options);
    report.ess_mean.push_back(first.value);
    report.ess_second.push_back(second.value);
    report.cutoff_mean.push_back(first.cutoff);
    report.cutoff_second.push_back(second.cutoff);
    note(first, d, "mean");
    note(second, d, "second");
    report.min_ess = std::min({report.min_ess, first.value, second.value});
  }
  report.ess_per_grad = grads > 0 ? report.min_ess / static_cast<double>(grads) : 0.0;
  return report;
}

std::vector<DimensionReference> references_from_draws(const Eigen::MatrixXd& draws,
                                                      const std::string& provenance) {
  const Index n = draws.rows();
  if (n < 2) throw ConfigError("reference run needs at least 2 draws");
  std::vector<DimensionReference> refs;
  for (Index d = 0; d < draws.cols(); ++d) {
    const VectorXd col = draws.col(d);
    const double mean = col.mean();
    const VectorXd sq = (col.array() - mean).square();
    const double var = sq.sum() / static_cast<double>(n - 1);
    const double sq_mean = sq.mean();
    const double sq_var = (sq.array() - sq_mean).square().sum() / static_cast<double>(n - 1);
    refs.push_back({{mean, var, provenance}, {sq_mean, sq_var, provenance}});
  }
  return refs;
}

std::vector<DimensionReference> gaussian_references(const Eigen::MatrixXd& cov) {
  std::vector<DimensionReference> refs;
  for (Index d = 0; d < cov.rows(); ++d) {
    const double v = cov(d, d);
    refs.push_back({{0.0, v, "analytic"}, {v, 2.0 * v * v, "analytic"}});
  }
  return refs;
}

double h_discrepancy(const std::vector<double>& stats, double delta) {
  if (stats.empty()) throw ConfigError("h discrepancy needs at least one statistic");
  double sum = 0.0;
  for (double a : stats) sum += a;
  return sum / static_cast<double>(stats.size()) - delta;
}

bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

TrajectoryHistogram trajectory_histogram(const std::vector<std::int64_t>& state_counts) {
  if (state_counts.empty()) throw ConfigError("trajectory histogram needs data");
  TrajectoryHistogram h;
  std::int64_t pow2 = 0;
  for (auto c : state_counts) {
    ++h.counts[c];
    pow2 += is_power_of_two(c);
  }
  h.power_of_two_fraction = static_cast<double>(pow2) / static_cast<double>(state_counts.size());
  return h;
}

}  // namespace nuts
