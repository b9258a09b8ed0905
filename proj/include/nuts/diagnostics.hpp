#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nuts {

/// Externally estimated mean and variance of a scalar functional.
struct MomentReference {
  double mean = 0.0;
  double variance = 1.0;
  std::string provenance;
};

struct EssOptions {
  /// Truncate the autocorrelation sum at the first lag below this value.
  double cutoff = 0.05;
  /// Whether the first lag below the cutoff is itself included in the sum.
  bool include_cutoff_lag = true;
};

/**
 * Autocorrelations rho_0..rho_max_lag of `chain`, centred and scaled by
 * the reference moments rather than the chain's own.
 */
std::vector<double> autocorrelation(const Eigen::Ref<const Eigen::VectorXd>& chain,
                                    const MomentReference& ref, Eigen::Index max_lag);

struct EssResult {
  double value = 0.0;
  Eigen::Index cutoff = 0;
  bool cutoff_reached = true;
  /// 1 + 2 sum(...) was at or below 1/M and got clamped.
  bool super_efficient = false;
  /// Chain has zero variance although the reference variance is positive.
  bool degenerate = false;
};

/// Truncated-autocorrelation effective sample size of the mean of `chain`.
EssResult ess(const Eigen::Ref<const Eigen::VectorXd>& chain, const MomentReference& ref,
              const EssOptions& options = {});

/// Reference moments for coordinate d: for theta_d itself and for
/// (theta_d - mean_d)^2.
struct DimensionReference {
  MomentReference first;
  MomentReference second;
};

struct EssReport {
  std::vector<double> ess_mean;
  std::vector<double> ess_second;
  std::vector<Eigen::Index> cutoff_mean;
  std::vector<Eigen::Index> cutoff_second;
  double min_ess = 0.0;
  std::int64_t grads = 0;
  double ess_per_grad = 0.0;
  std::vector<std::string> flags;
};

EssReport ess_report(const Eigen::MatrixXd& draws, const std::vector<DimensionReference>& refs,
                     std::int64_t grads, const EssOptions& options = {});

/// Reference moments from a long run: per coordinate, the mean and
/// variance of theta_d and of (theta_d - mean_d)^2.
std::vector<DimensionReference> references_from_draws(const Eigen::MatrixXd& draws,
                                                      const std::string& provenance);

/// Exact references for a zero-mean Gaussian with covariance `cov`.
std::vector<DimensionReference> gaussian_references(const Eigen::MatrixXd& cov);

/// Mean of `stats` minus `delta`.
double h_discrepancy(const std::vector<double>& stats, double delta);

struct TrajectoryHistogram {
  std::map<std::int64_t, std::int64_t> counts;
  double power_of_two_fraction = 0.0;
};

TrajectoryHistogram trajectory_histogram(const std::vector<std::int64_t>& state_counts);

bool is_power_of_two(std::int64_t n);

}  // namespace nuts
