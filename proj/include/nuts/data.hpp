#pragma once

#include <cstdint>
#include <filesystem>

#include <Eigen/Dense>

namespace nuts {

/// Logistic-regression data with labels in {-1, +1}.
struct LogRegData {
  Eigen::MatrixXd predictors;  // N x K
  Eigen::VectorXd labels;      // N
  double prior_variance = 100.0;

  Eigen::Index rows() const { return predictors.rows(); }
  Eigen::Index cols() const { return predictors.cols(); }
};

struct HlrSpec {
  LogRegData base_data;
  /// Rate of the exponential prior on sigma^2.
  double rate = 0.01;
};

struct SvData {
  /// log y_i - log y_{i-1} for a series of T prices.
  Eigen::VectorXd log_return_diffs;
  double rate = 0.01;

  /// Number of price points, equal to the number of volatility scales.
  Eigen::Index series_length() const { return log_return_diffs.size() + 1; }
};

/// Columns rescaled to zero mean and unit sample variance (N-1 divisor).
/// Constant columns are centred only.
Eigen::MatrixXd standardize(const Eigen::MatrixXd& x);

/// Original K columns followed by every product x_a * x_b (a < b), each
/// re-standardized. Result has K + K(K-1)/2 columns.
Eigen::MatrixXd interaction_expand(const Eigen::MatrixXd& x);

/// Reads the 25-column numeric German credit format. Predictors are
/// standardized; label 1 maps to +1 and 2 to -1.
LogRegData load_german_credit(const std::filesystem::path& path);

/// Single-column CSV of positive prices (optional header line).
SvData load_price_csv(const std::filesystem::path& path);

/// Standardized Gaussian predictors and labels drawn from a logistic model
/// with N(0, 1) coefficients.
LogRegData synthetic_logreg(Eigen::Index n, Eigen::Index k, std::uint64_t seed);

/// Simulates the stochastic-volatility generative process for T prices.
SvData synthetic_sv(Eigen::Index t, std::uint64_t seed);

}  // namespace nuts
