#include "nuts/data.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nuts/errors.hpp"
#include "nuts/rng.hpp"

namespace nuts {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd standardize(const MatrixXd& x) {
  MatrixXd out = x;
  const Index n = x.rows();
  if (n < 2) return out;
  for (Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).mean();
    out.col(c).array() -= mean;
    const double var = out.col(c).squaredNorm() / static_cast<double>(n - 1);
    if (var > 0.0) out.col(c) /= std::sqrt(var);
  }
  return out;
}

MatrixXd interaction_expand(const MatrixXd& x) {
  const Index k = x.cols();
  MatrixXd out(x.rows(), k + k * (k - 1) / 2);
  out.leftCols(k) = x;
  Index c = k;
  for (Index a = 0; a < k; ++a)
    for (Index b = a + 1; b < k; ++b) out.col(c++) = x.col(a).cwiseProduct(x.col(b));
  return standardize(out);
}

LogRegData load_german_credit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError("non-numeric field '" + tok + "'", line_no);
      }
    }
    if (row.size() != 25)
      throw ParseError("expected 25 columns, found " + std::to_string(row.size()), line_no);
    if (row.back() != 1.0 && row.back() != 2.0)
      throw ParseError("label must be 1 or 2", line_no);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw ConfigError("German credit data needs at least 2 rows");

  const Index n = static_cast<Index>(rows.size());
  LogRegData data;
  data.predictors.resize(n, 24);
  data.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < 24; ++c) data.predictors(i, c) = rows[i][c];
    data.labels[i] = rows[i][24] == 1.0 ? 1.0 : -1.0;
  }
  data.predictors = standardize(data.predictors);
  return data;
}

SvData load_price_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());

  std::vector<double> prices;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    const std::string field = line.substr(first, last - first + 1);
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(field, &used);
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      if (prices.empty() && line_no == 1) continue;  // header
      throw ParseError("non-numeric price '" + field + "'", line_no);
    }
    if (!(value > 0.0) || !std::isfinite(value))
      throw ParseError("prices must be positive and finite", line_no);
    prices.push_back(value);
  }
  if (prices.size() < 2) throw ConfigError("price series needs at least 2 values");

  SvData data;
  data.log_return_diffs.resize(static_cast<Index>(prices.size()) - 1);
  for (std::size_t i = 1; i < prices.size(); ++i)
    data.log_return_diffs[static_cast<Index>(i) - 1] = std::log(prices[i]) - std::log(prices[i - 1]);
  return data;
}

LogRegData synthetic_logreg(Index n, Index k, std::uint64_t seed) {
  if (n < 2) throw ConfigError("synthetic logreg needs N >= 2");
  if (k < 1) throw ConfigError("synthetic logreg needs K >= 1");
  RngStream rng(derive_seed({seed, 0x10c1e9ULL}));
  MatrixXd x(n, k);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < k; ++c) x(i, c) = rng.normal();
  LogRegData data;
  data.predictors = standardize(x);
  const VectorXd beta = rng.normal_vector(k);
  const double alpha = rng.normal();
  data.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double eta = alpha + data.predictors.row(i).dot(beta);
    const double p = 1.0 / (1.0 + std::exp(-eta));
    data.labels[i] = rng.uniform() < p ? 1.0 : -1.0;
  }
  return data;
}

SvData synthetic_sv(Index t, std::uint64_t seed) {
  if (t < 2) throw ConfigError("synthetic SV needs T >= 2");
  // Redraw hyperparameters on overflow; very small tau makes the walk explode.
  for (std::uint64_t attempt = 0;; ++attempt) {
    RngStream rng(derive_seed({seed, 0x5f0ULL, attempt}));
    std::exponential_distribution<double> prior(0.01);
    const double tau = prior(rng.engine());
    const double nu = prior(rng.engine());
    double log_s = std::log(prior(rng.engine()));
    std::student_t_distribution<double> innovation(nu);

    SvData data;
    data.log_return_diffs.resize(t - 1);
    for (Index i = 1; i < t; ++i) {
      log_s += rng.normal() / std::sqrt(tau);
      data.log_return_diffs[i - 1] = std::exp(log_s) * innovation(rng.engine());
    }
    if (data.log_return_diffs.allFinite()) return data;
  }
}

}  // namespace nuts
