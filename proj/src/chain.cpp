#include "nuts/chain.hpp"

#include <numeric>

namespace nuts {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::none: return "none";
    case Termination::uturn: return "uturn";
    case Termination::subtree: return "subtree";
    case Termination::max_depth: return "max_depth";
  }
  return "unknown";
}

std::int64_t ChainOutput::total_grads() const {
  return std::accumulate(stats.begin(), stats.end(), std::int64_t{0},
                         [](std::int64_t acc, const IterationStats& s) { return acc + s.grads; });
}

std::int64_t ChainOutput::kept_grads() const {
  std::int64_t total = 0;
  for (std::size_t m = static_cast<std::size_t>(adapt_iterations); m < stats.size(); ++m)
    total += stats[m].grads;
  return total;
}

Eigen::MatrixXd ChainOutput::kept_draws() const {
  return draws.bottomRows(draws.rows() - adapt_iterations);
}

double ChainOutput::mean_accept_stat_kept() const {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t m = static_cast<std::size_t>(adapt_iterations); m < stats.size(); ++m) {
    sum += stats[m].accept_stat;
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace nuts
