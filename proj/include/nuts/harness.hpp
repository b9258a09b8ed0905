#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nuts/chain.hpp"
#include "nuts/diagnostics.hpp"
#include "nuts/model.hpp"

namespace nuts {

enum class Sampler { hmc, hmc_fixed, nuts, nuts_naive, rwm, gibbs };

const char* to_string(Sampler s);
Sampler parse_sampler(const std::string& name);

/**
 * Model description such as "mvn:dim=10,seed=1", "logreg:n=200,k=8,seed=3",
 * "hlr:file=german.data", "sv:t=200,seed=2" or "normal:dim=1". A bare
 * name uses the desk-scale defaults; `paper_scale` switches them to the
 * full-size problems.
 */
TargetModel build_model(const std::string& spec, bool paper_scale = false);

/// `count` log-spaced values from `smallest` to `smallest * ratio`.
std::vector<double> log_spaced_grid(double smallest, double ratio, int count);

struct ExperimentConfig {
  std::string model = "mvn";
  std::vector<Sampler> samplers{Sampler::nuts};
  int iterations = 2000;
  int adapt_iterations = 1000;
  std::vector<double> deltas{0.6};
  /// Simulation lengths; required iff an adaptive HMC sampler is present.
  std::vector<double> lambdas;
  int replications = 1;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  /// Draws discarded before ESS; defaults to `adapt_iterations`.
  std::optional<int> burn_in;
  int max_depth = 10;
  double step_size = 0.0;
  int num_steps = 0;
  double rwm_scale = 0.0;
  /// Length of the NUTS reference run; 0 means 25x the kept draws.
  int reference_iterations = 0;
  bool paper_scale = false;
  int workers = 0;

  int effective_burn_in() const { return burn_in.value_or(adapt_iterations); }
  void validate() const;
};

/// Parses flat `key = value` lines (TOML-compatible subset: numbers,
/// booleans, quoted strings and flat arrays; `#` comments).
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

struct GridPoint {
  Sampler sampler = Sampler::nuts;
  double delta = 0.0;
  double lambda = 0.0;
  int grid_index = 0;
};

std::vector<GridPoint> expand_grid(const ExperimentConfig& config);

/// Stable per-chain seed from (root seed, grid index, replication).
std::uint64_t chain_seed(std::uint64_t root, int grid_index, int replication);

/// Runs one chain of the configured sampler at a grid point.
ChainOutput run_chain(const TargetModel& model, const ExperimentConfig& config,
                      const GridPoint& point, std::uint64_t seed);

struct ChainSummary {
  std::string label;
  std::string model;
  Sampler sampler = Sampler::nuts;
  double delta = 0.0;
  double lambda = 0.0;
  int replication = 0;
  std::uint64_t seed = 0;
  std::optional<EssReport> ess;
  std::optional<double> h_discrepancy;
  std::int64_t total_grads = 0;
  std::int64_t kept_grads = 0;
  double final_step_size = 0.0;
  double acceptance_rate = 0.0;
  std::vector<double> eps_bar_trace;
  std::map<std::int64_t, std::int64_t> trajectory_counts;
  double power_of_two_fraction = 0.0;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
};

struct RunSummary {
  nlohmann::json config;
  std::string model;
  std::vector<ChainSummary> chains;
  std::string reference_provenance;
};

nlohmann::json to_json(const ChainSummary& c);
nlohmann::json to_json(const RunSummary& s);
RunSummary summary_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

/// Reference moments for ESS: analytic for Gaussian targets, otherwise a
/// NUTS run with delta = 0.5.
std::vector<DimensionReference> compute_references(const TargetModel& model,
                                                   const ExperimentConfig& config,
                                                   std::string& provenance);

nlohmann::json references_to_json(const std::vector<DimensionReference>& refs);
std::vector<DimensionReference> references_from_json(const nlohmann::json& j);

/// Writes `draws.csv` (kept rows, header theta_0..) and `stats.csv`.
void write_chain_files(const std::filesystem::path& dir, const ChainOutput& chain, int burn_in);
void write_draws_csv(const std::filesystem::path& file, const Eigen::MatrixXd& draws);
Eigen::MatrixXd read_draws_csv(const std::filesystem::path& file);
/// Sum of the `grads` column of a stats CSV over rows past `burn_in`.
std::int64_t read_stats_grads(const std::filesystem::path& file, int burn_in);

/// Executes every replication of every grid point, writing per-chain
/// artifacts under `config.output_dir` plus `summary.json`.
RunSummary run_experiment(const ExperimentConfig& config);

struct ComparisonRow {
  std::string model;
  Sampler sampler = Sampler::nuts;
  double delta = 0.0;
  double lambda = 0.0;
  int replications = 0;
  double ess_per_grad = 0.0;
  /// ess_per_grad divided by the best adaptive-HMC grid point.
  std::optional<double> ratio_to_best_hmc;
};

/// Mean min-ESS per gradient at each grid point across replications.
std::vector<ComparisonRow> compare_samplers(const std::vector<RunSummary>& summaries);
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

/// Loads every summary.json under `dir`.
std::vector<RunSummary> load_summaries(const std::filesystem::path& dir);

}  // namespace nuts
