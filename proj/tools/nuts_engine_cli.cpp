#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nuts/diagnostics.hpp"
#include "nuts/errors.hpp"
#include "nuts/harness.hpp"

namespace fs = std::filesystem;
using nuts::ExperimentConfig;

namespace {

struct SampleOptions {
  std::string model = "mvn";
  std::string sampler = "nuts";
  int iterations = 2000;
  int adapt = 1000;
  int burn_in = -1;
  double delta = 0.6;
  double lambda = 0.0;
  double epsilon = 0.0;
  int steps = 0;
  std::uint64_t seed = 1;
  std::string out = "out";
  int max_depth = 10;
  bool paper_scale = false;
};

int run_sample(const SampleOptions& o) {
  ExperimentConfig config;
  config.model = o.model;
  config.samplers = {nuts::parse_sampler(o.sampler)};
  config.iterations = o.iterations;
  config.adapt_iterations = config.samplers[0] == nuts::Sampler::hmc_fixed ? 0 : o.adapt;
  if (o.burn_in >= 0) config.burn_in = o.burn_in;
  config.deltas = {o.delta};
  if (config.samplers[0] == nuts::Sampler::hmc) {
    if (!(o.lambda > 0.0)) throw nuts::ConfigError("sampler hmc needs --lambda");
    config.lambdas = {o.lambda};
  }
  config.step_size = o.epsilon;
  config.num_steps = o.steps;
  config.seed = o.seed;
  config.max_depth = o.max_depth;
  config.paper_scale = o.paper_scale;
  config.output_dir = o.out;
  config.validate();

  const auto model = nuts::build_model(config.model, config.paper_scale);
  const auto point = nuts::expand_grid(config).front();
  const auto seed = nuts::chain_seed(config.seed, point.grid_index, 0);
  const auto chain = nuts::run_chain(model, config, point, seed);
  const int burn_in = config.effective_burn_in();
  nuts::write_chain_files(o.out, chain, burn_in);

  nlohmann::json j{{"config", nuts::config_to_json(config)},
                   {"seed", seed},
                   {"total_grads", chain.total_grads()},
                   {"init_grads", chain.init_grads},
                   {"final_step_size", chain.final_step_size},
                   {"eps_bar_trace", chain.eps_bar_trace},
                   {"warnings", chain.warnings}};
  std::ofstream(fs::path(o.out) / "summary.json") << j.dump(2) << '\n';
  for (const auto& w : chain.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "wrote " << chain.draws.rows() - burn_in << " draws to "
            << (fs::path(o.out) / "draws.csv").string() << '\n';
  return 0;
}

struct EssOptions {
  std::string draws;
  std::string ref;
  std::string model;
  std::string stats;
  int burn_in = 0;
  long long grads = 0;
  double cutoff = 0.05;
  std::string out;
};

int run_ess(const EssOptions& o) {
  const Eigen::MatrixXd draws = nuts::read_draws_csv(o.draws);
  std::vector<nuts::DimensionReference> refs;
  if (o.ref == "analytic") {
    if (o.model.empty()) throw nuts::ConfigError("--ref analytic needs --model");
    const auto model = nuts::build_model(o.model);
    if (!model.gaussian()) throw nuts::ConfigError("analytic references need an mvn/normal model");
    refs = nuts::gaussian_references(model.gaussian()->covariance());
  } else if (fs::path(o.ref).extension() == ".json") {
    std::ifstream in(o.ref);
    if (!in) throw nuts::IoError("cannot open " + o.ref);
    refs = nuts::references_from_json(nlohmann::json::parse(in));
  } else {
    refs = nuts::references_from_draws(nuts::read_draws_csv(o.ref), "reference draws " + o.ref);
  }
  std::int64_t grads = o.grads;
  if (!o.stats.empty()) grads = nuts::read_stats_grads(o.stats, o.burn_in);

  nuts::EssOptions options;
  options.cutoff = o.cutoff;
  const auto report = nuts::ess_report(draws, refs, grads, options);
  nlohmann::json j{{"ess_mean", report.ess_mean},
                   {"ess_second", report.ess_second},
                   {"cutoff_mean", report.cutoff_mean},
                   {"cutoff_second", report.cutoff_second},
                   {"min_ess", report.min_ess},
                   {"grads", report.grads},
                   {"ess_per_grad", report.ess_per_grad},
                   {"flags", report.flags}};
  if (o.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream out(o.out);
    if (!out) throw nuts::IoError("cannot write " + o.out);
    out << j.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-based MCMC: HMC and the No-U-Turn Sampler with dual averaging"};
  app.require_subcommand(1);

  SampleOptions so;
  auto* sample = app.add_subcommand("sample", "Run one chain and write draws/stats CSV");
  sample->add_option("--model", so.model, "Model spec, e.g. mvn:dim=10,seed=1")->capture_default_str();
  sample->add_option("--sampler", so.sampler, "hmc | hmc-fixed | nuts | nuts-naive | rwm | gibbs")
      ->capture_default_str();
  sample->add_option("--iters", so.iterations, "Total iterations M")->capture_default_str();
  sample->add_option("--adapt", so.adapt, "Adaptation iterations")->capture_default_str();
  sample->add_option("--burn-in", so.burn_in, "Draws to discard (default: --adapt)");
  sample->add_option("--delta", so.delta, "Target acceptance statistic")->capture_default_str();
  sample->add_option("--lambda", so.lambda, "Simulation length for adaptive HMC");
  sample->add_option("--epsilon", so.epsilon, "Step size (fixed HMC) or initial step size");
  sample->add_option("--steps", so.steps, "Leapfrog steps for hmc-fixed");
  sample->add_option("--seed", so.seed, "Root seed")->capture_default_str();
  sample->add_option("--out", so.out, "Output directory")->capture_default_str();
  sample->add_option("--max-depth", so.max_depth, "NUTS tree depth cap")->capture_default_str();
  sample->add_flag("--paper-scale", so.paper_scale, "Use full-size default models");

  EssOptions eo;
  auto* ess = app.add_subcommand("ess", "Effective sample size report for a draws CSV");
  ess->add_option("--draws", eo.draws, "Draws CSV")->required();
  ess->add_option("--ref", eo.ref, "references.json, reference draws CSV, or 'analytic'")->required();
  ess->add_option("--model", eo.model, "Model spec for analytic references");
  ess->add_option("--stats", eo.stats, "stats.csv for the gradient count");
  ess->add_option("--burn-in", eo.burn_in, "Warm-up rows to skip in --stats");
  ess->add_option("--grads", eo.grads, "Gradient count when --stats is absent");
  ess->add_option("--cutoff", eo.cutoff, "Autocorrelation truncation level")->capture_default_str();
  ess->add_option("--out", eo.out, "Write the report here instead of stdout");

  std::string config_path;
  std::string bench_out;
  int bench_workers = 0;
  auto* bench = app.add_subcommand("benchmark", "Run an experiment grid from a config file");
  bench->add_option("--config", config_path, "Flat key = value config file")->required();
  bench->add_option("--out", bench_out, "Override the output directory");
  bench->add_option("--workers", bench_workers, "Parallel chains (also NUTS_ENGINE_WORKERS)");

  std::string compare_in;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Tabulate ESS per gradient across summaries");
  compare->add_option("--in", compare_in, "Directory containing summary.json files")->required();
  compare->add_option("--out", compare_out, "CSV output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sample) return run_sample(so);
    if (*ess) return run_ess(eo);
    if (*bench) {
      ExperimentConfig config = nuts::load_config(config_path);
      if (!bench_out.empty()) config.output_dir = bench_out;
      if (bench_workers > 0) config.workers = bench_workers;
      if (config.paper_scale)
        std::cerr << "warning: paper-scale models can take hours per chain\n";
      const auto summary = nuts::run_experiment(config);
      nuts::write_comparison_csv(std::cout, nuts::compare_samplers({summary}));
      return 0;
    }
    if (*compare) {
      const auto rows = nuts::compare_samplers(nuts::load_summaries(compare_in));
      if (compare_out.empty()) {
        nuts::write_comparison_csv(std::cout, rows);
      } else {
        std::ofstream out(compare_out);
        if (!out) throw nuts::IoError("cannot write " + compare_out);
        nuts::write_comparison_csv(out, rows);
      }
      return 0;
    }
  } catch (const nuts::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const nuts::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const nuts::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
