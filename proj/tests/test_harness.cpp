#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "nuts/errors.hpp"
#include "nuts/harness.hpp"

using namespace nuts;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "nuts_engine_harness_tests" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig small_nuts(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.model = "mvn:dim=2,seed=1";
  cfg.samplers = {Sampler::nuts};
  cfg.iterations = 200;
  cfg.adapt_iterations = 100;
  cfg.deltas = {0.6};
  cfg.seed = 1;
  cfg.output_dir = out;
  cfg.workers = 2;
  return cfg;
}

int count_chain_dirs(const fs::path& root) {
  int n = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().filename() == "draws.csv") ++n;
  return n;
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream in(R"(# desk benchmark
model = "logreg:n=100,k=3,seed=2"
samplers = ["nuts", "hmc"]   # both adaptive samplers
iterations = 400
adapt_iterations = 200
deltas = [0.6, 0.8]
lambda_min = 0.5
lambda_ratio = 40
lambda_count = 4
replications = 2
seed = 9

[extras]
)");
  auto cfg = parse_config(in);
  CHECK(cfg.model == "logreg:n=100,k=3,seed=2");
  REQUIRE(cfg.samplers.size() == 2);
  CHECK(cfg.samplers[1] == Sampler::hmc);
  CHECK(cfg.deltas == std::vector<double>{0.6, 0.8});
  REQUIRE(cfg.lambdas.size() == 4);
  CHECK(cfg.lambdas.back() == doctest::Approx(20.0));
  CHECK(cfg.seed == 9);
  CHECK(cfg.effective_burn_in() == 200);

  std::istringstream bad("iterations = 10\nbogus_key = 3\n");
  try {
    parse_config(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("config validation") {
  ExperimentConfig cfg;
  cfg.samplers = {Sampler::hmc};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.lambdas = {1.0};
  CHECK_NOTHROW(cfg.validate());
  cfg.samplers = {Sampler::nuts};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.lambdas.clear();
  cfg.deltas.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("simulation-length grid") {
  auto grid = log_spaced_grid(0.1, 40.0, 10);
  REQUIRE(grid.size() == 10);
  CHECK(grid.front() == doctest::Approx(0.1));
  CHECK(grid.back() == doctest::Approx(4.0));
  for (std::size_t i = 1; i < grid.size(); ++i)
    CHECK(grid[i] / grid[i - 1] == doctest::Approx(std::pow(40.0, 1.0 / 9.0)));
}

TEST_CASE("grid expansion and seeds") {
  ExperimentConfig cfg;
  cfg.samplers = {Sampler::nuts, Sampler::hmc, Sampler::rwm};
  cfg.deltas = {0.6, 0.8};
  cfg.lambdas = {0.5, 1.0, 2.0};
  auto grid = expand_grid(cfg);
  CHECK(grid.size() == 2 + 6 + 1);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(grid[i].grid_index == static_cast<int>(i));
  CHECK(chain_seed(1, 0, 0) == chain_seed(1, 0, 0));
  CHECK(chain_seed(1, 0, 0) != chain_seed(1, 0, 1));
  CHECK(chain_seed(1, 0, 1) != chain_seed(1, 1, 0));
}

TEST_CASE("model specifications") {
  CHECK(build_model("mvn:dim=3,seed=2").dim() == 3);
  CHECK(build_model("mvn").dim() == 10);
  CHECK(build_model("normal:dim=4").dim() == 4);
  CHECK(build_model("logreg:n=50,k=3,seed=1").dim() == 4);
  CHECK(build_model("hlr:n=50,k=4,seed=1").dim() == 1 + 4 + 6 + 1);
  CHECK(build_model("sv:t=30,seed=1").dim() == 31);
  CHECK_THROWS_AS(build_model("banana"), ConfigError);
  CHECK_THROWS_AS(build_model("mvn:dims=3"), ConfigError);
  CHECK(parse_sampler("nuts-naive") == Sampler::nuts_naive);
  CHECK_THROWS_AS(parse_sampler("slice"), ConfigError);
}

TEST_CASE("experiments are byte-for-byte reproducible") {
  auto a = scratch("det_a");
  auto b = scratch("det_b");
  run_experiment(small_nuts(a));
  run_experiment(small_nuts(b));
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name != "draws.csv" && name != "stats.csv") continue;
    auto twin = b / fs::relative(entry.path(), a);
    REQUIRE(fs::exists(twin));
    CHECK(slurp(entry.path()) == slurp(twin));
  }
  CHECK(count_chain_dirs(a) == 1);
  CHECK_FALSE(fs::exists(a / ".incomplete"));
  CHECK(fs::exists(a / "summary.json"));
  CHECK(fs::exists(a / "comparison.csv"));
}

TEST_CASE("grid of samplers, deltas and replications") {
  auto out = scratch("grid");
  auto cfg = small_nuts(out);
  cfg.samplers = {Sampler::nuts, Sampler::nuts_naive};
  cfg.deltas = {0.6, 0.8};
  cfg.replications = 3;
  cfg.iterations = 120;
  cfg.adapt_iterations = 60;
  auto summary = run_experiment(cfg);
  CHECK(summary.chains.size() == 12);
  CHECK(count_chain_dirs(out) == 12);

  SUBCASE("gradient counts agree with the stats files") {
    for (const auto& c : summary.chains) {
      CHECK(read_stats_grads(out / c.label / "stats.csv", 0) == c.total_grads);
      CHECK(read_stats_grads(out / c.label / "stats.csv", cfg.effective_burn_in()) == c.kept_grads);
      REQUIRE(c.ess.has_value());
      CHECK(c.ess->grads == c.kept_grads);
    }
  }
  SUBCASE("summaries round-trip through JSON") {
    auto back = summary_from_json(to_json(summary));
    REQUIRE(back.chains.size() == summary.chains.size());
    CHECK(back.chains[3].label == summary.chains[3].label);
    CHECK(back.chains[3].ess->min_ess == summary.chains[3].ess->min_ess);
  }
}

TEST_CASE("sampler comparison") {
  auto out = scratch("compare");
  auto cfg = small_nuts(out);
  cfg.samplers = {Sampler::nuts, Sampler::hmc};
  cfg.deltas = {0.65};
  cfg.lambdas = {0.5, 2.0};
  cfg.iterations = 300;
  cfg.adapt_iterations = 150;
  auto summary = run_experiment(cfg);
  auto rows = compare_samplers({summary});
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    REQUIRE(row.ratio_to_best_hmc.has_value());
    CHECK(row.ess_per_grad > 0.0);
  }
  std::ostringstream csv;
  write_comparison_csv(csv, rows);
  CHECK(csv.str().find("ratio_to_best_hmc") != std::string::npos);
  CHECK(csv.str().find("\n\"mvn:dim=2,seed=1\",") != std::string::npos);

  auto loaded = load_summaries(out);
  REQUIRE(loaded.size() == 1);
  CHECK(compare_samplers(loaded).size() == 3);

  SUBCASE("single summary gives one row") {
    auto single = scratch("single");
    run_experiment(small_nuts(single));
    CHECK(compare_samplers(load_summaries(single)).size() == 1);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(compare_samplers({}), ConfigError);
    auto other = summary;
    other.model = "mvn:dim=3,seed=1";
    CHECK_THROWS_AS(compare_samplers({summary, other}), ConfigError);
  }
}

TEST_CASE("gibbs requires a Gaussian model") {
  auto out = scratch("gibbs_bad");
  auto cfg = small_nuts(out);
  cfg.model = "logreg:n=40,k=2,seed=1";
  cfg.samplers = {Sampler::gibbs};
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
  CHECK((!fs::exists(out) || count_chain_dirs(out) == 0));
}

TEST_CASE("every sampler runs through the harness") {
  auto out = scratch("all");
  auto cfg = small_nuts(out);
  cfg.samplers = {Sampler::hmc, Sampler::hmc_fixed, Sampler::nuts, Sampler::nuts_naive,
                  Sampler::rwm, Sampler::gibbs};
  cfg.lambdas = {1.0};
  cfg.step_size = 0.2;
  cfg.num_steps = 5;
  auto summary = run_experiment(cfg);
  CHECK(summary.chains.size() == 6);
}

TEST_CASE("unwritable output directory") {
  auto base = scratch("blocked");
  fs::create_directories(base);
  std::ofstream(base / "file") << "x";
  auto cfg = small_nuts(base / "file" / "out");
  CHECK_THROWS_AS(run_experiment(cfg), IoError);
}

TEST_CASE("draw files round-trip") {
  auto dir = scratch("csv");
  fs::create_directories(dir);
  MatrixXd draws(3, 2);
  draws << 0.1, -2.5e-17, 1.0 / 3.0, 12345.678, -0.0, 6.02e23;
  write_draws_csv(dir / "d.csv", draws);
  CHECK(read_draws_csv(dir / "d.csv") == draws);
  CHECK(slurp(dir / "d.csv").rfind("theta_0,theta_1\n", 0) == 0);
  CHECK_THROWS_AS(read_draws_csv(dir / "missing.csv"), IoError);
}

TEST_CASE("reference moments round-trip") {
  MatrixXd cov(2, 2);
  cov << 1.0, 0.2, 0.2, 0.5;
  auto refs = gaussian_references(cov);
  auto back = references_from_json(references_to_json(refs));
  REQUIRE(back.size() == 2);
  CHECK(back[1].second.variance == refs[1].second.variance);
  CHECK(back[0].first.mean == refs[0].first.mean);
}
