#include "nuts/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "nuts/baselines.hpp"
#include "nuts/errors.hpp"
#include "nuts/hmc.hpp"
#include "nuts/nuts.hpp"
#include "nuts/rng.hpp"

namespace nuts {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size())
    throw ConfigError("invalid number '" + t + "' for " + what);
  return v;
}

int parse_int(const std::string& text, const std::string& what) {
  const double v = parse_number(text, what);
  if (v != std::floor(v) || std::abs(v) > 2e9) throw ConfigError(what + " must be an integer");
  return static_cast<int>(v);
}

std::map<std::string, std::string> parse_args(const std::string& text) {
  std::map<std::string, std::string> args;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("model argument '" + item + "' needs key=value");
    args[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  return args;
}

}  // namespace

const char* to_string(Sampler s) {
  switch (s) {
    case Sampler::hmc: return "hmc";
    case Sampler::hmc_fixed: return "hmc-fixed";
    case Sampler::nuts: return "nuts";
    case Sampler::nuts_naive: return "nuts-naive";
    case Sampler::rwm: return "rwm";
    case Sampler::gibbs: return "gibbs";
  }
  return "unknown";
}

Sampler parse_sampler(const std::string& name) {
  for (Sampler s : {Sampler::hmc, Sampler::hmc_fixed, Sampler::nuts, Sampler::nuts_naive,
                    Sampler::rwm, Sampler::gibbs})
    if (name == to_string(s)) return s;
  throw ConfigError("unknown sampler '" + name + "'");
}

TargetModel build_model(const std::string& spec, bool paper_scale) {
  const auto colon = spec.find(':');
  const std::string name = trim(spec.substr(0, colon));
  auto args = colon == std::string::npos ? std::map<std::string, std::string>{}
                                         : parse_args(spec.substr(colon + 1));
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = args.find(key);
    if (it == args.end()) return std::nullopt;
    std::string v = it->second;
    args.erase(it);
    return v;
  };
  auto take_int = [&](const std::string& key, int fallback) {
    auto v = take(key);
    return v ? parse_int(*v, key) : fallback;
  };
  auto take_num = [&](const std::string& key, double fallback) {
    auto v = take(key);
    return v ? parse_number(*v, key) : fallback;
  };
  auto finish = [&](TargetModel m) {
    if (!args.empty()) throw ConfigError("unknown argument '" + args.begin()->first + "' for model " + name);
    return m;
  };
  auto logreg_data = [&]() {
    if (auto file = take("file")) return load_german_credit(*file);
    const int n = take_int("n", paper_scale ? 1000 : 200);
    const int k = take_int("k", paper_scale ? 24 : 8);
    return synthetic_logreg(n, k, static_cast<std::uint64_t>(take_int("seed", 1)));
  };

  if (name == "mvn") {
    MvnModelSpec s;
    s.dim = take_int("dim", paper_scale ? 250 : 10);
    s.seed = static_cast<std::uint64_t>(take_int("seed", 1));
    s.dof = take_num("dof", 0.0);
    return finish(make_mvn(build_mvn_spec(s)));
  }
  if (name == "normal") return finish(make_std_normal(take_int("dim", 1)));
  if (name == "logreg") {
    LogRegData data = logreg_data();
    data.prior_variance = take_num("prior_variance", 100.0);
    return finish(make_logreg(std::move(data)));
  }
  if (name == "hlr") {
    HlrSpec s;
    s.base_data = logreg_data();
    s.rate = take_num("rate", 0.01);
    return finish(make_hlr(s));
  }
  if (name == "sv") {
    SvData data;
    if (auto file = take("file"))
      data = load_price_csv(*file);
    else
      data = synthetic_sv(take_int("t", paper_scale ? 3000 : 200),
                          static_cast<std::uint64_t>(take_int("seed", 1)));
    data.rate = take_num("rate", 0.01);
    return finish(make_sv(std::move(data)));
  }
  throw ConfigError("unknown model '" + name + "'");
}

std::vector<double> log_spaced_grid(double smallest, double ratio, int count) {
  if (!(smallest > 0.0) || !(ratio > 0.0) || count < 1)
    throw ConfigError("log-spaced grid needs positive start, ratio and count");
  std::vector<double> grid;
  for (int i = 0; i < count; ++i)
    grid.push_back(count == 1 ? smallest
                              : smallest * std::pow(ratio, static_cast<double>(i) / (count - 1)));
  return grid;
}

void ExperimentConfig::validate() const {
  if (samplers.empty()) throw ConfigError("at least one sampler is required");
  if (iterations < 1) throw ConfigError("iterations must be positive");
  if (adapt_iterations < 0 || adapt_iterations >= iterations)
    throw ConfigError("adapt iterations must satisfy 0 <= M_adapt < M");
  const int burn = effective_burn_in();
  if (burn < 0 || iterations - burn < 10)
    throw ConfigError("need at least 10 draws after burn-in");
  if (replications < 1) throw ConfigError("replications must be positive");
  if (deltas.empty()) throw ConfigError("delta grid must be nonempty");
  for (double d : deltas)
    if (!(d > 0.0 && d < 1.0)) throw ConfigError("delta values must lie in (0, 1)");
  const bool has_hmc = std::count(samplers.begin(), samplers.end(), Sampler::hmc) > 0;
  if (has_hmc && lambdas.empty()) throw ConfigError("sampler hmc needs a lambda grid");
  if (!has_hmc && !lambdas.empty()) throw ConfigError("lambda grid given without sampler hmc");
  for (double l : lambdas)
    if (!(l > 0.0)) throw ConfigError("lambda values must be positive");
  for (Sampler s : samplers) {
    if (s == Sampler::hmc_fixed && (!(step_size > 0.0) || num_steps < 1))
      throw ConfigError("hmc-fixed needs step_size > 0 and steps >= 1");
    if (s == Sampler::nuts_naive && max_depth > kNaiveMaxDepth)
      throw ConfigError("nuts-naive requires max_depth <= 16");
  }
  if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::optional<double> lambda_min, lambda_ratio;
  std::optional<int> lambda_count;
  std::string line;
  std::size_t line_no = 0;

  auto parse_scalar_list = [](const std::string& v) {
    std::vector<std::string> items;
    std::string body = trim(v);
    if (body.size() >= 2 && body.front() == '[' && body.back() == ']') {
      std::stringstream ss(body.substr(1, body.size() - 2));
      std::string item;
      while (std::getline(ss, item, ','))
        if (!trim(item).empty()) items.push_back(trim(item));
    } else {
      items.push_back(body);
    }
    return items;
  };
  auto unquote = [](std::string s) {
    s = trim(s);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
      return s.substr(1, s.size() - 2);
    return s;
  };

  while (std::getline(in, line)) {
    ++line_no;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;  // blank or table header
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "model") c.model = unquote(value);
      else if (key == "sampler" || key == "samplers") {
        c.samplers.clear();
        for (const auto& s : parse_scalar_list(value)) c.samplers.push_back(parse_sampler(unquote(s)));
      } else if (key == "iterations") c.iterations = parse_int(value, key);
      else if (key == "adapt" || key == "adapt_iterations") c.adapt_iterations = parse_int(value, key);
      else if (key == "delta" || key == "deltas") {
        c.deltas.clear();
        for (const auto& s : parse_scalar_list(value)) c.deltas.push_back(parse_number(s, key));
      } else if (key == "lambda" || key == "lambdas") {
        c.lambdas.clear();
        for (const auto& s : parse_scalar_list(value)) c.lambdas.push_back(parse_number(s, key));
      } else if (key == "lambda_min") lambda_min = parse_number(value, key);
      else if (key == "lambda_ratio") lambda_ratio = parse_number(value, key);
      else if (key == "lambda_count") lambda_count = parse_int(value, key);
      else if (key == "replications") c.replications = parse_int(value, key);
      else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_number(value, key));
      else if (key == "out" || key == "output_dir") c.output_dir = unquote(value);
      else if (key == "burn_in") c.burn_in = parse_int(value, key);
      else if (key == "max_depth") c.max_depth = parse_int(value, key);
      else if (key == "step_size" || key == "epsilon") c.step_size = parse_number(value, key);
      else if (key == "steps") c.num_steps = parse_int(value, key);
      else if (key == "rwm_scale") c.rwm_scale = parse_number(value, key);
      else if (key == "reference_iterations") c.reference_iterations = parse_int(value, key);
      else if (key == "workers") c.workers = parse_int(value, key);
      else if (key == "paper_scale") {
        if (value != "true" && value != "false") throw ConfigError("paper_scale must be true or false");
        c.paper_scale = value == "true";
      } else throw ConfigError("unknown key '" + key + "'");
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (lambda_min || lambda_ratio || lambda_count) {
    if (!lambda_min || !lambda_ratio || !lambda_count)
      throw ConfigError("lambda_min, lambda_ratio and lambda_count must be given together");
    c.lambdas = log_spaced_grid(*lambda_min, *lambda_ratio, *lambda_count);
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in);
}

std::vector<GridPoint> expand_grid(const ExperimentConfig& config) {
  std::vector<GridPoint> grid;
  for (Sampler s : config.samplers) {
    const bool uses_delta = s == Sampler::hmc || s == Sampler::nuts || s == Sampler::nuts_naive;
    const std::vector<double> deltas = uses_delta ? config.deltas : std::vector<double>{0.0};
    const std::vector<double> lambdas = s == Sampler::hmc ? config.lambdas : std::vector<double>{0.0};
    for (double d : deltas)
      for (double l : lambdas)
        grid.push_back({s, d, l, static_cast<int>(grid.size())});
  }
  return grid;
}

std::uint64_t chain_seed(std::uint64_t root, int grid_index, int replication) {
  return derive_seed({root, static_cast<std::uint64_t>(grid_index),
                      static_cast<std::uint64_t>(replication)});
}

ChainOutput run_chain(const TargetModel& model, const ExperimentConfig& config,
                      const GridPoint& point, std::uint64_t seed) {
  RngStream rng(seed);
  const VectorXd theta0 = VectorXd::Zero(model.dim());
  const int burn_in = config.effective_burn_in();
  switch (point.sampler) {
    case Sampler::hmc:
    case Sampler::hmc_fixed: {
      HmcConfig hc;
      hc.iterations = config.iterations;
      hc.adapt_iterations = point.sampler == Sampler::hmc ? config.adapt_iterations : 0;
      hc.delta = point.sampler == Sampler::hmc ? point.delta : 0.65;
      hc.sim_length = point.sampler == Sampler::hmc ? point.lambda : 1.0;
      hc.step_size = config.step_size;
      hc.num_steps = config.num_steps;
      return hmc_run(model, theta0, hc, rng);
    }
    case Sampler::nuts:
    case Sampler::nuts_naive: {
      NutsConfig nc;
      nc.iterations = config.iterations;
      nc.adapt_iterations = config.adapt_iterations;
      nc.delta = point.delta;
      nc.max_depth = config.max_depth;
      nc.step_size = config.step_size;
      nc.naive = point.sampler == Sampler::nuts_naive;
      return nuts_run(model, theta0, nc, rng);
    }
    case Sampler::rwm: {
      double scale = config.rwm_scale;
      if (!(scale > 0.0)) {
        RngStream tune_rng = rng.substream(1);
        scale = rwm_tune_scale(model, theta0, 0.234, tune_rng);
      }
      return rwm_run(model, theta0, {scale, config.iterations, burn_in}, rng);
    }
    case Sampler::gibbs: {
      if (!model.gaussian()) throw ConfigError("gibbs requires a Gaussian (mvn) model");
      return gibbs_mvn_run(*model.gaussian(), theta0, config.iterations, rng, burn_in);
    }
  }
  throw ConfigError("unhandled sampler");
}

json to_json(const EssReport& r) {
  return json{{"ess_mean", r.ess_mean},   {"ess_second", r.ess_second},
              {"cutoff_mean", r.cutoff_mean}, {"cutoff_second", r.cutoff_second},
              {"min_ess", r.min_ess},     {"grads", r.grads},
              {"ess_per_grad", r.ess_per_grad}, {"flags", r.flags}};
}

json to_json(const ChainSummary& c) {
  json counts = json::object();
  for (auto [len, n] : c.trajectory_counts) counts[std::to_string(len)] = n;
  json j{{"label", c.label},
         {"model", c.model},
         {"sampler", to_string(c.sampler)},
         {"delta", c.delta},
         {"lambda", c.lambda},
         {"replication", c.replication},
         {"seed", c.seed},
         {"total_grads", c.total_grads},
         {"kept_grads", c.kept_grads},
         {"final_step_size", c.final_step_size},
         {"acceptance_rate", c.acceptance_rate},
         {"eps_bar_trace", c.eps_bar_trace},
         {"trajectory_counts", counts},
         {"power_of_two_fraction", c.power_of_two_fraction},
         {"wall_seconds", c.wall_seconds},
         {"warnings", c.warnings}};
  j["ess"] = c.ess ? to_json(*c.ess) : json(nullptr);
  j["h_discrepancy"] = c.h_discrepancy ? json(*c.h_discrepancy) : json(nullptr);
  return j;
}

json to_json(const RunSummary& s) {
  json chains = json::array();
  for (const auto& c : s.chains) chains.push_back(to_json(c));
  return json{{"config", s.config},
              {"model", s.model},
              {"reference_provenance", s.reference_provenance},
              {"chains", chains}};
}

RunSummary summary_from_json(const json& j) {
  try {
    RunSummary s;
    s.config = j.value("config", json::object());
    s.model = j.at("model").get<std::string>();
    s.reference_provenance = j.value("reference_provenance", "");
    for (const auto& cj : j.at("chains")) {
      ChainSummary c;
      c.label = cj.at("label").get<std::string>();
      c.model = cj.value("model", s.model);
      c.sampler = parse_sampler(cj.at("sampler").get<std::string>());
      c.delta = cj.at("delta").get<double>();
      c.lambda = cj.at("lambda").get<double>();
      c.replication = cj.at("replication").get<int>();
      c.seed = cj.at("seed").get<std::uint64_t>();
      c.total_grads = cj.at("total_grads").get<std::int64_t>();
      c.kept_grads = cj.at("kept_grads").get<std::int64_t>();
      c.final_step_size = cj.value("final_step_size", 0.0);
      c.acceptance_rate = cj.value("acceptance_rate", 0.0);
      if (cj.contains("ess") && !cj["ess"].is_null()) {
        const auto& e = cj["ess"];
        EssReport r;
        r.ess_mean = e.at("ess_mean").get<std::vector<double>>();
        r.ess_second = e.at("ess_second").get<std::vector<double>>();
        r.cutoff_mean = e.at("cutoff_mean").get<std::vector<Eigen::Index>>();
        r.cutoff_second = e.at("cutoff_second").get<std::vector<Eigen::Index>>();
        r.min_ess = e.at("min_ess").get<double>();
        r.grads = e.at("grads").get<std::int64_t>();
        r.ess_per_grad = e.at("ess_per_grad").get<double>();
        r.flags = e.at("flags").get<std::vector<std::string>>();
        c.ess = r;
      }
      if (cj.contains("h_discrepancy") && !cj["h_discrepancy"].is_null())
        c.h_discrepancy = cj["h_discrepancy"].get<double>();
      s.chains.push_back(std::move(c));
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed summary: ") + e.what());
  }
}

json config_to_json(const ExperimentConfig& c) {
  std::vector<std::string> samplers;
  for (Sampler s : c.samplers) samplers.emplace_back(to_string(s));
  return json{{"model", c.model},
              {"samplers", samplers},
              {"iterations", c.iterations},
              {"adapt", c.adapt_iterations},
              {"deltas", c.deltas},
              {"lambdas", c.lambdas},
              {"replications", c.replications},
              {"seed", c.seed},
              {"burn_in", c.effective_burn_in()},
              {"max_depth", c.max_depth},
              {"step_size", c.step_size},
              {"steps", c.num_steps},
              {"rwm_scale", c.rwm_scale},
              {"reference_iterations", c.reference_iterations},
              {"paper_scale", c.paper_scale}};
}

std::vector<DimensionReference> compute_references(const TargetModel& model,
                                                   const ExperimentConfig& config,
                                                   std::string& provenance) {
  if (model.gaussian()) {
    provenance = "analytic Gaussian moments";
    return gaussian_references(model.gaussian()->covariance());
  }
  const int kept = config.iterations - config.effective_burn_in();
  int length = config.reference_iterations > 0 ? config.reference_iterations : 25 * kept;
  if (config.paper_scale) length = std::max(length, 50000);
  NutsConfig nc;
  nc.adapt_iterations = std::max(config.adapt_iterations, 1);
  nc.iterations = nc.adapt_iterations + length;
  nc.delta = 0.5;
  nc.max_depth = config.max_depth;
  RngStream rng(derive_seed({config.seed, 0x7265666572ULL}));
  const ChainOutput run = nuts_run(model, VectorXd::Zero(model.dim()), nc, rng);
  provenance = "NUTS delta=0.5, " + std::to_string(length) + " draws after " +
               std::to_string(nc.adapt_iterations) + " adaptation iterations";
  return references_from_draws(run.kept_draws(), provenance);
}

json references_to_json(const std::vector<DimensionReference>& refs) {
  json dims = json::array();
  for (const auto& r : refs)
    dims.push_back({{"mean", r.first.mean},
                    {"variance", r.first.variance},
                    {"second_mean", r.second.mean},
                    {"second_variance", r.second.variance}});
  return json{{"provenance", refs.empty() ? "" : refs.front().first.provenance}, {"dims", dims}};
}

std::vector<DimensionReference> references_from_json(const json& j) {
  try {
    const std::string prov = j.value("provenance", "file");
    std::vector<DimensionReference> refs;
    for (const auto& d : j.at("dims"))
      refs.push_back({{d.at("mean").get<double>(), d.at("variance").get<double>(), prov},
                      {d.at("second_mean").get<double>(), d.at("second_variance").get<double>(), prov}});
    return refs;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed reference file: ") + e.what());
  }
}

void write_draws_csv(const fs::path& file, const Eigen::MatrixXd& draws) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  for (Eigen::Index d = 0; d < draws.cols(); ++d) out << (d ? "," : "") << "theta_" << d;
  out << '\n';
  for (Eigen::Index m = 0; m < draws.rows(); ++m) {
    for (Eigen::Index d = 0; d < draws.cols(); ++d)
      out << (d ? "," : "") << format_double(draws(m, d));
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + file.string());
}

void write_chain_files(const fs::path& dir, const ChainOutput& chain, int burn_in) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_draws_csv(dir / "draws.csv", chain.draws.bottomRows(chain.draws.rows() - burn_in));

  std::ofstream out(dir / "stats.csv", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "stats.csv").string());
  out << "iteration,phase,accept_stat,step_size,tree_depth,n_states,grads,accepted,divergent,"
         "termination\n";
  for (std::size_t m = 0; m < chain.stats.size(); ++m) {
    const auto& s = chain.stats[m];
    out << m + 1 << ',' << (static_cast<int>(m) < burn_in ? "warmup" : "sample") << ','
        << format_double(s.accept_stat) << ',' << format_double(s.step_size) << ','
        << s.tree_depth << ',' << s.n_states << ',' << s.grads << ',' << s.accepted << ','
        << s.divergent << ',' << to_string(s.termination) << '\n';
  }
  if (!out) throw IoError("failed writing stats.csv in " + dir.string());
}

Eigen::MatrixXd read_draws_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line_no == 1 && line.find_first_of("abcdefghijklmnopqrstuvwxyz_") != std::string::npos &&
        line.find("nan") == std::string::npos && line.find("inf") == std::string::npos)
      continue;  // header
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(parse_number(cell, "draw"));
      } catch (const ConfigError& e) {
        throw ParseError(e.what(), line_no);
      }
    }
    if (width == 0) width = row.size();
    if (row.size() != width) throw ParseError("inconsistent column count", line_no);
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t d = 0; d < width; ++d)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rows[i][d];
  return out;
}

std::int64_t read_stats_grads(const fs::path& file, int burn_in) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::string line;
  std::getline(in, line);
  std::int64_t total = 0;
  int row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (int col = 0; col < 7 && std::getline(ss, cell, ','); ++col)
      if (col == 6 && row >= burn_in) total += std::stoll(cell);
    ++row;
  }
  return total;
}

namespace {

std::string chain_label(const GridPoint& p, int replication) {
  char buf[128];
  if (p.sampler == Sampler::hmc)
    std::snprintf(buf, sizeof(buf), "%s_d%.4f_l%.4f_r%d", to_string(p.sampler), p.delta,
                  p.lambda, replication);
  else if (p.sampler == Sampler::nuts || p.sampler == Sampler::nuts_naive)
    std::snprintf(buf, sizeof(buf), "%s_d%.4f_r%d", to_string(p.sampler), p.delta, replication);
  else
    std::snprintf(buf, sizeof(buf), "%s_r%d", to_string(p.sampler), replication);
  return buf;
}

int worker_count(const ExperimentConfig& config, std::size_t tasks) {
  int workers = config.workers;
  if (workers <= 0) {
    if (const char* env = std::getenv("NUTS_ENGINE_WORKERS")) workers = std::atoi(env);
  }
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::max(1, std::min(workers, static_cast<int>(tasks)));
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  const TargetModel model = build_model(config.model, config.paper_scale);
  for (Sampler s : config.samplers)
    if (s == Sampler::gibbs && !model.gaussian())
      throw ConfigError("gibbs requires a Gaussian (mvn) model");

  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create " + config.output_dir.string() + ": " + ec.message());
  const fs::path marker = config.output_dir / ".incomplete";
  {
    std::ofstream m(marker);
    if (!m) throw IoError("output directory " + config.output_dir.string() + " is not writable");
    m << "run in progress\n";
  }

  RunSummary summary;
  summary.config = config_to_json(config);
  summary.model = config.model;
  const auto refs = compute_references(model, config, summary.reference_provenance);
  {
    std::ofstream out(config.output_dir / "references.json");
    out << references_to_json(refs).dump(2) << '\n';
  }

  const auto grid = expand_grid(config);
  struct Task {
    GridPoint point;
    int replication;
  };
  std::vector<Task> tasks;
  for (const auto& p : grid)
    for (int r = 0; r < config.replications; ++r) tasks.push_back({p, r});

  const int burn_in = config.effective_burn_in();
  std::vector<ChainSummary> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        const Task& t = tasks[i];
        const auto start = std::chrono::steady_clock::now();
        const std::uint64_t seed = chain_seed(config.seed, t.point.grid_index, t.replication);
        const ChainOutput chain = run_chain(model, config, t.point, seed);

        ChainSummary& c = results[i];
        c.label = chain_label(t.point, t.replication);
        c.model = config.model;
        c.sampler = t.point.sampler;
        c.delta = t.point.delta;
        c.lambda = t.point.lambda;
        c.replication = t.replication;
        c.seed = seed;
        c.total_grads = chain.total_grads();
        for (std::size_t m = static_cast<std::size_t>(burn_in); m < chain.stats.size(); ++m)
          c.kept_grads += chain.stats[m].grads;
        c.final_step_size = chain.final_step_size;
        c.eps_bar_trace = chain.eps_bar_trace;
        c.warnings = chain.warnings;

        std::vector<double> alphas;
        std::vector<std::int64_t> lengths;
        double accepted = 0.0;
        for (std::size_t m = static_cast<std::size_t>(burn_in); m < chain.stats.size(); ++m) {
          alphas.push_back(chain.stats[m].accept_stat);
          lengths.push_back(chain.stats[m].n_states);
          accepted += chain.stats[m].accepted;
        }
        c.acceptance_rate = accepted / static_cast<double>(alphas.size());
        if (t.point.sampler == Sampler::hmc || t.point.sampler == Sampler::nuts ||
            t.point.sampler == Sampler::nuts_naive)
          c.h_discrepancy = h_discrepancy(alphas, t.point.delta);
        const auto hist = trajectory_histogram(lengths);
        c.trajectory_counts = hist.counts;
        c.power_of_two_fraction = hist.power_of_two_fraction;
        c.ess = ess_report(chain.draws.bottomRows(chain.draws.rows() - burn_in), refs,
                           c.kept_grads);

        write_chain_files(config.output_dir / c.label, chain, burn_in);
        c.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const int workers = worker_count(config, tasks.size());
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  summary.chains = std::move(results);
  {
    std::ofstream out(config.output_dir / "summary.json");
    if (!out) throw IoError("cannot write summary.json");
    out << to_json(summary).dump(2) << '\n';
  }
  {
    std::ofstream out(config.output_dir / "comparison.csv");
    write_comparison_csv(out, compare_samplers({summary}));
  }
  fs::remove(marker, ec);
  return summary;
}

std::vector<ComparisonRow> compare_samplers(const std::vector<RunSummary>& summaries) {
  if (summaries.empty()) throw ConfigError("no summaries to compare");
  const std::string& model = summaries.front().model;
  struct Acc {
    double sum = 0.0;
    int count = 0;
  };
  std::map<std::tuple<int, double, double>, Acc> groups;
  for (const auto& s : summaries) {
    if (s.model != model)
      throw ConfigError("cannot compare models '" + model + "' and '" + s.model + "'");
    for (const auto& c : s.chains) {
      if (!c.ess) continue;
      auto& g = groups[{static_cast<int>(c.sampler), c.delta, c.lambda}];
      g.sum += c.ess->ess_per_grad;
      ++g.count;
    }
  }
  if (groups.empty()) throw ConfigError("summaries contain no ESS reports");

  std::vector<ComparisonRow> rows;
  std::optional<double> best_hmc;
  for (const auto& [key, acc] : groups) {
    ComparisonRow row;
    row.model = model;
    row.sampler = static_cast<Sampler>(std::get<0>(key));
    row.delta = std::get<1>(key);
    row.lambda = std::get<2>(key);
    row.replications = acc.count;
    row.ess_per_grad = acc.sum / acc.count;
    if (row.sampler == Sampler::hmc) best_hmc = std::max(best_hmc.value_or(0.0), row.ess_per_grad);
    rows.push_back(row);
  }
  if (best_hmc && *best_hmc > 0.0)
    for (auto& r : rows) r.ratio_to_best_hmc = r.ess_per_grad / *best_hmc;
  return rows;
}

namespace {

/// RFC 4180 quoting for fields containing separators or quotes.
std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string quoted = "\"";
  for (char c : text) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + '"';
}

}  // namespace

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << "model,sampler,delta,lambda,replications,min_ess_per_grad,ratio_to_best_hmc\n";
  for (const auto& r : rows) {
    out << csv_field(r.model) << ',' << to_string(r.sampler) << ',' << format_double(r.delta) << ','
        << format_double(r.lambda) << ',' << r.replications << ',' << format_double(r.ess_per_grad)
        << ',' << (r.ratio_to_best_hmc ? format_double(*r.ratio_to_best_hmc) : "") << '\n';
  }
}

std::vector<RunSummary> load_summaries(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() == "summary.json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<RunSummary> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    try {
      out.push_back(summary_from_json(json::parse(in)));
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse " + f.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace nuts
