#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "nuts/baselines.hpp"
#include "nuts/diagnostics.hpp"
#include "nuts/errors.hpp"
#include "nuts/model.hpp"
#include "oracles.hpp"

using namespace nuts;
namespace fs = std::filesystem;

namespace {

MvnSpec identity_spec(Index dim) {
  MvnSpec spec;
  spec.precision = MatrixXd::Identity(dim, dim);
  return spec;
}

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "nuts_engine_model_tests";
  fs::create_directories(dir);
  return dir / name;
}

VectorXd random_point(Index dim, RngStream& rng, double scale) {
  return scale * rng.normal_vector(dim);
}

}  // namespace

TEST_CASE("mvn identity density and gradient") {
  auto model = make_mvn(identity_spec(2));
  auto e = eval_model(model, VectorXd::Ones(2));
  CHECK(e.logp == doctest::Approx(-1.0));
  CHECK(e.grad[0] == doctest::Approx(-1.0));
  CHECK(e.grad[1] == doctest::Approx(-1.0));
}

TEST_CASE("logistic regression with no observations is the prior") {
  LogRegData data;
  data.predictors = MatrixXd(0, 2);
  data.labels = VectorXd(0);
  data.prior_variance = 100.0;
  auto model = make_logreg(data);
  REQUIRE(model.dim() == 3);
  VectorXd theta = VectorXd::Zero(3);
  theta[0] = 10.0;
  auto e = eval_model(model, theta);
  CHECK(e.logp == doctest::Approx(-0.5));
  CHECK(e.grad[0] == doctest::Approx(-0.1));
  CHECK(e.grad[1] == doctest::Approx(0.0));
}

TEST_CASE("stochastic volatility gradient matches finite differences") {
  auto data = synthetic_sv(60, 3);
  auto model = make_sv(data);
  RngStream rng(11);
  VectorXd theta(model.dim());
  const double base = std::log(data.log_return_diffs.cwiseAbs().mean() + 1e-3);
  for (Index i = 0; i + 1 < model.dim(); ++i) theta[i] = base + 0.3 * rng.normal();
  theta[model.dim() - 1] = std::log(8.0) + 0.3 * rng.normal();
  auto e = eval_model(model, theta);
  CHECK(oracle::max_relative_error(e.grad, oracle::finite_difference_gradient(model, theta)) <
        1e-5);
}

TEST_CASE("check_gradient reports") {
  SUBCASE("flat model") {
    auto report = check_gradient(make_flat(3), VectorXd::Constant(3, 0.7));
    CHECK(report.max_error == 0.0);
    CHECK(report.flagged.empty());
  }
  SUBCASE("identity gaussian") {
    auto report = check_gradient(make_mvn(identity_spec(2)), VectorXd::Ones(2));
    CHECK(report.max_error < 1e-8);
  }
  SUBCASE("corrupted gradient coordinate is flagged") {
    TargetModel bad("bad", 3, [](const VectorXd& th, VectorXd& g) {
      g = -th;
      g[1] = th[1];
      return -0.5 * th.squaredNorm();
    });
    auto report = check_gradient(bad, VectorXd::Ones(3));
    REQUIRE(report.flagged.size() == 1);
    CHECK(report.flagged[0] == 1);
  }
  SUBCASE("non-finite probe region") {
    TargetModel cliff("cliff", 1, [](const VectorXd& th, VectorXd& g) {
      g.setZero();
      return th[0] > 1.0 ? std::nan("") : 0.0;
    });
    CHECK_THROWS_AS(check_gradient(cliff, VectorXd::Constant(1, 1.0)), EvalError);
  }
}

TEST_CASE("checked evaluation errors") {
  auto model = make_std_normal(2);
  CHECK_THROWS_AS(eval_model(model, VectorXd::Zero(3)), ConfigError);
  VectorXd inf_theta = VectorXd::Zero(2);
  inf_theta[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(eval_model(model, inf_theta), ConfigError);

  TargetModel nan_grad("nan_grad", 3, [](const VectorXd&, VectorXd& g) {
    g.setZero();
    g[2] = std::nan("");
    return 0.0;
  });
  try {
    eval_model(nan_grad, VectorXd::Zero(3));
    FAIL("expected EvalError");
  } catch (const EvalError& e) {
    CHECK(e.coordinate() == 2);
  }
}

TEST_CASE("build_target") {
  SUBCASE("mvn is deterministic in its seed") {
    auto a = build_mvn_spec({2, 7, 0.0});
    auto b = build_mvn_spec({2, 7, 0.0});
    CHECK(a.precision == b.precision);
    CHECK(build_target(MvnModelSpec{2, 7, 0.0}).dim() == 2);
    a.validate();
  }
  SUBCASE("wishart dof below dim") {
    CHECK_THROWS_AS(wishart_identity(4, 3.0, 1), ConfigError);
    CHECK_THROWS_AS(build_mvn_spec({4, 1, 2.0}), ConfigError);
  }
  SUBCASE("wishart mean is dof times identity") {
    MatrixXd sum = MatrixXd::Zero(3, 3);
    const int n = 4000;
    for (int i = 0; i < n; ++i) sum += wishart_identity(3, 5.0, 1000 + i);
    MatrixXd mean = sum / n;
    CHECK((mean - 5.0 * MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.25);
  }
  SUBCASE("hierarchical logistic regression dimension") {
    HlrSpec spec;
    spec.base_data = synthetic_logreg(50, 24, 1);
    CHECK(build_target(spec).dim() == 302);
  }
  SUBCASE("stochastic volatility dimension") {
    CHECK(build_target(synthetic_sv(3000, 1)).dim() == 3001);
  }
  SUBCASE("invalid precision") {
    MvnSpec asym;
    asym.precision = MatrixXd::Identity(2, 2);
    asym.precision(0, 1) = 0.5;
    CHECK_THROWS_AS(asym.validate(), ConfigError);
    MvnSpec indefinite;
    indefinite.precision = -MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(indefinite.validate(), ConfigError);
  }
}

TEST_CASE("german credit loader") {
  auto path = temp_file("german.data-numeric");
  {
    std::ofstream out(path);
    std::mt19937_64 gen(5);
    std::uniform_int_distribution<int> value(0, 40);
    for (int row = 0; row < 1000; ++row) {
      for (int c = 0; c < 24; ++c) out << "   " << value(gen);
      out << "   " << (row % 3 == 0 ? 2 : 1) << "\n";
    }
  }
  auto data = load_german_credit(path);
  CHECK(data.rows() == 1000);
  CHECK(data.cols() == 24);
  CHECK(data.labels[0] == -1.0);
  CHECK(data.labels[1] == 1.0);
  for (Index c = 0; c < data.cols(); ++c) {
    auto col = data.predictors.col(c);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / (col.size() - 1);
    CHECK(std::abs(mean) < 1e-8);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }

  auto bad = temp_file("bad.data-numeric");
  {
    std::ofstream out(bad);
    for (int c = 0; c < 25; ++c) out << " 1";
    out << "\n";
    for (int c = 0; c < 12; ++c) out << " 1";
    out << "\n";
  }
  try {
    load_german_credit(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  auto tiny = temp_file("tiny.data-numeric");
  {
    std::ofstream out(tiny);
    for (int c = 0; c < 24; ++c) out << " 1";
    out << " 1\n";
  }
  CHECK_THROWS_AS(load_german_credit(tiny), ConfigError);
}

TEST_CASE("price series loader") {
  auto path = temp_file("prices.csv");
  {
    std::ofstream out(path);
    out << "close\n100\n110\n99\n";
  }
  auto data = load_price_csv(path);
  REQUIRE(data.log_return_diffs.size() == 2);
  CHECK(data.log_return_diffs[0] == doctest::Approx(std::log(110.0 / 100.0)));
  CHECK(data.series_length() == 3);

  auto negative = temp_file("negative.csv");
  {
    std::ofstream out(negative);
    out << "1\n-2\n";
  }
  CHECK_THROWS(load_price_csv(negative));
}

TEST_CASE("synthetic data") {
  auto a = synthetic_logreg(50, 3, 1);
  auto b = synthetic_logreg(50, 3, 1);
  CHECK(a.predictors == b.predictors);
  CHECK(a.labels == b.labels);
  CHECK((a.labels.array().abs() == 1.0).all());

  auto sv = synthetic_sv(100, 2);
  CHECK(sv.log_return_diffs.size() == 99);
  CHECK(sv.log_return_diffs.allFinite());
}

TEST_CASE("gradients of every built-in model at random points") {
  RngStream rng(2024);
  std::vector<TargetModel> models;
  models.push_back(build_target(MvnModelSpec{10, 1, 0.0}));
  models.push_back(make_logreg(synthetic_logreg(80, 5, 3)));
  HlrSpec hlr;
  hlr.base_data = synthetic_logreg(80, 4, 4);
  models.push_back(make_hlr(hlr));
  models.push_back(make_sv(synthetic_sv(40, 5)));
  for (const auto& model : models) {
    CAPTURE(model.name());
    for (int i = 0; i < 20; ++i) {
      VectorXd theta = random_point(model.dim(), rng, 0.5);
      VectorXd grad(model.dim());
      model.log_density_gradient(theta, grad);
      CHECK(oracle::max_relative_error(grad, oracle::finite_difference_gradient(model, theta)) <
            1e-5);
    }
  }
}

TEST_CASE("log transform of the exponential prior recovers its mean") {
  auto model = make_log_exponential(0.01);
  RngStream rng(77);
  RwmConfig cfg;
  cfg.proposal_scale = 2.4;
  cfg.iterations = 55000;
  cfg.burn_in = 5000;
  auto out = rwm_run(model, VectorXd::Constant(1, std::log(100.0)), cfg, rng);
  auto kept = out.kept_draws();
  REQUIRE(kept.rows() == 50000);
  VectorXd sigma2 = kept.col(0).array().exp();
  // Exponential(rate 0.01): mean 100, variance 1e4.
  auto e = ess(sigma2, MomentReference{100.0, 1e4, "analytic"});
  const double se = 100.0 / std::sqrt(e.value);
  CHECK(std::abs(sigma2.mean() - 100.0) < 3.0 * se);
}

TEST_CASE("interaction expansion") {
  RngStream rng(9);
  MatrixXd x(30, 4);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
  MatrixXd s = standardize(x);
  MatrixXd e = interaction_expand(s);
  REQUIRE(e.cols() == 4 + 6);
  // Each product column must be perfectly correlated with exactly one
  // standardized pairwise product.
  std::vector<int> matches(e.cols(), 0);
  for (Index a = 0; a < 4; ++a) {
    for (Index b = a + 1; b < 4; ++b) {
      VectorXd p = s.col(a).cwiseProduct(s.col(b));
      p.array() -= p.mean();
      for (Index c = 4; c < e.cols(); ++c) {
        const double corr = p.dot(e.col(c)) / (p.norm() * e.col(c).norm());
        if (std::abs(corr - 1.0) < 1e-10) ++matches[c];
      }
    }
  }
  for (Index c = 4; c < e.cols(); ++c) CHECK(matches[c] == 1);
  CHECK(interaction_expand(MatrixXd::Ones(5, 24).cwiseProduct(
                               MatrixXd::Random(5, 24)))
            .cols() == 300);
}

TEST_CASE("standardization is idempotent") {
  RngStream rng(10);
  MatrixXd x(25, 3);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = 3.0 + 2.0 * rng.normal();
  x.col(2).setConstant(4.0);
  MatrixXd once = standardize(x);
  MatrixXd twice = standardize(once);
  CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(once.col(2).cwiseAbs().maxCoeff() == 0.0);
}
