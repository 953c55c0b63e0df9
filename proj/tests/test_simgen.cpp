#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pboost/engine.hpp"
#include "pboost/error.hpp"
#include "pboost/numeric.hpp"
#include "pboost/probit.hpp"
#include "pboost/simgen.hpp"
#include "test_util.hpp"

using namespace pboost;

namespace {

double prevalence(const SimulatedData& sim) {
  const auto& y = sim.data.column("y").values;
  double s = 0.0;
  for (double v : y) s += v;
  return s / static_cast<double>(y.size());
}

double risk_at(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta, std::span<const double> y,
               std::span<const double> w) {
  const Eigen::VectorXd eta = X * beta;
  return probit_risk(y, std::span<const double>(eta.data(), static_cast<std::size_t>(eta.size())), w);
}

}  // namespace

TEST_CASE("prevalence matches Phi(intercept)") {
  TruthSpec spec;
  spec.n = 4000;
  spec.seed = 5;
  const double n = 4000.0;
  CHECK(std::abs(prevalence(gen_probit_data(spec)) - 0.5) < 3.0 / std::sqrt(n));
  spec.intercept = normal_quantile(0.23);
  // Binomial standard error is sqrt(0.23 * 0.77 / n); allow four of them.
  CHECK(std::abs(prevalence(gen_probit_data(spec)) - 0.23) < 4.0 * std::sqrt(0.23 * 0.77 / n));
}

TEST_CASE("generation is deterministic in the seed") {
  TruthSpec spec;
  spec.n = 200;
  spec.linear = {{"a", 0.4}};
  spec.smooth = {{"s", SmoothShape::step, 1.0}};
  spec.categorical = {{"c", {0.0, 1.0, -1.0}}};
  spec.noise_continuous = 2;
  spec.noise_categorical = 1;
  spec.weighted = true;
  spec.seed = 77;
  const auto a = gen_probit_data(spec);
  const auto b = gen_probit_data(spec);
  REQUIRE(a.data.n_columns() == b.data.n_columns());
  for (std::size_t c = 0; c < a.data.n_columns(); ++c) {
    CHECK(a.data.columns()[c].schema.name == b.data.columns()[c].schema.name);
    CHECK(a.data.columns()[c].values == b.data.columns()[c].values);
  }
  CHECK(a.eta == b.eta);
  CHECK(a.data.has_weight_column());
  spec.seed = 78;
  CHECK(gen_probit_data(spec).data.column("a").values != a.data.column("a").values);
  for (double v : a.data.column("a").values) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS([&] {
    TruthSpec tiny;
    tiny.n = 5;
    gen_probit_data(tiny);
  }(), ConfigError);
}

TEST_CASE("truth record recomputes eta and round-trips through JSON") {
  TruthSpec spec;
  spec.n = 300;
  spec.linear = {{"a", -0.7}};
  spec.smooth = {{"s1", SmoothShape::sine, 0.8}, {"s2", SmoothShape::quadratic, 1.2}};
  spec.categorical = {{"c", {0.0, 0.5}}};
  spec.intercept = 0.1;
  spec.seed = 3;
  const auto sim = gen_probit_data(spec);
  const auto dir = testutil::temp_dir("simgen");
  save_truth(spec, dir / "truth.json");
  const TruthSpec back = load_truth(dir / "truth.json");
  const auto eta = recompute_eta(back, sim.data);
  for (std::size_t i = 0; i < eta.size(); ++i) CHECK(std::abs(eta[i] - sim.eta[i]) < 1e-12);
  CHECK(truth_to_json(back) == truth_to_json(spec));
}

TEST_CASE("smooth shapes have mean zero on [-1, 1]") {
  for (SmoothShape s : {SmoothShape::sine, SmoothShape::quadratic, SmoothShape::step}) {
    double sum = 0.0;
    const int k = 200000;
    for (int i = 0; i < k; ++i) sum += smooth_value(s, -1.0 + 2.0 * (i + 0.5) / k);
    CHECK(std::abs(sum / k) < 1e-6);
    CHECK(smooth_shape_from_string(to_string(s)) == s);
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("intercept-only oracle equals the offset") {
  const std::vector<double> y{1, 0, 0, 1, 1, 0, 0, 0, 1, 0};
  const std::vector<double> w{1, 2, 1, 0.5, 3, 1, 1, 2, 1, 1};
  const Eigen::VectorXd beta = oracle_irls_probit(Eigen::MatrixXd::Ones(10, 1), y, w);
  CHECK(beta(0) == doctest::Approx(offset_init(y, w)).epsilon(1e-10));
}

TEST_CASE("symmetric balanced design gives a zero slope") {
  Eigen::MatrixXd X(8, 2);
  std::vector<double> y(8);
  const double xs[4] = {-2.0, -1.0, 1.0, 2.0};
  for (int i = 0; i < 4; ++i) {
    for (int label = 0; label < 2; ++label) {
      X(2 * i + label, 0) = 1.0;
      X(2 * i + label, 1) = xs[i];
      y[static_cast<std::size_t>(2 * i + label)] = label;
    }
  }
  const Eigen::VectorXd beta = oracle_irls_probit(X, y, std::vector<double>(8, 1.0));
  CHECK(std::abs(beta(0)) < 1e-10);
  CHECK(std::abs(beta(1)) < 1e-10);
}

namespace {

struct OracleFixture {
  Eigen::MatrixXd X;
  std::vector<double> y;
  std::vector<double> w;
};

OracleFixture two_covariates(std::uint64_t seed) {
  TruthSpec spec;
  spec.n = 100;
  spec.linear = {{"a", 0.5}, {"b", -0.5}};
  spec.seed = seed;
  const auto sim = gen_probit_data(spec);
  OracleFixture f{Eigen::MatrixXd(100, 3), sim.data.column("y").values, std::vector<double>(100, 1.0)};
  for (int i = 0; i < 100; ++i) {
    f.X(i, 0) = 1.0;
    f.X(i, 1) = sim.data.column("a").values[static_cast<std::size_t>(i)];
    f.X(i, 2) = sim.data.column("b").values[static_cast<std::size_t>(i)];
  }
  return f;
}

}  // namespace

TEST_CASE("oracle recovers coefficients up to sampling noise") {
  // At n = 100 the slope standard error is about 0.22, so +-0.3 is a 1.4 SE
  // window: check the rate over seeds and the mean instead of one draw.
  const int seeds = 40;
  int inside = 0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (int seed = 1; seed <= seeds; ++seed) {
    const auto f = two_covariates(static_cast<std::uint64_t>(seed));
    const Eigen::VectorXd beta = oracle_irls_probit(f.X, f.y, f.w);
    inside += std::abs(beta(1) - 0.5) < 0.3;
    inside += std::abs(beta(2) + 0.5) < 0.3;
    mean += beta.tail(2) / seeds;
  }
  CHECK(inside >= static_cast<int>(0.7 * 2 * seeds));
  CHECK(std::abs(mean(0) - 0.5) < 0.1);
  CHECK(std::abs(mean(1) + 0.5) < 0.1);
}

TEST_CASE("oracle output is a risk minimum") {
  for (std::uint64_t seed : {12u, 13u, 14u}) {
    const auto f = two_covariates(seed);
    const Eigen::VectorXd beta = oracle_irls_probit(f.X, f.y, f.w);
    const double best = risk_at(f.X, beta, f.y, f.w);
    for (int k = 0; k < 3; ++k) {
      for (double delta : {-1e-3, 1e-3}) {
        Eigen::VectorXd b = beta;
        b(k) += delta;
        CHECK(risk_at(f.X, b, f.y, f.w) >= best);
      }
    }
  }
}

TEST_CASE("separated or collinear designs are numerical errors") {
  Eigen::MatrixXd X(6, 2);
  X << 1, -3, 1, -2, 1, -1, 1, 1, 1, 2, 1, 3;
  const std::vector<double> y{0, 0, 0, 1, 1, 1};
  CHECK_THROWS_AS(oracle_irls_probit(X, y, std::vector<double>(6, 1.0)), NumericalError);
  Eigen::MatrixXd collinear(6, 2);
  collinear << 1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2;
  CHECK_THROWS_AS(oracle_irls_probit(collinear, std::vector<double>{0, 1, 1, 1, 1, 0}, std::vector<double>(6, 1.0)),
                  NumericalError);
}

// ---------------------------------------------------------------------------

TEST_CASE("finite differences") {
  SUBCASE("quadratic is exact to O(step^2)") {
    const std::vector<double> x{0.3, -1.2, 2.0};
    const auto g = finite_diff_gradient(
        [](std::span<const double> v) { return v[0] * v[0] + 3.0 * v[1] * v[1] - v[0] * v[2]; }, x, 1e-4);
    CHECK(g[0] == doctest::Approx(2 * 0.3 - 2.0).epsilon(1e-7));
    CHECK(g[1] == doctest::Approx(6 * -1.2).epsilon(1e-7));
    CHECK(g[2] == doctest::Approx(-0.3).epsilon(1e-7));
  }
  SUBCASE("probit risk at eta = 0, y = 1") {
    const std::vector<double> y(3, 1.0);
    const std::vector<double> w(3, 1.0);
    const std::vector<double> eta(3, 0.0);
    auto f = [&](std::span<const double> e) { return probit_risk(y, e, w); };
    const auto g6 = finite_diff_gradient(f, eta, 1e-6);
    const auto g7 = finite_diff_gradient(f, eta, 1e-7);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(g6[i] == doctest::Approx(-std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-6));
      CHECK(std::abs(g6[i] - g7[i]) < 1e-5);
      CHECK(std::abs(-g6[i] - probit_negative_gradient(1.0, 0.0)) < 1e-6);
    }
  }
}
