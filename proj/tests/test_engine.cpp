#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "pboost/engine.hpp"
#include "pboost/error.hpp"
#include "pboost/numeric.hpp"
#include "pboost/probit.hpp"
#include "pboost/simgen.hpp"
#include "test_util.hpp"

using namespace pboost;

namespace {

// -log Phi(-x) from the asymptotic tail series, accurate to ~1e-13 at x = 10.
double upper_tail_neg_log(double x) {
  double term = 1.0;
  double series = 1.0;
  for (int k = 1; k < 12; ++k) {
    term *= -(2.0 * k - 1.0) / (x * x);
    series += term;
  }
  return 0.5 * x * x + 0.5 * std::log(2.0 * std::numbers::pi) + std::log(x) - std::log(series);
}

TermSpec term(TermType type, std::vector<std::string> columns, std::string by = "") {
  TermSpec t;
  t.type = type;
  t.columns = std::move(columns);
  t.by = std::move(by);
  return t;
}

SimulatedData simulate(std::size_t n, std::uint64_t seed, bool weighted = true) {
  TruthSpec spec;
  spec.n = n;
  spec.linear = {{"x2", 0.8}};
  spec.smooth = {{"x1", SmoothShape::sine, 1.0}};
  spec.categorical = {{"g", {0.0, 0.5, -0.5}}};
  spec.noise_continuous = 2;
  spec.noise_categorical = 1;
  spec.weighted = weighted;
  spec.seed = seed;
  return gen_probit_data(spec);
}

ModelFormula formula() {
  ModelFormula f;
  f.terms = {term(TermType::smooth, {"x1"}), term(TermType::linear, {"x2"}),
             term(TermType::categorical, {"g"}), term(TermType::smooth, {"noise1"}),
             term(TermType::smooth, {"noise2"}), term(TermType::categorical, {"noisecat1"})};
  f.inner_knots = 10;
  return f;
}

ModelData model_data(const Dataset& ds) {
  const TermSet set = build_term_set(formula(), ds);
  return make_model_data(set, ds, binary_outcome(ds, {"y", {}}));
}

Dataset permuted(const Dataset& ds, const std::vector<std::size_t>& order) { return ds.select_rows(order); }

}  // namespace

TEST_CASE("probit risk examples") {
  const std::vector<double> one{1.0};
  const std::vector<double> zero{0.0};
  const std::vector<double> eta0{0.0};
  CHECK(probit_risk(one, eta0, one) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(probit_risk(zero, eta0, one) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  const std::vector<double> far{-10.0};
  const double r = probit_risk(one, far, one);
  CHECK(std::isfinite(r));
  CHECK(r == doctest::Approx(upper_tail_neg_log(10.0)).epsilon(1e-12));
  CHECK(r == doctest::Approx(53.23).epsilon(1e-3));
  // Clamped at |eta| = 30 and still finite.
  CHECK(std::isfinite(probit_risk(one, std::vector<double>{-1e6}, one)));
  CHECK(probit_risk(one, std::vector<double>{-40.0}, one) == probit_risk(one, std::vector<double>{-30.0}, one));
}

TEST_CASE("negative gradient examples and symmetry") {
  const double phi0 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  CHECK(probit_negative_gradient(1.0, 0.0) == doctest::Approx(2.0 * phi0).epsilon(1e-14));
  CHECK(probit_negative_gradient(0.0, 0.0) == doctest::Approx(-2.0 * phi0).epsilon(1e-14));
  CHECK(std::abs(probit_negative_gradient(1.0, 30.0)) < 1e-190);
  for (double eta = -30.0; eta <= 30.0; eta += 0.37) {
    CHECK(probit_negative_gradient(1.0, eta) == -probit_negative_gradient(0.0, -eta));
    CHECK(std::isfinite(probit_negative_gradient(1.0, eta)));
  }
  // Lower-tail Mills ratio approaches |eta|.
  CHECK(probit_negative_gradient(1.0, -30.0) == doctest::Approx(30.0).epsilon(2e-3));
}

TEST_CASE("gradient agrees with central differences of the risk") {
  std::vector<double> eta;
  std::vector<double> y;
  for (double e = -5.0; e <= 5.0; e += 0.25) {
    for (double label : {0.0, 1.0}) {
      eta.push_back(e);
      y.push_back(label);
    }
  }
  const std::vector<double> w(y.size(), 1.0);
  const auto fd = finite_diff_gradient([&](std::span<const double> e) { return probit_risk(y, e, w); }, eta, 1e-6);
  const auto u = negative_gradient(y, eta);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(-fd[i] - u[i]) < 1e-6);
}

TEST_CASE("offset examples") {
  CHECK(offset_init(std::vector<double>{1, 0, 1, 0}, std::vector<double>(4, 1.0)) == 0.0);
  std::vector<double> y(400, 0.0);
  for (std::size_t i = 0; i < 390; ++i) y[i] = 1.0;
  const double o = offset_init(y, std::vector<double>(400, 1.0));
  CHECK(o == doctest::Approx(1.95996).epsilon(1e-5));
  CHECK(0.5 * std::erfc(-o / std::sqrt(2.0)) == doctest::Approx(0.975).epsilon(1e-12));
  // Doubling the positives on 4 rows: weighted mean 4/6.
  const double weighted = offset_init(std::vector<double>{1, 1, 0, 0}, std::vector<double>{2, 2, 1, 1});
  CHECK(weighted == doctest::Approx(normal_quantile(2.0 / 3.0)).epsilon(1e-12));
  CHECK(weighted == doctest::Approx(0.4307273).epsilon(1e-6));
  CHECK_THROWS_AS(offset_init(std::vector<double>{1, 1}, std::vector<double>{1, 1}), DataError);
  CHECK_THROWS_AS(offset_init(std::vector<double>{0, 0}, std::vector<double>{1, 1}), DataError);
}

// ---------------------------------------------------------------------------

TEST_CASE("intercept step from the offset changes nothing") {
  const auto sim = simulate(300, 3);
  ModelFormula f;
  const TermSet set = build_term_set(f, sim.data);
  const ModelData data = make_model_data(set, sim.data, binary_outcome(sim.data, {"y", {}}));
  Booster b(data, data.weights, {1.0, Execution::serial, true});
  b.step();
  CHECK(std::abs(b.state().coefficients[0](0)) < 1e-12);
  CHECK(b.risk_path()[1] == doctest::Approx(b.risk_path()[0]).epsilon(1e-14));
}

TEST_CASE("noise-free generator covariate is selected first") {
  const std::size_t n = 200;
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> a(n), c(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = d(gen);
    c[i] = d(gen);
    y[i] = a[i] > 0.1 ? 1.0 : 0.0;
  }
  const Dataset ds({testutil::continuous("a", a), testutil::continuous("c", c)});
  ModelFormula f;
  f.terms = {term(TermType::linear, {"c"}), term(TermType::linear, {"a"})};
  const ModelData data = make_model_data(build_term_set(f, ds), ds, y);
  Booster b(data, data.weights, {});
  b.step();
  CHECK(b.state().history[0].learner == 2);
  CHECK(b.selected_terms() == std::vector<std::string>{"a"});
}

TEST_CASE("half step is exactly half of the full step") {
  const auto sim = simulate(250, 4);
  const ModelData data = model_data(sim.data);
  Booster full(data, data.weights, {1.0, Execution::serial, false});
  Booster half(data, data.weights, {0.5, Execution::serial, false});
  const Eigen::VectorXd eta0 = full.state().eta;
  full.step();
  half.step();
  CHECK(full.state().history[0].learner == half.state().history[0].learner);
  CHECK(((half.state().eta - eta0) - 0.5 * (full.state().eta - eta0)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("unpenalized learner at nu = 1 takes the LS fit of the first gradient") {
  const auto sim = simulate(200, 6);
  ModelFormula f;
  f.terms = {term(TermType::linear, {"x2"})};
  const TermSet set = build_term_set(f, sim.data);
  const auto y = binary_outcome(sim.data, {"y", {}});
  const ModelData data = make_model_data(set, sim.data, y);
  Booster b(data, data.weights, {1.0, Execution::serial, false});
  const auto u = negative_gradient(y, std::span<const double>(b.state().eta.data(), y.size()));
  const auto bl = b.learners()[1].materialize();
  const FitResult ls = fit_penalized_ls(bl, u, b.fit_weights());
  const Eigen::VectorXd eta0 = b.state().eta;
  b.step();
  if (b.state().history[0].learner == 1) {
    CHECK(std::abs(b.state().coefficients[1](0) - ls.coefficients(0)) < 1e-12);
    CHECK(((b.state().eta - eta0) - ls.fitted).cwiseAbs().maxCoeff() < 1e-12);
  } else {
    FAIL("linear learner was not selected");
  }
}

TEST_CASE("fast and reference steps follow the same path") {
  const auto sim = simulate(200, 7);
  const ModelData data = model_data(sim.data);
  Booster b(data, data.weights, {0.5, Execution::serial, false});
  std::vector<BaseLearner> dense;
  for (const auto& l : b.learners()) dense.push_back(l.materialize());
  BoostState ref = initial_state(std::span<const BaseLearner>(dense), data.y, b.fit_weights(), 0.5);
  for (int m = 0; m < 30; ++m) {
    b.step();
    reference::boost_step(ref, dense, data.y, b.fit_weights());
  }
  for (int m = 0; m < 30; ++m) CHECK(ref.history[m].learner == b.state().history[m].learner);
  CHECK((ref.eta - b.state().eta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("risk path is non-increasing on fixtures") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto sim = simulate(400, seed);
    const ModelData data = model_data(sim.data);
    Booster b(data, data.weights, {0.5, Execution::parallel, true});
    CHECK_NOTHROW(b.run(300));
    const auto& risk = b.risk_path();
    REQUIRE(risk.size() == 301);
    for (std::size_t m = 1; m < risk.size(); ++m) CHECK(risk[m] <= risk[m - 1] + 1e-10);
    CHECK(risk[50] <= risk[10]);
  }
}

TEST_CASE("m_stop = 0 predicts Phi(offset) everywhere") {
  const auto sim = simulate(150, 8);
  const ModelData data = model_data(sim.data);
  const FittedModel model = fit(data, 0);
  const auto p = predict(model, sim.data);
  const double expected = normal_cdf(model.offset);
  for (double v : p) CHECK(v == doctest::Approx(expected).epsilon(1e-14));
  CHECK(model.m_stop == 0);
  CHECK(model.history.empty());
}

TEST_CASE("predict is Phi of the stored training predictor") {
  const auto sim = simulate(300, 9);
  const ModelData data = model_data(sim.data);
  const FittedModel model = fit(data, 80);
  const Eigen::VectorXd eta = linear_predictor(model, sim.data);
  CHECK((eta - model.eta).cwiseAbs().maxCoeff() < 1e-12);
  const auto p = predict(model, sim.data);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p[i] == 0.5 * std::erfc(-eta(static_cast<Eigen::Index>(i)) / std::numbers::sqrt2));
  }
  // Invariant: eta = offset + sum of learner contributions.
  Eigen::VectorXd sum = Eigen::VectorXd::Constant(eta.size(), model.offset);
  const auto frames = make_frames(*model.terms, sim.data);
  for (std::size_t j = 0; j < frames.size(); ++j) {
    sum += apply_design(model.terms->learners[j], frames[j], model.projections[j], model.coefficients[j]);
  }
  CHECK((sum - eta).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("unseen categorical level is an error naming the level") {
  const auto sim = simulate(200, 10);
  const ModelData data = model_data(sim.data);
  const FittedModel model = fit(data, 40);
  std::vector<Column> cols = sim.data.columns();
  for (auto& c : cols) {
    if (c.schema.name == "g") {
      c.schema.levels.push_back("L7");
      c.values[0] = static_cast<double>(c.schema.levels.size() - 1);
    }
  }
  const Dataset bad(cols);
  try {
    predict(model, bad);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("L7") != std::string::npos);
  }
}

TEST_CASE("row permutation permutes fitted values") {
  const auto sim = simulate(300, 14);
  std::vector<std::size_t> order(300);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(99));
  const FittedModel a = fit(model_data(sim.data), 100);
  const FittedModel b = fit(model_data(permuted(sim.data, order)), 100);
  for (std::size_t m = 0; m < 100; ++m) CHECK(a.history[m].learner == b.history[m].learner);
  for (std::size_t j = 0; j < a.coefficients.size(); ++j) {
    CHECK((a.coefficients[j] - b.coefficients[j]).cwiseAbs().maxCoeff() < 1e-12);
  }
  for (std::size_t i = 0; i < 300; ++i) {
    CHECK(std::abs(b.eta(static_cast<Eigen::Index>(i)) - a.eta(static_cast<Eigen::Index>(order[i]))) < 1e-12);
  }
}

TEST_CASE("scaling all weights leaves the path unchanged") {
  const auto sim = simulate(300, 15);
  const ModelData data = model_data(sim.data);
  std::vector<double> scaled = data.weights;
  for (auto& v : scaled) v *= 7.5;
  Booster a(data, data.weights, {});
  Booster b(data, scaled, {});
  a.run(100);
  b.run(100);
  for (std::size_t m = 0; m < 100; ++m) CHECK(a.state().history[m].learner == b.state().history[m].learner);
  CHECK((a.state().eta - b.state().eta).cwiseAbs().maxCoeff() < 1e-10);
  for (std::size_t m = 0; m <= 100; ++m) {
    CHECK(b.risk_path()[m] == doctest::Approx(7.5 * a.risk_path()[m]).epsilon(1e-12));
  }
}

TEST_CASE("parallel and serial steps are bitwise identical") {
  const auto sim = simulate(400, 16);
  const ModelData data = model_data(sim.data);
  omp_set_num_threads(4);
  Booster a(data, data.weights, {0.5, Execution::serial, false});
  Booster b(data, data.weights, {0.5, Execution::parallel, false});
  a.run(150);
  b.run(150);
  CHECK(a.state().eta == b.state().eta);
  CHECK(a.risk_path() == b.risk_path());
  for (std::size_t j = 0; j < a.state().coefficients.size(); ++j) {
    CHECK(a.state().coefficients[j] == b.state().coefficients[j]);
  }
}

TEST_CASE("nu outside (0, 1] is rejected") {
  const auto sim = simulate(100, 17);
  const ModelData data = model_data(sim.data);
  CHECK_THROWS_AS(Booster(data, data.weights, {0.0}), ConfigError);
  CHECK_THROWS_AS(Booster(data, data.weights, {1.5}), ConfigError);
}

TEST_CASE("save and load round trip") {
  const auto sim = simulate(300, 18);
  const FittedModel model = fit(model_data(sim.data), 120);
  const auto dir = testutil::temp_dir("engine");
  save_model(model, dir / "model.json");
  const FittedModel back = load_model(dir / "model.json");
  CHECK(back.m_stop == model.m_stop);
  CHECK(back.offset == model.offset);
  CHECK(back.risk_path == model.risk_path);
  CHECK(predict(back, sim.data) == predict(model, sim.data));
  for (const auto& t : model.terms->terms) {
    if (!t.selectable) continue;
    const auto grid = default_grid(model, t.id, 20);
    CHECK(partial_effect(back, t.id, grid).estimate == partial_effect(model, t.id, grid).estimate);
  }
  CHECK(model_to_json(back) == model_to_json(model));
  CHECK_THROWS(model_from_json("{\"format_version\": 99}"));
}

// ---------------------------------------------------------------------------

TEST_CASE("partial effects") {
  const auto sim = simulate(500, 19);
  const ModelData data = model_data(sim.data);
  const FittedModel model = fit(data, 15);

  SUBCASE("never-selected term is zero") {
    bool found = false;
    for (const auto& t : model.terms->terms) {
      if (!t.selectable || model.term_selected(t.id)) continue;
      found = true;
      const auto effect = partial_effect(model, t.id, default_grid(model, t.id, 25));
      for (double v : effect.estimate) CHECK(v == 0.0);
    }
    CHECK(found);
  }

  SUBCASE("categorical levels report their coefficients") {
    const FittedModel longer = fit(data, 300);
    const auto& info = longer.terms->term("g");
    const auto& b = longer.coefficients[info.learners[0]];
    const auto effect = partial_effect(longer, "g", default_grid(longer, "g"));
    REQUIRE(effect.grid.levels == std::vector<std::string>{"L0", "L1", "L2"});
    CHECK(effect.estimate[0] == 0.0);
    CHECK(effect.estimate[1] == b(0));
    CHECK(effect.estimate[2] == b(1));
    CHECK(b(0) > 0.0);
    CHECK(b(1) < 0.0);
  }

  SUBCASE("centered linear part is zero at the weighted mean") {
    FittedModel linear_only = fit(data, 200);
    const auto& info = linear_only.terms->term("x1");
    REQUIRE(info.learners.size() == 2);
    linear_only.coefficients[info.learners[1]].setZero();
    REQUIRE(linear_only.coefficients[info.learners[0]](0) != 0.0);
    EffectGrid g;
    g.x = {linear_only.centers.at("x1")};
    CHECK(std::abs(partial_effect(linear_only, "x1", g).estimate[0]) < 1e-12);
  }

  SUBCASE("grid outside the range is clamped with a warning") {
    testutil::WarningCapture warnings;
    EffectGrid g;
    g.x = {-5.0, 0.0, 5.0};
    const auto effect = partial_effect(model, "x1", g);
    CHECK(warnings.messages.size() == 1);
    const auto& range = model.terms->learners[model.terms->term("x1").learners[1]].grids[0];
    EffectGrid edge;
    edge.x = {range.lo, 0.0, range.hi};
    CHECK(partial_effect(model, "x1", edge).estimate == effect.estimate);
  }
}

TEST_CASE("coefficient rows") {
  const auto sim = simulate(300, 20);
  const FittedModel zero = fit(model_data(sim.data), 0);
  const auto rows = coefficient_rows(zero, false);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].factor == "offset");
  CHECK(rows[0].estimate == zero.offset);
  const auto all = coefficient_rows(zero, true);
  CHECK(all.size() > 1);
}
