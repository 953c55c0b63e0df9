#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "pboost/cli.hpp"
#include "pboost/config.hpp"
#include "pboost/error.hpp"
#include "pboost/report.hpp"
#include "test_util.hpp"

using namespace pboost;
using Json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

Json base_config() {
  return Json::parse(R"({
    "input": "data.csv",
    "output_dir": "out",
    "seed": 5,
    "simulate": {"n": 300, "seed": 2, "intercept": -0.2,
      "linear": [{"name": "x1", "coef": -0.9}],
      "categorical": [{"name": "g", "level_effects": [0, 0.6]}],
      "noise_continuous": 2, "weighted": true},
    "schema": [
      {"name": "y", "kind": "continuous"}, {"name": "x1"}, {"name": "g", "kind": "categorical"},
      {"name": "noise1"}, {"name": "noise2"}, {"name": "w", "kind": "weight"}
    ],
    "outcome": {"column": "y"},
    "filters": [{"id": "x1_edge", "description": "x1 above 0.98",
                 "reject_if": [{"column": "x1", "op": ">", "value": 0.98}]}],
    "outliers": {"columns": ["noise1"]},
    "model": {"inner_knots": 8, "terms": [
      {"type": "smooth", "column": "x1"}, {"type": "categorical", "column": "g"},
      {"type": "smooth", "column": "noise1"}, {"type": "smooth", "column": "noise2"}
    ]},
    "tuning": {"replicates": 4, "m_max": 80},
    "stability": {"replicates": 8, "q": 2, "m_max": 300},
    "bands": {"replicates": 10, "grid_points": 12}
  })");
}

fs::path write_config(const fs::path& dir, const Json& j) {
  const fs::path path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

CliOptions options_for(const fs::path& config) {
  CliOptions o;
  o.config = config;
  return o;
}

std::vector<double> polyline_y(const std::string& svg) {
  const std::regex poly("<polyline[^>]*points=\"([^\"]*)\"");
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, poly));
  std::vector<double> ys;
  std::istringstream in(m[1].str());
  for (std::string pair; in >> pair;) ys.push_back(std::stod(pair.substr(pair.find(',') + 1)));
  return ys;
}

PartialEffect line_effect(std::vector<double> estimate) {
  PartialEffect pe;
  pe.term_id = "x1";
  pe.label = "x1";
  pe.axes = {"x1"};
  for (std::size_t k = 0; k < estimate.size(); ++k) pe.grid.x.push_back(static_cast<double>(k) / 10.0);
  pe.lower = estimate;
  pe.upper = estimate;
  for (auto& v : pe.lower) v -= 0.1;
  for (auto& v : pe.upper) v += 0.1;
  pe.estimate = std::move(estimate);
  return pe;
}

}  // namespace

TEST_CASE("config defaults") {
  const RunConfig cfg = parse_config(base_config(), "/base");
  CHECK(cfg.input == fs::path("/base/data.csv"));
  CHECK(cfg.output_dir == fs::path("/base/out"));
  CHECK(cfg.nu == 0.5);
  CHECK(cfg.stability.threshold == 0.8);
  CHECK(cfg.stability.q == 2);
  CHECK(cfg.bands.level == 0.95);
  CHECK(cfg.formula.terms.size() == 4);
  CHECK(cfg.formula.inner_knots == 8);
  CHECK(cfg.tuning.n_replicates == 4);
  CHECK(cfg.tuning.fraction == 0.5);
  CHECK_NOTHROW(validate(cfg));

  Json minimal = Json::parse(R"({"input": "d.csv", "schema": [{"name": "y"}, {"name": "x"}],
                                 "outcome": {"column": "y"}})");
  const RunConfig m = parse_config(minimal);
  CHECK(m.stability.q == 35);
  CHECK(m.stability.plan.n_replicates == 100);
  CHECK(m.bands.plan.n_replicates == 1000);
  CHECK(m.tuning.n_replicates == 25);
}

TEST_CASE("seed derivation") {
  RunConfig a = parse_config(base_config());
  RunConfig b = parse_config(base_config());
  b.apply_seed(6);
  CHECK(a.tuning.seed != b.tuning.seed);
  CHECK(a.tuning.seed != a.stability.plan.seed);
  CHECK(a.stability.plan.seed != a.bands.plan.seed);
}

TEST_CASE("validation errors") {
  auto expect_config_error = [](const std::function<void(Json&)>& edit) {
    Json j = base_config();
    edit(j);
    CHECK_THROWS_AS(validate(parse_config(j)), ConfigError);
  };
  expect_config_error([](Json& j) { j["model"]["nu"] = 0.0; });
  expect_config_error([](Json& j) { j["model"]["nu"] = 1.5; });
  expect_config_error([](Json& j) { j["stability"]["threshold"] = 0.5; });
  expect_config_error([](Json& j) { j["stability"]["threshold"] = 1.2; });
  expect_config_error([](Json& j) { j["bands"]["level"] = 1.0; });
  expect_config_error([](Json& j) { j["outcome"]["column"] = "nope"; });
  expect_config_error([](Json& j) { j["model"]["terms"][0]["column"] = "nope"; });
  expect_config_error([](Json& j) { j["model"]["terms"][0]["column"] = "y"; });
  expect_config_error([](Json& j) { j["model"]["terms"][0]["type"] = "wiggly"; });
  expect_config_error([](Json& j) { j["outliers"]["columns"] = {"nope"}; });
  expect_config_error([](Json& j) { j["workers"] = -1; });
}

TEST_CASE("exit codes") {
  const auto dir = testutil::temp_dir("cli_exit");
  CHECK(run("fit", options_for(dir / "missing.json")) != 0);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run("fit", options_for(dir / "broken.json")) == 2);

  Json bad = base_config();
  bad["model"]["nu"] = 2.0;
  CHECK(run("fit", options_for(write_config(dir, bad))) == 2);

  const fs::path good = write_config(dir, base_config());
  CHECK(run("unknown", options_for(good)) == 2);
  // No input file yet.
  CHECK(run("prepare", options_for(good)) == 3);
  CHECK(run("fit", options_for(good)) == 3);

  CHECK(exit_code(ErrorKind::config) == 2);
  CHECK(exit_code(ErrorKind::data) == 3);
  CHECK(exit_code(ErrorKind::numerical) == 4);
}

TEST_CASE("fit with m_stop = 0 writes only the offset row") {
  const auto dir = testutil::temp_dir("cli_fit0");
  Json j = base_config();
  j["fit"] = {{"m_stop", 0}};
  const auto opts = options_for(write_config(dir, j));
  for (const char* stage : {"simulate", "prepare", "impute", "fit"}) REQUIRE(run(stage, opts) == 0);
  const auto rows = lines_of(dir / "out" / "coefficients.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "level,factor,estimate,ci_low,ci_high");
  CHECK(rows[1].rfind(",offset,", 0) == 0);
  CHECK(fs::exists(dir / "out" / "model.json"));
}

TEST_CASE("full pipeline outputs") {
  const auto dir = testutil::temp_dir("cli_all");
  CliOptions opts = options_for(write_config(dir, base_config()));
  REQUIRE(run("simulate", opts) == 0);
  REQUIRE(run("all", opts) == 0);
  const fs::path out = dir / "out";
  for (const char* f : {"cleaned.csv", "rejections_filters.csv", "rejections_outliers.csv", "imputed.csv",
                        "impute_log.txt", "risk_curves.csv", "tuning.json", "model.json", "coefficients.csv",
                        "stability.csv", "partial_x1.csv", "partial_x1.svg", "partial_g.csv", "partial_g.svg"}) {
    CAPTURE(f);
    CHECK(fs::exists(out / f));
  }
  CHECK(lines_of(out / "stability.csv").at(1).rfind("x1,", 0) == 0);

  // Emitted tables reload and rewrite to the same bytes.
  const RunConfig cfg = load_config(opts.config);
  for (const char* f : {"cleaned.csv", "imputed.csv"}) {
    const Dataset ds = load_csv(out / f, cfg.schema);
    std::ostringstream again;
    write_csv(ds, again);
    CHECK(again.str() == slurp(out / f));
  }
  for (const char* f : {"risk_curves.csv", "partial_x1.csv", "stability.csv"}) {
    CAPTURE(f);
    const auto header = split_csv_line(lines_of(out / f).at(0));
    std::vector<ColumnSchema> schema;
    for (const auto& h : header) {
      ColumnSchema s;
      s.name = h;
      if (h == "term_id") s.kind = ColumnKind::identifier;
      schema.push_back(s);
    }
    const Dataset ds = load_csv(out / f, schema);
    std::ostringstream again;
    write_csv(ds, again);
    CHECK(again.str() == slurp(out / f));
  }

  opts.out = dir / "second";
  REQUIRE(run("all", opts) == 0);
  for (const auto& entry : fs::directory_iterator(out)) {
    CAPTURE(entry.path().filename().string());
    CHECK(slurp(entry.path()) == slurp(dir / "second" / entry.path().filename()));
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("svg rendering") {
  SUBCASE("identical inputs give identical bytes") {
    const PartialEffect pe = line_effect({0.3, 0.1, -0.2, 0.4});
    CHECK(partial_effect_svg(pe) == partial_effect_svg(pe));
    const auto dir = testutil::temp_dir("svg");
    render_partial_effect_svg(pe, dir / "a.svg");
    render_partial_effect_svg(pe, dir / "b.svg");
    CHECK(slurp(dir / "a.svg") == slurp(dir / "b.svg"));
    CHECK(slurp(dir / "a.svg") == partial_effect_svg(pe));
  }
  SUBCASE("zero effect is a horizontal line") {
    PartialEffect pe = line_effect(std::vector<double>(6, 0.0));
    pe.lower.assign(6, 0.0);
    pe.upper.assign(6, 0.0);
    const auto ys = polyline_y(partial_effect_svg(pe));
    for (double y : ys) CHECK(y == ys.front());
  }
  SUBCASE("decreasing effect gives a decreasing polyline") {
    const auto ys = polyline_y(partial_effect_svg(line_effect({0.5, 0.3, 0.0, -0.1, -0.4, -0.45})));
    // SVG y grows downwards.
    for (std::size_t k = 1; k < ys.size(); ++k) CHECK(ys[k] > ys[k - 1]);
  }
  SUBCASE("single point gets a marker and error bar") {
    PartialEffect pe;
    pe.term_id = "g";
    pe.axes = {"level"};
    pe.grid.levels = {"L1"};
    pe.estimate = {0.311};
    pe.lower = {0.276};
    pe.upper = {0.345};
    const std::string svg = partial_effect_svg(pe);
    CHECK(svg.find("<circle") != std::string::npos);
    CHECK(svg.find("<line") != std::string::npos);
    CHECK(svg.find("L1") != std::string::npos);
  }
  SUBCASE("surface renders as a heat map") {
    PartialEffect pe;
    pe.term_id = "a:b";
    pe.type = TermType::surface;
    pe.axes = {"a", "b"};
    for (double a : {0.0, 1.0}) {
      for (double b : {0.0, 1.0, 2.0}) {
        pe.grid.x.push_back(a);
        pe.grid.y.push_back(b);
        pe.estimate.push_back(a - b);
      }
    }
    pe.lower = pe.estimate;
    pe.upper = pe.estimate;
    const std::string svg = partial_effect_svg(pe);
    std::size_t rects = 0;
    for (std::size_t pos = 0; (pos = svg.find("<rect", pos)) != std::string::npos; ++pos) ++rects;
    CHECK(rects >= 6);
  }
}

TEST_CASE("partial effect csv and file names") {
  CHECK(sanitize_filename("x1:g=L1") == "x1_g_L1");
  const auto dir = testutil::temp_dir("pecsv");
  write_partial_effect_csv(line_effect({1.0, 2.0}), dir / "p.csv");
  const auto rows = lines_of(dir / "p.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "x1,estimate,lower,upper");
}
