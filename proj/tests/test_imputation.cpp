#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "pboost/error.hpp"
#include "pboost/imputation.hpp"
#include "pboost/rng.hpp"
#include "test_util.hpp"

using namespace pboost;
using testutil::categorical;
using testutil::continuous;

namespace {

bool contains(const std::vector<std::string>& log, const std::string& needle) {
  for (const auto& line : log) {
    if (line.find(needle) != std::string::npos) return true;
  }
  return false;
}

Dataset fixture(std::uint64_t seed, std::size_t n = 300) {
  Rng rng(seed);
  std::vector<double> x(n), y(n), g(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::round(100.0 * rng.uniform()) / 10.0;
    y[i] = 2.0 * x[i] + std::round(10.0 * rng.uniform());
    g[i] = static_cast<double>(rng.index(3));
    z[i] = std::round(5.0 * rng.uniform());
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform() < 0.2) y[i] = NAN;
    if (rng.uniform() < 0.2) g[i] = NAN;
    if (rng.uniform() < 0.1) x[i] = NAN;
  }
  return Dataset({continuous("x", x), continuous("y", y), categorical("g", {"a", "b", "c"}, g),
                  continuous("z", z)});
}

}  // namespace

TEST_CASE("no missing cells: output equals input") {
  const Dataset ds({continuous("x", {1, 2, 3}), continuous("y", {4, 5, 6})});
  const auto r = pmm_impute(ds, {});
  CHECK(r.data.column("x").values == ds.column("x").values);
  CHECK(r.data.column("y").values == ds.column("y").values);
  CHECK(contains(r.log, "nothing imputed"));
}

TEST_CASE("single observed donor is forced") {
  const Dataset ds({continuous("x", {1, 2}), continuous("y", {7.5, NAN})});
  ImputationConfig cfg;
  cfg.donor_pool_size = 1;
  const auto r = pmm_impute(ds, cfg);
  CHECK(r.data.column("y").values[1] == 7.5);
}

TEST_CASE("exact linear relation picks the matching donor") {
  // y = 2x; the missing y sits at x = 3, donors y in {2, 4, 6, 8}.
  const Dataset ds({continuous("x", {1, 2, 3, 4, 3}), continuous("y", {2, 4, 6, 8, NAN})});
  ImputationConfig cfg;
  cfg.donor_pool_size = 1;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    cfg.seed = seed;
    CHECK(pmm_impute(ds, cfg).data.column("y").values[4] == 6.0);
  }
}

TEST_CASE("too few donors names the column") {
  const Dataset ds({continuous("x", {1, 2, 3}), continuous("income", {1, NAN, NAN})});
  ImputationConfig cfg;
  cfg.donor_pool_size = 2;
  try {
    pmm_impute(ds, cfg);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("income") != std::string::npos);
  }
}

TEST_CASE("configuration checks") {
  const Dataset ds({continuous("x", {1, 2, 3}), continuous("y", {1, NAN, 3})});
  ImputationConfig cfg;
  cfg.donor_pool_size = 1;
  cfg.n_cycles = 0;
  CHECK_THROWS_AS(pmm_impute(ds, cfg), ConfigError);
  cfg.n_cycles = 1;
  cfg.predictors["y"] = {"nope"};
  CHECK_THROWS_AS(pmm_impute(ds, cfg), ConfigError);
}

TEST_CASE("singular regression falls back to a marginal draw and logs it") {
  const Dataset ds({continuous("x", {1e200, -1e200, 1e200, -1e200, 1e200}),
                    continuous("y", {1, 2, 3, 4, NAN})});
  ImputationConfig cfg;
  cfg.donor_pool_size = 2;
  const auto r = pmm_impute(ds, cfg);
  CHECK(contains(r.log, "singular"));
  const double v = r.data.column("y").values[4];
  CHECK((v == 1 || v == 2 || v == 3 || v == 4));
}

TEST_CASE("donor property, observed cells untouched, determinism") {
  const Dataset ds = fixture(5);
  ImputationConfig cfg;
  cfg.seed = 99;
  const auto a = pmm_impute(ds, cfg);
  const auto b = pmm_impute(ds, cfg);
  CHECK(a.data.missing_cells() == 0);
  for (const auto& name : {"x", "y", "g", "z"}) {
    const auto& in = ds.column(name).values;
    const auto& out = a.data.column(name).values;
    std::set<double> observed;
    for (double v : in) {
      if (!std::isnan(v)) observed.insert(v);
    }
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (!std::isnan(in[i])) {
        CHECK(out[i] == in[i]);
      } else {
        CHECK(observed.count(out[i]) == 1);
      }
    }
    CHECK(b.data.column(name).values == out);
  }
  CHECK(a.imputed_counts.at("y") == ds.column("y").missing_count());

  cfg.seed = 100;
  const auto c = pmm_impute(ds, cfg);
  for (const auto& name : {"x", "y", "g"}) {
    const auto& in = ds.column(name).values;
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (!std::isnan(in[i])) CHECK(c.data.column(name).values[i] == in[i]);
    }
  }
}

TEST_CASE("missing values in a non-imputable column are rejected") {
  Column id;
  id.schema.name = "id";
  id.schema.kind = ColumnKind::identifier;
  id.text = {"a", "", "c"};
  const Dataset ds({id, continuous("x", {1, NAN, 3})});
  CHECK_THROWS_AS(pmm_impute(ds, {}), DataError);
}
