// Serial vs OpenMP boosting kernels, plus the dense reference step.

#include <benchmark/benchmark.h>

#include <map>
#include <vector>

#include "pboost/engine.hpp"
#include "pboost/log.hpp"
#include "pboost/selection.hpp"
#include "pboost/simgen.hpp"

namespace {

using namespace pboost;

TermSpec term(TermType type, std::vector<std::string> columns) {
  TermSpec t;
  t.type = type;
  t.columns = std::move(columns);
  return t;
}

struct Fixture {
  SimulatedData sim;
  ModelData data;
};

Fixture make_fixture(std::size_t n) {
  TruthSpec spec;
  spec.n = n;
  spec.linear = {{"x1", 0.5}};
  spec.smooth = {{"x2", SmoothShape::sine, 0.5}, {"x3", SmoothShape::quadratic, 0.4}};
  spec.categorical = {{"g", {0.0, 0.4, -0.3}}};
  spec.noise_continuous = 6;
  spec.noise_categorical = 2;
  spec.seed = 7;
  auto sim = gen_probit_data(spec);

  ModelFormula f;
  for (const char* c : {"x1", "x2", "x3"}) f.terms.push_back(term(TermType::smooth, {c}));
  f.terms.push_back(term(TermType::categorical, {"g"}));
  for (int k = 1; k <= 6; ++k) f.terms.push_back(term(TermType::smooth, {"noise" + std::to_string(k)}));
  for (int k = 1; k <= 2; ++k) f.terms.push_back(term(TermType::categorical, {"noisecat" + std::to_string(k)}));
  ModelData data = make_model_data(build_term_set(f, sim.data), sim.data, binary_outcome(sim.data, {"y", {}}));
  return {std::move(sim), std::move(data)};
}

const Fixture& fixture(std::size_t n) {
  static std::map<std::size_t, Fixture> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_fixture(n)).first;
  return it->second;
}

void run_step(benchmark::State& st, Execution execution) {
  const auto& fx = fixture(static_cast<std::size_t>(st.range(0)));
  const std::vector<double> w(fx.data.n_rows(), 1.0);
  const auto learners = prepare_learners(*fx.data.terms, *fx.data.frames, w);
  BoostState state = initial_state(learners, fx.data.y, w, 0.5);
  for (auto _ : st) {
    boost_step(state, learners, fx.data.y, w, execution);
    benchmark::DoNotOptimize(state.eta.data());
  }
  st.SetItemsProcessed(st.iterations());
}

void BM_StepSerial(benchmark::State& st) { run_step(st, Execution::serial); }
void BM_StepParallel(benchmark::State& st) { run_step(st, Execution::parallel); }

void BM_StepReference(benchmark::State& st) {
  const auto& fx = fixture(static_cast<std::size_t>(st.range(0)));
  const std::vector<double> w(fx.data.n_rows(), 1.0);
  const auto prepared = prepare_learners(*fx.data.terms, *fx.data.frames, w);
  std::vector<BaseLearner> dense;
  for (const auto& p : prepared) dense.push_back(p.materialize());
  BoostState state = initial_state(dense, fx.data.y, w, 0.5);
  for (auto _ : st) {
    reference::boost_step(state, dense, fx.data.y, w);
    benchmark::DoNotOptimize(state.eta.data());
  }
  st.SetItemsProcessed(st.iterations());
}

// Replicate pool: 8 subsample fits of 50 iterations each.
void run_pool(benchmark::State& st, int workers, Execution execution) {
  const auto& fx = fixture(static_cast<std::size_t>(st.range(0)));
  SelectionOptions options;
  options.workers = workers;
  options.boost.execution = execution;
  for (auto _ : st) {
    const auto result = tune_mstop(fx.data, {8, 0.5, 3, true}, 50, options);
    benchmark::DoNotOptimize(result.m_star);
  }
}

void BM_PoolSerial(benchmark::State& st) { run_pool(st, 1, Execution::serial); }
void BM_PoolParallel(benchmark::State& st) { run_pool(st, 0, Execution::parallel); }

}  // namespace

BENCHMARK(BM_StepSerial)->Arg(2000)->Arg(10000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_StepParallel)->Arg(2000)->Arg(10000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_StepReference)->Arg(2000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PoolSerial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PoolParallel)->Arg(2000)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  pboost::log::set_sink([](auto, auto, auto) {});
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
