#include "pboost/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pboost/error.hpp"
#include "pboost/log.hpp"
#include "pboost/numeric.hpp"
#include "pboost/parallel.hpp"
#include "pboost/rng.hpp"

namespace pboost {
namespace {

const char* const kModule = "model-selection";
constexpr int kMaxRedraws = 10;

std::vector<std::vector<std::size_t>> strata(std::span<const double> y, bool stratify) {
  std::vector<std::vector<std::size_t>> groups(stratify ? 2 : 1);
  for (std::size_t i = 0; i < y.size(); ++i) {
    groups[stratify && y[i] == 1.0 ? 1 : 0].push_back(i);
  }
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  return groups;
}

bool has_both_classes(const Replicate& m, std::span<const double> y) {
  bool zero = false;
  bool one = false;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (m[i] <= 0.0) continue;
    (y[i] == 1.0 ? one : zero) = true;
  }
  return zero && one;
}

// Largest-remainder split of k draws over the groups, proportional to size.
std::vector<std::size_t> quotas(const std::vector<std::vector<std::size_t>>& groups, std::size_t k,
                                std::size_t n) {
  std::vector<std::size_t> q(groups.size());
  std::vector<std::pair<double, std::size_t>> remainder;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double exact = static_cast<double>(k) * static_cast<double>(groups[g].size()) /
                         static_cast<double>(n);
    q[g] = static_cast<std::size_t>(std::floor(exact));
    assigned += q[g];
    remainder.emplace_back(-(exact - static_cast<double>(q[g])), g);
  }
  std::sort(remainder.begin(), remainder.end());
  for (std::size_t r = 0; assigned < k; ++r, ++assigned) ++q[remainder[r % remainder.size()].second];
  return q;
}

template <typename Draw>
std::vector<Replicate> draw_replicates(std::span<const double> y, const ResamplePlan& plan,
                                       const char* what, Draw draw) {
  if (plan.n_replicates == 0) throw ConfigError(kModule, "n_replicates must be at least 1");
  std::vector<Replicate> out(plan.n_replicates);
  for (std::size_t r = 0; r < plan.n_replicates; ++r) {
    Rng rng(derive_seed(plan.seed, r));
    for (int attempt = 0;; ++attempt) {
      out[r] = draw(rng);
      if (has_both_classes(out[r], y)) break;
      if (attempt == kMaxRedraws) {
        throw DataError(kModule, std::string(what) + " replicate " + std::to_string(r + 1) +
                                     " has a single outcome class after " +
                                     std::to_string(kMaxRedraws) + " redraws");
      }
      log::info(kModule, std::string(what) + " replicate " + std::to_string(r + 1) +
                             " redrawn: single outcome class");
    }
  }
  return out;
}

std::vector<double> times(const Replicate& m, std::span<const double> w) {
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = m[i] * w[i];
  return out;
}

}  // namespace

std::vector<Replicate> draw_subsamples(std::span<const double> y, const ResamplePlan& plan) {
  if (!(plan.fraction > 0.0 && plan.fraction < 1.0)) {
    throw ConfigError(kModule, "subsample fraction must be in (0, 1)");
  }
  const std::size_t n = y.size();
  const auto k = static_cast<std::size_t>(std::floor(plan.fraction * static_cast<double>(n)));
  if (k == 0 || k >= n) {
    throw ConfigError(kModule, "subsample of " + std::to_string(k) + " out of " +
                                   std::to_string(n) + " rows is empty or complete");
  }
  const auto groups = strata(y, plan.stratify_by_outcome);
  const auto q = quotas(groups, k, n);
  return draw_replicates(y, plan, "subsample", [&](Rng& rng) {
    Replicate m(n, 0.0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::vector<std::size_t> idx = groups[g];
      for (std::size_t i = 0; i < q[g]; ++i) {
        std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
        m[idx[i]] = 1.0;
      }
    }
    return m;
  });
}

std::vector<Replicate> draw_bootstrap(std::span<const double> y, const ResamplePlan& plan) {
  const std::size_t n = y.size();
  const auto groups = strata(y, plan.stratify_by_outcome);
  return draw_replicates(y, plan, "bootstrap", [&](Rng& rng) {
    Replicate m(n, 0.0);
    for (const auto& g : groups) {
      for (std::size_t i = 0; i < g.size(); ++i) m[g[rng.index(g.size())]] += 1.0;
    }
    return m;
  });
}

// ---------------------------------------------------------------------------

TuningResult tune_mstop(const ModelData& data, const ResamplePlan& plan, std::size_t m_max,
                        const SelectionOptions& options) {
  TuningResult result;
  result.replicates = draw_subsamples(data.y, plan);
  const std::size_t reps = result.replicates.size();
  result.curves.resize(reps);
  parallel_for(reps, options.workers, [&](std::size_t r) {
    const auto& m = result.replicates[r];
    std::vector<double> held_out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) held_out[i] = (1.0 - m[i]) * data.weights[i];
    Booster booster(data, times(m, data.weights), options.boost);
    booster.track_evaluation(std::move(held_out));
    booster.run(m_max);
    result.curves[r] = booster.evaluation_risk();
  });

  result.mean_curve.assign(m_max + 1, 0.0);
  for (std::size_t m = 0; m <= m_max; ++m) {
    double total = 0.0;
    for (std::size_t r = 0; r < reps; ++r) total += result.curves[r][m];
    result.mean_curve[m] = total / static_cast<double>(reps);
  }
  result.m_star = static_cast<std::size_t>(
      std::min_element(result.mean_curve.begin(), result.mean_curve.end()) -
      result.mean_curve.begin());
  return result;
}

// ---------------------------------------------------------------------------

double StabilityReport::frequency(const std::string& term_id) const {
  const auto it = std::find(term_ids.begin(), term_ids.end(), term_id);
  if (it == term_ids.end()) throw ConfigError(kModule, "unknown term '" + term_id + "'");
  return frequencies[static_cast<std::size_t>(it - term_ids.begin())];
}

StabilityReport rethreshold(const StabilityReport& report, double threshold) {
  if (!(threshold > 0.5 && threshold <= 1.0)) {
    throw ConfigError(kModule, "stability threshold must be in (0.5, 1]");
  }
  StabilityReport out = report;
  out.threshold = threshold;
  out.stable.assign(out.term_ids.size(), false);
  out.stable_set.clear();
  for (std::size_t t = 0; t < out.term_ids.size(); ++t) {
    if (out.frequencies[t] >= threshold) {
      out.stable[t] = true;
      out.stable_set.push_back(out.term_ids[t]);
    }
  }
  const double p = static_cast<double>(out.term_ids.size());
  out.pfer_bound = static_cast<double>(out.q * out.q) / ((2.0 * threshold - 1.0) * p);
  return out;
}

StabilityReport stability_select(const ModelData& data, const StabilityOptions& stability,
                                 const SelectionOptions& options) {
  const std::size_t p = data.terms->selectable_terms();
  if (stability.q < 1 || stability.q > p) {
    throw ConfigError(kModule, "q = " + std::to_string(stability.q) + " must be in [1, " +
                                   std::to_string(p) + "] (number of selectable terms)");
  }
  if (!(stability.threshold > 0.5 && stability.threshold <= 1.0)) {
    throw ConfigError(kModule, "stability threshold must be in (0.5, 1]");
  }
  const auto replicates = draw_subsamples(data.y, stability.plan);
  const std::size_t reps = replicates.size();

  StabilityReport report;
  report.q = stability.q;
  report.n_replicates = reps;
  report.selections.resize(reps);
  std::vector<char> capped(reps, 0);
  parallel_for(reps, options.workers, [&](std::size_t r) {
    Booster booster(data, times(replicates[r], data.weights), options.boost);
    capped[r] = booster.run_until_terms(stability.q, stability.m_max) ? 0 : 1;
    report.selections[r] = booster.selected_terms();
  });
  report.capped_replicates = static_cast<std::size_t>(std::count(capped.begin(), capped.end(), 1));
  if (report.capped_replicates > 0) {
    log::warn(kModule, std::to_string(report.capped_replicates) + " of " + std::to_string(reps) +
                           " replicates reached m_max = " + std::to_string(stability.m_max) +
                           " before selecting q = " + std::to_string(stability.q) + " terms");
  }

  for (const auto& t : data.terms->terms) {
    if (!t.selectable) continue;
    std::size_t count = 0;
    for (const auto& sel : report.selections) {
      count += std::find(sel.begin(), sel.end(), t.id) != sel.end() ? 1 : 0;
    }
    report.term_ids.push_back(t.id);
    report.frequencies.push_back(static_cast<double>(count) / static_cast<double>(reps));
  }
  return rethreshold(report, stability.threshold);
}

// ---------------------------------------------------------------------------

BandResult bootstrap_bands(const ModelData& data, std::size_t m_star, const BandOptions& bands,
                           const SelectionOptions& options) {
  if (!(bands.level > 0.0 && bands.level < 1.0)) throw ConfigError(kModule, "band level must be in (0, 1)");

  BandResult result;
  result.model = fit(data, m_star, options.boost);
  std::vector<std::string> terms = bands.terms;
  if (terms.empty()) {
    for (const auto& t : data.terms->terms) {
      if (t.selectable) terms.push_back(t.id);
    }
  }
  std::vector<EffectGrid> grids;
  for (const auto& id : terms) {
    grids.push_back(default_grid(result.model, id, bands.grid_points));
    result.effects.push_back(partial_effect(result.model, id, grids.back()));
    result.effects.back().level = bands.level;
  }
  const auto full_rows = coefficient_rows(result.model, true);

  const auto replicates = draw_bootstrap(data.y, bands.plan);
  const std::size_t reps = replicates.size();
  // draws[r][t] = partial effect of term t in replicate r
  std::vector<std::vector<std::vector<double>>> draws(reps);
  std::vector<std::vector<double>> coef_draws(reps);
  parallel_for(reps, options.workers, [&](std::size_t r) {
    Booster booster(data, times(replicates[r], data.weights), options.boost);
    booster.run(m_star);
    const FittedModel model = booster.model();
    for (std::size_t t = 0; t < terms.size(); ++t) {
      draws[r].push_back(partial_effect(model, terms[t], grids[t]).estimate);
    }
    for (const auto& row : coefficient_rows(model, true)) coef_draws[r].push_back(row.estimate);
  });

  const double lo = (1.0 - bands.level) / 2.0;
  const double hi = 1.0 - lo;
  std::vector<double> values(reps);
  for (std::size_t t = 0; t < terms.size(); ++t) {
    auto& pe = result.effects[t];
    for (std::size_t k = 0; k < pe.estimate.size(); ++k) {
      for (std::size_t r = 0; r < reps; ++r) values[r] = draws[r][t][k];
      pe.lower.push_back(quantile_type7(values, lo));
      pe.upper.push_back(quantile_type7(values, hi));
    }
  }
  for (std::size_t k = 0; k < full_rows.size(); ++k) {
    CoefficientRow row = full_rows[k];
    if (k > 0 && row.estimate == 0.0) continue;
    for (std::size_t r = 0; r < reps; ++r) values[r] = coef_draws[r][k];
    row.ci_low = quantile_type7(values, lo);
    row.ci_high = quantile_type7(values, hi);
    result.coefficients.push_back(row);
  }
  return result;
}

// ---------------------------------------------------------------------------

void write_risk_curves(const TuningResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(kModule, "cannot write '" + path.string() + "'");
  out << "m,mean_risk";
  for (std::size_t r = 0; r < result.curves.size(); ++r) out << ",rep_" << r + 1;
  out << '\n';
  for (std::size_t m = 0; m < result.mean_curve.size(); ++m) {
    out << m << ',' << format_double(result.mean_curve[m]);
    for (const auto& c : result.curves) out << ',' << format_double(c[m]);
    out << '\n';
  }
}

void write_stability_report(const StabilityReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(kModule, "cannot write '" + path.string() + "'");
  out << "term_id,frequency,stable\n";
  for (std::size_t t = 0; t < report.term_ids.size(); ++t) {
    out << csv_escape(report.term_ids[t]) << ',' << format_double(report.frequencies[t]) << ','
        << (report.stable[t] ? 1 : 0) << '\n';
  }
}

}  // namespace pboost
