#pragma once

// Resampling layer: m_stop tuning by subsampling, stability selection and
// bootstrap pointwise bands. Replicates are weight vectors over the full
// training rows, so frames and knot grids are shared by every replicate.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pboost/engine.hpp"

namespace pboost {

struct ResamplePlan {
  std::size_t n_replicates = 25;
  double fraction = 0.5;
  std::uint64_t seed = 1;
  bool stratify_by_outcome = true;
};

/// Row multiplicities of one replicate: 0/1 for subsamples, counts for the
/// bootstrap.
using Replicate = std::vector<double>;

/// floor(fraction * n) rows without replacement per replicate. With
/// stratification the classes keep their proportions (largest remainder).
/// A replicate with a single outcome class is redrawn up to 10 times.
std::vector<Replicate> draw_subsamples(std::span<const double> y, const ResamplePlan& plan);

/// n rows with replacement per replicate (per class when stratified).
std::vector<Replicate> draw_bootstrap(std::span<const double> y, const ResamplePlan& plan);

struct SelectionOptions {
  BoostOptions boost;
  int workers = 0;  ///< 0 = OpenMP default
};

struct TuningResult {
  std::size_t m_star = 0;
  std::vector<double> mean_curve;                 ///< length m_max + 1
  std::vector<std::vector<double>> curves;        ///< per replicate
  std::vector<Replicate> replicates;
};

/// Fits each subsample once for m_max iterations and records the weighted
/// mean risk on the complement after every iteration.
TuningResult tune_mstop(const ModelData& data, const ResamplePlan& plan, std::size_t m_max,
                        const SelectionOptions& options = {});

struct StabilityReport {
  std::vector<std::string> term_ids;   ///< selectable terms in formula order
  std::vector<double> frequencies;
  std::vector<bool> stable;
  std::vector<std::string> stable_set;
  double threshold = 0.8;
  std::size_t q = 35;
  std::size_t n_replicates = 0;
  std::size_t capped_replicates = 0;   ///< replicates that hit m_max before q terms
  double pfer_bound = 0.0;             ///< q^2 / ((2 threshold - 1) p)
  std::vector<std::vector<std::string>> selections;  ///< per replicate, in entry order

  double frequency(const std::string& term_id) const;
};

struct StabilityOptions {
  ResamplePlan plan{100, 0.5, 1, true};
  double threshold = 0.8;
  std::size_t q = 35;
  std::size_t m_max = 10000;
};

StabilityReport stability_select(const ModelData& data, const StabilityOptions& stability,
                                 const SelectionOptions& options = {});

/// Same report for a different threshold without refitting.
StabilityReport rethreshold(const StabilityReport& report, double threshold);

struct BandOptions {
  ResamplePlan plan{1000, 1.0, 1, true};
  double level = 0.95;
  std::size_t grid_points = 50;
  std::vector<std::string> terms;   ///< empty = every selectable term
};

struct BandResult {
  FittedModel model;                      ///< full-data fit at m_star
  std::vector<PartialEffect> effects;
  std::vector<CoefficientRow> coefficients;  ///< with percentile intervals
};

/// Percentile bands from bootstrap refits at m_star; estimates come from the
/// full-data fit.
BandResult bootstrap_bands(const ModelData& data, std::size_t m_star, const BandOptions& bands,
                           const SelectionOptions& options = {});

void write_risk_curves(const TuningResult& result, const std::filesystem::path& path);
void write_stability_report(const StabilityReport& report, const std::filesystem::path& path);

}  // namespace pboost
