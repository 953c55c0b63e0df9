#include "pboost/imputation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "pboost/error.hpp"
#include "pboost/rng.hpp"

namespace pboost {
namespace {

const char* const kModule = "imputation";
constexpr double kRidgeJitter = 1e-8;

bool imputable(ColumnKind kind) {
  return kind == ColumnKind::continuous || kind == ColumnKind::coordinate ||
         kind == ColumnKind::categorical;
}

struct Candidate {
  double distance;
  std::size_t row;
  bool operator<(const Candidate& other) const {
    return distance < other.distance || (distance == other.distance && row < other.row);
  }
};

// The `pool` observed rows nearest to `target` on a scalar score, ordered
// (distance, row). `sorted` holds (score, row) pairs sorted ascending.
std::vector<std::size_t> nearest_scalar(const std::vector<std::pair<double, std::size_t>>& sorted,
                                        double target, std::size_t pool) {
  std::vector<std::size_t> out;
  auto right = static_cast<std::ptrdiff_t>(
      std::lower_bound(sorted.begin(), sorted.end(), std::make_pair(target, std::size_t{0})) -
      sorted.begin());
  auto left = right - 1;
  const auto n = static_cast<std::ptrdiff_t>(sorted.size());
  while (out.size() < pool && (left >= 0 || right < n)) {
    bool take_left = false;
    if (left < 0) {
      take_left = false;
    } else if (right >= n) {
      take_left = true;
    } else {
      const Candidate l{target - sorted[left].first, sorted[left].second};
      const Candidate r{sorted[right].first - target, sorted[right].second};
      take_left = l < r;
    }
    if (take_left) {
      out.push_back(sorted[left--].second);
    } else {
      out.push_back(sorted[right++].second);
    }
  }
  return out;
}

}  // namespace

ImputationResult pmm_impute(const Dataset& ds, const ImputationConfig& cfg) {
  if (cfg.donor_pool_size == 0) throw ConfigError(kModule, "donor_pool_size must be positive");
  if (cfg.n_cycles == 0) throw ConfigError(kModule, "n_cycles must be at least 1");

  const auto& cols = ds.columns();
  const std::size_t n = ds.n_rows();
  const auto& w = ds.weights();
  ImputationResult result;

  std::vector<std::size_t> targets;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const std::size_t missing = cols[j].missing_count();
    if (missing == 0) continue;
    if (!imputable(cols[j].schema.kind)) {
      throw DataError(kModule, "column '" + cols[j].schema.name + "' of kind " +
                                   to_string(cols[j].schema.kind) + " has missing values");
    }
    const std::size_t observed = n - missing;
    if (observed < cfg.donor_pool_size) {
      throw DataError(kModule, "column '" + cols[j].schema.name + "' has " +
                                   std::to_string(observed) + " observed values, fewer than " +
                                   "donor_pool_size " + std::to_string(cfg.donor_pool_size));
    }
    targets.push_back(j);
  }
  for (const auto& [target, preds] : cfg.predictors) {
    if (!ds.has_column(target)) throw ConfigError(kModule, "unknown imputation target '" + target + "'");
    for (const auto& p : preds) {
      if (!ds.has_column(p) || !imputable(ds.column(p).schema.kind)) {
        throw ConfigError(kModule, "predictor '" + p + "' for '" + target +
                                       "' is not a continuous or categorical column");
      }
    }
  }
  if (targets.empty()) {
    result.data = ds;
    result.log.push_back("no missing cells; nothing imputed");
    return result;
  }

  Rng rng(cfg.seed);
  std::vector<std::vector<double>> work(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) work[j] = cols[j].values;

  std::vector<std::vector<std::size_t>> observed_rows(cols.size());
  std::vector<std::vector<std::size_t>> missing_rows(cols.size());
  for (auto j : targets) {
    for (std::size_t i = 0; i < n; ++i) {
      (cols[j].is_missing(i) ? missing_rows[j] : observed_rows[j]).push_back(i);
    }
    // Start from random marginal draws.
    for (auto i : missing_rows[j]) {
      work[j][i] = cols[j].values[observed_rows[j][rng.index(observed_rows[j].size())]];
    }
    result.imputed_counts[cols[j].schema.name] = missing_rows[j].size();
  }

  for (std::size_t cycle = 0; cycle < cfg.n_cycles; ++cycle) {
    for (auto j : targets) {
      const Column& target = cols[j];
      const std::string& name = target.schema.name;

      std::vector<std::size_t> predictors;
      if (auto it = cfg.predictors.find(name); it != cfg.predictors.end()) {
        for (const auto& p : it->second) predictors.push_back(ds.column_index(p));
      } else {
        for (std::size_t k = 0; k < cols.size(); ++k) {
          if (k != j && imputable(cols[k].schema.kind)) predictors.push_back(k);
        }
      }

      // Design: intercept, numeric predictors, dummy-coded categoricals.
      Eigen::Index p = 1;
      for (auto k : predictors) {
        p += cols[k].schema.kind == ColumnKind::categorical
                 ? static_cast<Eigen::Index>(cols[k].schema.levels.size()) - 1
                 : 1;
      }
      Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), p);
      X.col(0).setOnes();
      Eigen::Index c = 1;
      for (auto k : predictors) {
        if (cols[k].schema.kind == ColumnKind::categorical) {
          const std::size_t levels = cols[k].schema.levels.size();
          const std::size_t ref = cols[k].schema.reference_index();
          for (std::size_t i = 0; i < n; ++i) {
            const auto level = static_cast<std::size_t>(work[k][i]);
            if (level == ref) continue;
            const auto offset = static_cast<Eigen::Index>(level < ref ? level : level - 1);
            X(static_cast<Eigen::Index>(i), c + offset) = 1.0;
          }
          c += static_cast<Eigen::Index>(levels) - 1;
        } else {
          for (std::size_t i = 0; i < n; ++i) X(static_cast<Eigen::Index>(i), c) = work[k][i];
          ++c;
        }
      }

      // Response: the value itself, or the dummy matrix of a categorical target.
      const bool categorical = target.schema.kind == ColumnKind::categorical;
      const Eigen::Index q =
          categorical ? static_cast<Eigen::Index>(target.schema.levels.size()) - 1 : 1;
      const std::size_t ref = categorical ? target.schema.reference_index() : 0;
      const auto& obs = observed_rows[j];
      Eigen::MatrixXd Xo(static_cast<Eigen::Index>(obs.size()), p);
      Eigen::MatrixXd Yo = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), q);
      Eigen::VectorXd wo(static_cast<Eigen::Index>(obs.size()));
      for (std::size_t r = 0; r < obs.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        Xo.row(ri) = X.row(static_cast<Eigen::Index>(obs[r]));
        wo(ri) = w[obs[r]];
        const double v = target.values[obs[r]];
        if (categorical) {
          const auto level = static_cast<std::size_t>(v);
          if (level != ref) Yo(ri, static_cast<Eigen::Index>(level < ref ? level : level - 1)) = 1.0;
        } else {
          Yo(ri, 0) = v;
        }
      }
      Eigen::MatrixXd gram = Xo.transpose() * wo.asDiagonal() * Xo;
      gram.diagonal().array() += kRidgeJitter;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
      Eigen::MatrixXd beta = ldlt.solve(Xo.transpose() * wo.asDiagonal() * Yo);
      const bool singular = !gram.allFinite() || ldlt.info() != Eigen::Success ||
                            !ldlt.isPositive() || !beta.allFinite();

      const auto& mis = missing_rows[j];
      if (singular) {
        result.log.push_back("cycle " + std::to_string(cycle + 1) + ": column '" + name +
                             "' regression singular; marginal donor draw");
        for (auto i : mis) work[j][i] = target.values[obs[rng.index(obs.size())]];
        continue;
      }

      const Eigen::MatrixXd predicted = X * beta;
      if (q == 1) {
        std::vector<std::pair<double, std::size_t>> sorted;
        sorted.reserve(obs.size());
        for (auto i : obs) sorted.emplace_back(predicted(static_cast<Eigen::Index>(i), 0), i);
        std::sort(sorted.begin(), sorted.end());
        for (auto i : mis) {
          const auto donors = nearest_scalar(sorted, predicted(static_cast<Eigen::Index>(i), 0),
                                             cfg.donor_pool_size);
          work[j][i] = target.values[donors[rng.index(donors.size())]];
        }
      } else {
        std::vector<Candidate> candidates(obs.size());
        for (auto i : mis) {
          const auto pi = predicted.row(static_cast<Eigen::Index>(i));
          for (std::size_t r = 0; r < obs.size(); ++r) {
            candidates[r] = {(predicted.row(static_cast<Eigen::Index>(obs[r])) - pi).squaredNorm(),
                             obs[r]};
          }
          std::partial_sort(candidates.begin(),
                            candidates.begin() + static_cast<std::ptrdiff_t>(cfg.donor_pool_size),
                            candidates.end());
          work[j][i] = target.values[candidates[rng.index(cfg.donor_pool_size)].row];
        }
      }
    }
  }

  std::vector<Column> out = cols;
  for (auto j : targets) {
    out[j].values = work[j];
    result.log.push_back("column '" + cols[j].schema.name + "': imputed " +
                         std::to_string(missing_rows[j].size()) + " cells");
  }
  result.data = Dataset(std::move(out));
  return result;
}

}  // namespace pboost
