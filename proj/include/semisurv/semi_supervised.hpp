#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "semisurv/core.hpp"
#include "semisurv/forest.hpp"

namespace semisurv {

struct AugmentationStep {
  std::size_t iteration = 0;  // 1-based index of the fit whose predictions were admitted
  std::size_t added = 0;
  friend bool operator==(const AugmentationStep&, const AugmentationStep&) = default;
};

/// Audit trail of a self-training run. `labeled` and `pool` always
/// partition the records the run started with.
struct SelfTrainState {
  Dataset labeled;
  Dataset pool;
  std::optional<double> variance_threshold;  // set once, on the first iteration (ST-RSF only)
  std::size_t iteration = 0;                 // forests fitted so far
  std::vector<AugmentationStep> augmentation_log;

  std::size_t total_added() const {
    std::size_t n = 0;
    for (const auto& s : augmentation_log) n += s.added;
    return n;
  }
};

struct SelfTrainResult {
  Forest forest;
  SelfTrainState state;
};

namespace detail {

inline void require_status(const Dataset& d, SupervisionStatus expected) {
  for (const auto& r : d.records)
    if (r.status != expected) throw Error("unsupported status");
}

inline Dataset concat(const Dataset& a, const Dataset& b) {
  if (!a.feature_names.empty() && !b.feature_names.empty() && a.feature_count() != b.feature_count())
    throw Error("feature count mismatch");
  Dataset out{{}, a.feature_names.empty() ? b.feature_names : a.feature_names};
  out.records.reserve(a.size() + b.size());
  out.records.insert(out.records.end(), a.records.begin(), a.records.end());
  out.records.insert(out.records.end(), b.records.begin(), b.records.end());
  return out;
}

/// Forest config of self-training iteration `iteration` (0-based). The first
/// fit uses the caller's seed unchanged.
inline ForestConfig iteration_config(const ForestConfig& base, std::size_t iteration) {
  ForestConfig c = base;
  if (iteration > 0) c.seed = derive_seed(base.seed, {0x5e1f7ULL, iteration});
  return c;
}

struct PoolPrediction {
  std::size_t index;  // position in the current pool
  EnsemblePrediction prediction;
};

/// Predictions for every pool record, ordered by ascending variance (stable).
inline std::vector<PoolPrediction> rank_by_variance(const Forest& forest, const Dataset& pool) {
  std::vector<PoolPrediction> out;
  out.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i)
    out.push_back({i, predict_with_variance(forest, pool.records[i].features, 0.0)});
  std::stable_sort(out.begin(), out.end(), [](const PoolPrediction& a, const PoolPrediction& b) {
    return a.prediction.variance < b.prediction.variance;
  });
  return out;
}

/// Moves the first `count` ranked records into `labeled` as Observed with
/// their predicted lifetime as time.
inline void admit(SelfTrainState& state, const std::vector<PoolPrediction>& ranked, std::size_t count) {
  std::vector<char> taken(state.pool.size(), 0);
  for (std::size_t j = 0; j < count; ++j) {
    SurvivalRecord r = state.pool.records[ranked[j].index];
    r.status = SupervisionStatus::Observed;
    r.time = ranked[j].prediction.mean;
    state.labeled.records.push_back(std::move(r));
    taken[ranked[j].index] = 1;
  }
  std::vector<SurvivalRecord> rest;
  rest.reserve(state.pool.size() - count);
  for (std::size_t i = 0; i < state.pool.size(); ++i)
    if (!taken[i]) rest.push_back(std::move(state.pool.records[i]));
  state.pool.records = std::move(rest);
  state.augmentation_log.push_back({state.iteration, count});
}

/// Value at 1-based position ceil(q * n) of the ascending sample.
inline double nearest_rank_quantile(std::vector<double> values, std::size_t numerator, std::size_t denominator) {
  std::sort(values.begin(), values.end());
  std::size_t pos = (numerator * values.size() + denominator - 1) / denominator;
  pos = std::clamp<std::size_t>(pos, 1, values.size());
  return values[pos - 1];
}

}  // namespace detail

/// RSF+UD: unlabeled records join training as censored at time zero.
inline Forest rsf_plus_ud(const Dataset& ldata, const Dataset& udata, const ForestConfig& config,
                          std::size_t threads = 0) {
  detail::require_labeled(ldata.records);
  detail::require_status(udata, SupervisionStatus::Unlabeled);
  Dataset converted = udata;
  for (auto& r : converted.records) {
    r.status = SupervisionStatus::Censored;
    r.time = 0.0;
  }
  return fit(detail::concat(ldata, converted), config, threads);
}

/// First quartile of the pool variances (nearest rank).
inline double first_quartile(std::vector<double> variances) {
  if (variances.empty()) throw Error("empty sample");
  return detail::nearest_rank_quantile(std::move(variances), 1, 4);
}

/// ST-RSF quota: ceil(10% of the initial unlabeled set).
inline std::size_t st_rsf_quota(std::size_t initial_pool) { return (initial_pool + 9) / 10; }

/// Number of ranked candidates ST-RSF admits: the confident prefix with
/// variance strictly below `threshold`, capped at `quota`.
inline std::size_t st_rsf_admissions(std::span<const double> sorted_variances, double threshold, std::size_t quota) {
  std::size_t n = 0;
  while (n < quota && n < sorted_variances.size() && sorted_variances[n] < threshold) ++n;
  return n;
}

/// ST-RSF+CCT admission: the ranked prefix before the first censored record
/// whose censoring time exceeds T_p + 2 sigma.
struct CctCandidate {
  bool censored = false;
  double censoring_time = 0.0;
  double lifetime = 0.0;
  double sigma = 0.0;
};

inline std::size_t cct_admissions(std::span<const CctCandidate> ranked) {
  std::size_t n = 0;
  for (; n < ranked.size(); ++n) {
    const auto& c = ranked[n];
    if (c.censored && c.censoring_time > c.lifetime + 2.0 * c.sigma) break;
  }
  return n;
}

/// Self-trained RSF: repeatedly fits on the labeled set and admits the
/// lowest-variance unlabeled predictions as observed events.
inline SelfTrainResult st_rsf(const Dataset& ldata, const Dataset& udata, const ForestConfig& config,
                              std::size_t threads = 0) {
  detail::require_labeled(ldata.records);
  detail::require_status(udata, SupervisionStatus::Unlabeled);

  SelfTrainState state{ldata, udata, std::nullopt, 0, {}};
  const std::size_t quota = st_rsf_quota(udata.size());
  for (;;) {
    Forest forest = fit(state.labeled, detail::iteration_config(config, state.iteration), threads);
    ++state.iteration;
    if (state.pool.empty()) return {std::move(forest), std::move(state)};

    const auto ranked = detail::rank_by_variance(forest, state.pool);
    std::vector<double> variances;
    variances.reserve(ranked.size());
    for (const auto& r : ranked) variances.push_back(r.prediction.variance);
    if (!state.variance_threshold) state.variance_threshold = first_quartile(variances);

    const std::size_t take = st_rsf_admissions(variances, *state.variance_threshold, quota);
    if (take == 0) return {std::move(forest), std::move(state)};
    detail::admit(state, ranked, take);
  }
}

/// ST-RSF+CCT: starts from the observed records only; censored and
/// unlabeled records form the pool, and censored ones bound each admission.
inline SelfTrainResult st_rsf_cct(const Dataset& observed, const Dataset& censored, const Dataset& udata,
                                  const ForestConfig& config, std::size_t threads = 0) {
  detail::require_status(observed, SupervisionStatus::Observed);
  detail::require_status(censored, SupervisionStatus::Censored);
  detail::require_status(udata, SupervisionStatus::Unlabeled);

  SelfTrainState state{observed, detail::concat(censored, udata), std::nullopt, 0, {}};
  for (;;) {
    Forest forest = fit(state.labeled, detail::iteration_config(config, state.iteration), threads);
    ++state.iteration;
    if (state.pool.empty()) return {std::move(forest), std::move(state)};

    const auto ranked = detail::rank_by_variance(forest, state.pool);
    std::vector<CctCandidate> candidates;
    candidates.reserve(ranked.size());
    for (const auto& r : ranked) {
      const auto& rec = state.pool.records[r.index];
      candidates.push_back({rec.censored(), rec.time, r.prediction.mean, r.prediction.sigma});
    }
    const std::size_t take = cct_admissions(candidates);
    if (take == 0) return {std::move(forest), std::move(state)};
    detail::admit(state, ranked, take);
  }
}

}  // namespace semisurv
