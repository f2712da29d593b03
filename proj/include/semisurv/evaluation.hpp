#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "semisurv/core.hpp"
#include "semisurv/forest.hpp"
#include "semisurv/parallel.hpp"
#include "semisurv/random.hpp"
#include "semisurv/semi_supervised.hpp"

namespace semisurv {

// ---------------------------------------------------------------------------
// Concordance

struct ScoredSubject {
  double time = 0.0;
  SupervisionStatus status = SupervisionStatus::Observed;
  double predicted = 0.0;  // predicted lifetime: larger means longer survival
};

/// Harrell's C-index. A pair is comparable when the earlier time is an
/// observed event and the later one is either an event at a strictly larger
/// time or a censoring at a time >= it. Prediction ties count one half.
inline double c_index(std::span<const ScoredSubject> subjects) {
  for (const auto& s : subjects)
    if (s.status == SupervisionStatus::Unlabeled) throw Error("unsupported status");

  // Prediction ranks for a Fenwick tree of counts.
  std::vector<double> preds;
  preds.reserve(subjects.size());
  for (const auto& s : subjects) preds.push_back(s.predicted);
  std::sort(preds.begin(), preds.end());
  preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
  auto rank_of = [&](double p) {
    return static_cast<std::size_t>(std::lower_bound(preds.begin(), preds.end(), p) - preds.begin());
  };

  std::vector<std::int64_t> tree(preds.size() + 1, 0);
  std::vector<std::int64_t> exact(preds.size(), 0);
  std::int64_t inserted = 0;
  auto insert = [&](std::size_t r) {
    ++exact[r];
    ++inserted;
    for (std::size_t i = r + 1; i < tree.size(); i += i & (~i + 1)) ++tree[i];
  };
  auto count_below = [&](std::size_t r) {  // strictly smaller prediction rank
    std::int64_t s = 0;
    for (std::size_t i = r; i > 0; i -= i & (~i + 1)) s += tree[i];
    return s;
  };

  std::vector<std::size_t> order(subjects.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return subjects[a].time > subjects[b].time; });

  // Twice the concordant mass, so ties stay integral.
  std::int64_t twice_concordant = 0, comparable = 0;
  for (std::size_t g = 0; g < order.size();) {
    const double t = subjects[order[g]].time;
    std::size_t end = g;
    while (end < order.size() && subjects[order[end]].time == t) ++end;
    for (std::size_t i = g; i < end; ++i)
      if (subjects[order[i]].status == SupervisionStatus::Censored) insert(rank_of(subjects[order[i]].predicted));
    for (std::size_t i = g; i < end; ++i) {
      const auto& s = subjects[order[i]];
      if (s.status != SupervisionStatus::Observed) continue;
      const std::size_t r = rank_of(s.predicted);
      const std::int64_t below = count_below(r);
      const std::int64_t tied = exact[r];
      const std::int64_t above = inserted - below - tied;
      comparable += inserted;
      twice_concordant += 2 * above + tied;
    }
    for (std::size_t i = g; i < end; ++i)
      if (subjects[order[i]].status == SupervisionStatus::Observed) insert(rank_of(subjects[order[i]].predicted));
    g = end;
  }
  if (comparable == 0) throw Error("no comparable pairs");
  return static_cast<double>(twice_concordant) / (2.0 * static_cast<double>(comparable));
}

// ---------------------------------------------------------------------------
// Unlabeled-set generation

struct LabeledSplit {
  Dataset ldata;
  Dataset udata;
};

/// Hides round(fraction * group size) records of each status group: the
/// hidden records lose time and status. Both outputs keep input order.
inline LabeledSplit make_unlabeled_split(const Dataset& train, double unlabeled_fraction, std::uint64_t seed) {
  if (!(unlabeled_fraction > 0.0 && unlabeled_fraction < 1.0)) throw Error("unlabeled fraction must be in (0, 1)");
  detail::require_labeled(train.records);

  Rng rng(derive_seed(seed, {}));
  std::vector<char> hidden(train.size(), 0);
  for (SupervisionStatus group : {SupervisionStatus::Observed, SupervisionStatus::Censored}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (train.records[i].status == group) members.push_back(i);
    shuffle(members, rng);
    const auto take = static_cast<std::size_t>(std::llround(unlabeled_fraction * static_cast<double>(members.size())));
    for (std::size_t j = 0; j < take; ++j) hidden[members[j]] = 1;
  }

  LabeledSplit out{train.empty_like(), train.empty_like()};
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (hidden[i]) {
      SurvivalRecord r = train.records[i];
      r.status = SupervisionStatus::Unlabeled;
      r.time = 0.0;
      out.udata.records.push_back(std::move(r));
    } else {
      out.ldata.records.push_back(train.records[i]);
    }
  }
  if (out.ldata.empty() || out.ldata.count(SupervisionStatus::Observed) == 0) throw Error("degenerate split");
  return out;
}

// ---------------------------------------------------------------------------
// Repeated cross-validation over labeled fractions

enum class Method { Rsf, RsfUd, StRsf, StRsfCct, MaxReference };

inline constexpr std::array<Method, 5> kAllMethods{Method::Rsf, Method::RsfUd, Method::StRsf, Method::StRsfCct,
                                                   Method::MaxReference};

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::Rsf: return "RSF";
    case Method::RsfUd: return "RSF+UD";
    case Method::StRsf: return "ST-RSF";
    case Method::StRsfCct: return "ST-RSF+CCT";
    case Method::MaxReference: return "MAX-REFERENCE";
  }
  return "?";
}

inline Method parse_method(std::string_view name) {
  for (Method m : kAllMethods)
    if (method_name(m) == name) return m;
  throw Error("unknown method '" + std::string(name) + "'");
}

/// Labeled fractions matching unlabeled shares 5%, 15%, ..., 75%.
inline std::vector<double> default_labeled_fractions() {
  return {0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95};
}

struct ExperimentPlan {
  std::vector<double> fractions = default_labeled_fractions();  // labeled share of each training split
  std::size_t n_folds = 5;
  std::size_t n_repeats = 10;
  Method method = Method::Rsf;
  ForestConfig forest_config;
  std::uint64_t seed = 42;

  void validate(std::size_t dataset_size) const {
    if (fractions.empty()) throw Error("no fractions");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
      if (!(fractions[i] > 0.0 && fractions[i] < 1.0)) throw Error("fractions must lie in (0, 1)");
      if (i > 0 && !(fractions[i] > fractions[i - 1])) throw Error("fractions must be strictly increasing");
    }
    if (n_folds < 2 || n_folds > dataset_size) throw Error("n_folds must be in [2, dataset size]");
    if (n_repeats < 1) throw Error("n_repeats must be >= 1");
    forest_config.validate();
  }
};

struct CurveCell {
  double fraction = 0.0;
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::optional<double> c_index;  // empty when the cell was degenerate
  std::vector<AugmentationStep> augmentation;
};

struct FractionSummary {
  double fraction = 0.0;
  std::size_t count = 0;  // non-missing cells
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();  // sample standard deviation over cells
};

struct CurveResult {
  Method method = Method::Rsf;
  std::vector<CurveCell> cells;  // ordered by (repeat, fold, fraction)
  std::vector<FractionSummary> per_fraction;
  std::vector<double> repeat_auc;  // curve-AUC of each repeat's fold-averaged curve
  double curve_auc = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

/// Normalized trapezoidal area of a curve, x100. A constant curve c gives 100c.
inline double curve_auc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("curve axes differ in length");
  if (x.size() < 2) throw Error("curve too short");
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) area += (x[i + 1] - x[i]) * 0.5 * (y[i] + y[i + 1]);
  const double range = x.back() - x.front();
  if (!(range > 0.0)) throw Error("curve too short");
  return 100.0 * area / range;
}

/// Area under the per-fraction mean curve, skipping fractions with no data.
inline double curve_auc(const CurveResult& result) {
  std::vector<double> x, y;
  for (const auto& s : result.per_fraction)
    if (s.count > 0) {
      x.push_back(s.fraction);
      y.push_back(s.mean);
    }
  return curve_auc(x, y);
}

namespace detail {

/// Fold label per record; each status group is shuffled and dealt round
/// robin, continuing across groups so fold sizes differ by at most one.
inline std::vector<std::size_t> stratified_folds(const Dataset& data, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> fold(data.size(), 0);
  std::size_t deal = 0;
  for (SupervisionStatus group : {SupervisionStatus::Observed, SupervisionStatus::Censored}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.records[i].status == group) members.push_back(i);
    shuffle(members, rng);
    for (auto i : members) fold[i] = deal++ % k;
  }
  return fold;
}

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct FoldData {
  Dataset train;
  Dataset test;
};

/// Forest trained by `method` on one training split.
inline Forest train_method(Method method, const Dataset& train, double labeled_fraction, std::uint64_t split_seed,
                           const ForestConfig& config, std::vector<AugmentationStep>& augmentation) {
  if (method == Method::MaxReference) return fit(train, config, 1);
  const auto split = make_unlabeled_split(train, 1.0 - labeled_fraction, split_seed);
  switch (method) {
    case Method::Rsf: return fit(split.ldata, config, 1);
    case Method::RsfUd: return rsf_plus_ud(split.ldata, split.udata, config, 1);
    case Method::StRsf: {
      auto run = st_rsf(split.ldata, split.udata, config, 1);
      augmentation = run.state.augmentation_log;
      return std::move(run.forest);
    }
    case Method::StRsfCct: {
      Dataset observed = split.ldata.empty_like(), censored = split.ldata.empty_like();
      for (const auto& r : split.ldata.records) (r.observed() ? observed : censored).records.push_back(r);
      auto run = st_rsf_cct(observed, censored, split.udata, config, 1);
      augmentation = run.state.augmentation_log;
      return std::move(run.forest);
    }
    case Method::MaxReference: break;
  }
  throw Error("unreachable");
}

inline double score_fold(const Forest& forest, const Dataset& test) {
  std::vector<ScoredSubject> scored;
  scored.reserve(test.size());
  for (const auto& r : test.records) scored.push_back({r.time, r.status, predict_lifetime(forest, r.features, 0.0)});
  return c_index(scored);
}

}  // namespace detail

/// Per-fraction mean/std, per-repeat curve-AUC, and the overall curve-AUC.
inline void summarize(CurveResult& result, std::span<const double> fractions, std::size_t n_repeats) {
  result.per_fraction.clear();
  for (double phi : fractions) {
    std::vector<double> values;
    for (const auto& c : result.cells)
      if (c.fraction == phi && c.c_index) values.push_back(*c.c_index);
    FractionSummary s;
    s.fraction = phi;
    s.count = values.size();
    if (!values.empty()) {
      s.mean = detail::mean_of(values);
      s.std = detail::sample_std(values);
    }
    result.per_fraction.push_back(s);
  }

  result.repeat_auc.clear();
  for (std::size_t r = 0; r < n_repeats; ++r) {
    std::vector<double> x, y;
    for (double phi : fractions) {
      std::vector<double> values;
      for (const auto& c : result.cells)
        if (c.repeat == r && c.fraction == phi && c.c_index) values.push_back(*c.c_index);
      if (values.empty()) continue;
      x.push_back(phi);
      y.push_back(detail::mean_of(values));
    }
    if (x.size() >= 2) result.repeat_auc.push_back(curve_auc(x, y));
  }

  std::size_t usable = 0;
  for (const auto& s : result.per_fraction) usable += s.count > 0 ? 1 : 0;
  result.curve_auc = usable >= 2 ? curve_auc(result) : std::numeric_limits<double>::quiet_NaN();
}

/// Repeated stratified k-fold evaluation of one method over the labeled
/// fraction grid. Every cell has its own pre-derived seeds, so the result is
/// independent of `threads`.
inline CurveResult run_experiment(const Dataset& data, const ExperimentPlan& plan, std::size_t threads = 0) {
  data.validate();
  detail::require_labeled(data.records);
  plan.validate(data.size());

  const std::size_t folds = plan.n_folds, fracs = plan.fractions.size();
  std::vector<std::vector<std::size_t>> fold_of(plan.n_repeats);
  for (std::size_t r = 0; r < plan.n_repeats; ++r)
    fold_of[r] = detail::stratified_folds(data, folds, derive_seed(plan.seed, {1, r}));

  auto fold_data = [&](std::size_t r, std::size_t f) {
    detail::FoldData fd{data.empty_like(), data.empty_like()};
    for (std::size_t i = 0; i < data.size(); ++i) (fold_of[r][i] == f ? fd.test : fd.train).records.push_back(data.records[i]);
    return fd;
  };

  CurveResult result;
  result.method = plan.method;
  result.cells.resize(plan.n_repeats * folds * fracs);
  std::vector<std::string> cell_warning(result.cells.size());

  const bool fraction_free = plan.method == Method::MaxReference;
  const std::size_t tasks = fraction_free ? plan.n_repeats * folds : result.cells.size();
  parallel_for(
      tasks,
      [&](std::size_t task) {
        const std::size_t cell0 = fraction_free ? task * fracs : task;
        const std::size_t r = cell0 / (folds * fracs), f = (cell0 / fracs) % folds, p = cell0 % fracs;
        const double phi = plan.fractions[p];
        ForestConfig config = plan.forest_config;
        config.seed = derive_seed(plan.seed, {3, r, f});
        const auto fd = fold_data(r, f);

        CurveCell cell{phi, r, f, std::nullopt, {}};
        try {
          const Forest forest =
              detail::train_method(plan.method, fd.train, phi, derive_seed(plan.seed, {2, r, f, p}), config,
                                   cell.augmentation);
          cell.c_index = detail::score_fold(forest, fd.test);
        } catch (const Error& e) {
          cell_warning[cell0] = "repeat " + std::to_string(r) + " fold " + std::to_string(f) + " fraction " +
                                std::to_string(phi) + ": " + e.what();
        }
        if (fraction_free) {
          for (std::size_t q = 0; q < fracs; ++q) {
            result.cells[cell0 + q] = cell;
            result.cells[cell0 + q].fraction = plan.fractions[q];
            if (q > 0) cell_warning[cell0 + q] = cell_warning[cell0];
          }
        } else {
          result.cells[cell0] = std::move(cell);
        }
      },
      threads);

  for (auto& w : cell_warning)
    if (!w.empty()) result.warnings.push_back(std::move(w));
  summarize(result, plan.fractions, plan.n_repeats);
  return result;
}

// ---------------------------------------------------------------------------
// Friedman test with Nemenyi critical difference

struct RankingResult {
  std::vector<double> mean_ranks;  // 1 = best (highest score)
  double friedman_statistic = 0.0;
  double critical_difference = 0.0;
  std::vector<std::vector<bool>> significant;  // |R_i - R_j| > CD
};

/// Studentized-range critical values q_alpha / sqrt(2) for k = 2..10 methods.
inline double nemenyi_q(std::size_t k, double alpha) {
  static constexpr std::array<double, 9> q05{1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
  static constexpr std::array<double, 9> q10{1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};
  if (k < 2 || k > 10) throw Error("Nemenyi table covers 2..10 methods");
  if (std::abs(alpha - 0.05) < 1e-12) return q05[k - 2];
  if (std::abs(alpha - 0.10) < 1e-12) return q10[k - 2];
  throw Error("alpha must be 0.05 or 0.10");
}

/// Ranks within one row: 1 for the largest value, ties share the average rank.
inline std::vector<double> descending_ranks(std::span<const double> row) {
  std::vector<std::size_t> order(row.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  std::vector<double> ranks(row.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && row[order[j]] == row[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t q = i; q < j; ++q) ranks[order[q]] = avg;
    i = j;
  }
  return ranks;
}

/// `table` is datasets x methods, higher is better.
inline RankingResult friedman_nemenyi(const std::vector<std::vector<double>>& table, double alpha = 0.05) {
  const std::size_t n = table.size();
  if (n < 2) throw Error("insufficient datasets");
  const std::size_t k = table.front().size();
  if (k < 2) throw Error("insufficient methods");
  for (const auto& row : table) {
    if (row.size() != k) throw Error("ragged score table");
    for (double v : row)
      if (!std::isfinite(v)) throw Error("missing score");
  }
  const double q = nemenyi_q(k, alpha);

  RankingResult out;
  out.mean_ranks.assign(k, 0.0);
  for (const auto& row : table) {
    const auto ranks = descending_ranks(row);
    for (std::size_t j = 0; j < k; ++j) out.mean_ranks[j] += ranks[j];
  }
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  for (auto& r : out.mean_ranks) r /= nd;

  double sum_sq = 0.0;
  for (double r : out.mean_ranks) sum_sq += r * r;
  out.friedman_statistic =
      std::max(0.0, 12.0 * nd / (kd * (kd + 1.0)) * (sum_sq - kd * (kd + 1.0) * (kd + 1.0) / 4.0));
  out.critical_difference = q * std::sqrt(kd * (kd + 1.0) / (6.0 * nd));
  out.significant.assign(k, std::vector<bool>(k, false));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      out.significant[i][j] = std::abs(out.mean_ranks[i] - out.mean_ranks[j]) > out.critical_difference;
  return out;
}

}  // namespace semisurv
