#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "semisurv/core.hpp"
#include "semisurv/parallel.hpp"
#include "semisurv/random.hpp"

namespace semisurv {

struct ForestConfig {
  std::size_t n_trees = 500;
  double mtry_fraction = 1.0 / 3.0;
  std::size_t min_leaf_events = 3;
  std::optional<std::size_t> max_depth;
  std::uint64_t seed = 42;

  void validate() const {
    if (n_trees < 1) throw Error("n_trees must be >= 1");
    if (!(mtry_fraction > 0.0 && mtry_fraction <= 1.0)) throw Error("mtry_fraction must be in (0, 1]");
    if (min_leaf_events < 1) throw Error("min_leaf_events must be >= 1");
    if (max_depth && *max_depth < 1) throw Error("max_depth must be >= 1");
  }

  /// ceil(mtry_fraction * p), at least one.
  std::size_t candidate_count(std::size_t p) const {
    const double raw = std::ceil(mtry_fraction * static_cast<double>(p) - 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, std::max<std::size_t>(p, 1));
  }

  friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

class SurvivalTree {
 public:
  static constexpr std::uint32_t kLeaf = std::numeric_limits<std::uint32_t>::max();

  struct Node {
    std::uint32_t feature = kLeaf;  // kLeaf marks a terminal node
    double threshold = 0.0;
    double score = 0.0;             // log-rank score of the chosen split
    std::uint32_t left = 0;         // child node index, or leaf index when terminal
    std::uint32_t right = 0;

    bool terminal() const { return feature == kLeaf; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  struct Leaf {
    StepCurve chf;
    double lifetime = 0.0;  // expected lifetime from t0 = 0 up to the forest horizon
    std::size_t size = 0;   // training records (with bootstrap multiplicity)
    friend bool operator==(const Leaf&, const Leaf&) = default;
  };

  std::vector<Node> nodes;  // nodes[0] is the root
  std::vector<Leaf> leaves;

  const Leaf& route(std::span<const double> features) const {
    std::uint32_t at = 0;
    for (;;) {
      const Node& n = nodes[at];
      if (n.terminal()) return leaves[n.left];
      at = features[n.feature] <= n.threshold ? n.left : n.right;
    }
  }

  std::size_t depth() const {
    std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
    std::size_t best = 0;
    while (!stack.empty()) {
      auto [at, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes[at].terminal()) {
        stack.emplace_back(nodes[at].left, d + 1);
        stack.emplace_back(nodes[at].right, d + 1);
      }
    }
    return best;
  }

  friend bool operator==(const SurvivalTree&, const SurvivalTree&) = default;
};

struct Forest {
  std::vector<SurvivalTree> trees;
  ForestConfig config;
  double training_horizon = 0.0;
  std::size_t feature_count = 0;

  friend bool operator==(const Forest&, const Forest&) = default;
};

struct EnsemblePrediction {
  std::vector<double> per_tree_lifetimes;
  double mean = 0.0;
  double variance = 0.0;  // population variance over trees
  double sigma = 0.0;
};

namespace detail {

struct SplitCandidate {
  std::uint32_t feature = SurvivalTree::kLeaf;
  double threshold = 0.0;
  double score = 0.0;
  bool valid() const { return feature != SurvivalTree::kLeaf; }
};

/// Column-major view of a training set used by the tree builder, with
/// per-feature value ranks and time ranks so nodes sort integers.
struct TrainingMatrix {
  std::size_t n = 0, p = 0;
  std::vector<double> x;                // x[f * n + i]
  std::vector<std::uint32_t> x_rank;    // rank of x[f * n + i] among distinct values of f
  std::vector<double> time;
  std::vector<std::uint32_t> time_rank; // rank among distinct times
  std::vector<char> event;

  explicit TrainingMatrix(const Dataset& d)
      : n(d.size()), p(d.feature_count()), x(n * p), x_rank(n * p), time(n), time_rank(n), event(n) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = d.records[i];
      for (std::size_t f = 0; f < p; ++f) x[f * n + i] = r.features[f];
      time[i] = r.time;
      event[i] = r.observed() ? 1 : 0;
    }
    std::vector<double> distinct;
    auto rank_into = [&](std::span<const double> values, std::span<std::uint32_t> ranks) {
      distinct.assign(values.begin(), values.end());
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      for (std::size_t i = 0; i < values.size(); ++i)
        ranks[i] = static_cast<std::uint32_t>(std::lower_bound(distinct.begin(), distinct.end(), values[i]) -
                                              distinct.begin());
    };
    for (std::size_t f = 0; f < p; ++f)
      rank_into(std::span<const double>(x).subspan(f * n, n), std::span<std::uint32_t>(x_rank).subspan(f * n, n));
    rank_into(time, time_rank);
  }
  double value(std::size_t f, std::uint32_t i) const { return x[f * n + i]; }
  std::uint32_t value_rank(std::size_t f, std::uint32_t i) const { return x_rank[f * n + i]; }
};

/// Scores below this are treated as zero variance. A positive log-rank
/// variance on a node of n records is at least about 1/n, far above the
/// cancellation error of the incremental sums.
inline constexpr double kVarianceFloor = 1e-9;

/// Fenwick tree over ranks 0..m holding (weight, weight * u) pairs.
class PairFenwick {
 public:
  void reset(std::size_t n) { tree_.assign(n + 1, {0.0, 0.0}); }
  void add(std::size_t i, double a, double b) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) {
      tree_[i].first += a;
      tree_[i].second += b;
    }
  }
  /// Sums over indices [0, i).
  std::pair<double, double> prefix(std::size_t i) const {
    double a = 0.0, b = 0.0;
    for (; i > 0; i -= i & (~i + 1)) {
      a += tree_[i].first;
      b += tree_[i].second;
    }
    return {a, b};
  }

 private:
  std::vector<std::pair<double, double>> tree_;
};

/// Reusable buffers for split search.
struct SplitScratch {
  std::vector<std::uint32_t> event_ranks;
  std::vector<std::uint32_t> rank;  // per node position: #node event times <= its time
  std::vector<double> at_rank, deaths, at_risk;
  std::vector<double> expect;     // A[k] = sum_{i<=k} d_i/n_i
  std::vector<double> spread;     // W[k] = sum_{i<=k} d_i(n_i-d_i)/(n_i(n_i-1))
  std::vector<double> spread_sq;  // U[k] = sum_{i<=k} W-term / n_i
  std::vector<std::uint64_t> keys;
  PairFenwick left_tree;
};

/// Builds the event-time grid of one node in `s`; returns its event count m.
/// `weight[i]` is the multiplicity of training record i.
inline std::size_t build_risk_grid(const TrainingMatrix& data, std::span<const std::uint32_t> idx,
                                   std::span<const double> weight, SplitScratch& s) {
  s.event_ranks.clear();
  for (auto i : idx)
    if (data.event[i]) s.event_ranks.push_back(data.time_rank[i]);
  std::sort(s.event_ranks.begin(), s.event_ranks.end());
  s.event_ranks.erase(std::unique(s.event_ranks.begin(), s.event_ranks.end()), s.event_ranks.end());
  const std::size_t m = s.event_ranks.size();

  s.rank.resize(idx.size());
  s.at_rank.assign(m + 1, 0.0);
  s.deaths.assign(m + 1, 0.0);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto k = static_cast<std::uint32_t>(
        std::upper_bound(s.event_ranks.begin(), s.event_ranks.end(), data.time_rank[idx[j]]) - s.event_ranks.begin());
    s.rank[j] = k;
    s.at_rank[k] += weight[idx[j]];
    if (data.event[idx[j]]) s.deaths[k] += weight[idx[j]];  // an event at t_k has rank k
  }
  // n_i = weight of records with rank >= i
  s.at_risk.assign(m + 2, 0.0);
  for (std::size_t k = m + 1; k-- > 0;) s.at_risk[k] = s.at_risk[k + 1] + s.at_rank[k];
  s.expect.assign(m + 1, 0.0);
  s.spread.assign(m + 1, 0.0);
  s.spread_sq.assign(m + 1, 0.0);
  for (std::size_t i = 1; i <= m; ++i) {
    const double n = s.at_risk[i], d = s.deaths[i];
    const double w = n > 1.0 ? d * (n - d) / (n * (n - 1.0)) : 0.0;
    s.expect[i] = s.expect[i - 1] + d / n;
    s.spread[i] = s.spread[i - 1] + w;
    s.spread_sq[i] = s.spread_sq[i - 1] + w / n;
  }
  return m;
}

/// Best split of one node over the given features, scoring every midpoint
/// between consecutive distinct values in a single sorted sweep per feature.
/// Ties keep the earliest candidate (lowest feature, then smallest threshold).
///
/// With n_L,i the left weight at risk at event time i, the sweep maintains
///   O - E = sum_left event - sum_left A[k_r]
///   V     = sum_left W[k_r] - sum_i u_i n_L,i^2
/// where the quadratic term is updated through a Fenwick tree over ranks.
inline SplitCandidate best_split(const TrainingMatrix& data, std::span<const std::uint32_t> idx,
                                 std::span<const double> weight, std::span<const std::uint32_t> features,
                                 SplitScratch& s) {
  SplitCandidate best;
  if (idx.size() < 2) return best;
  const std::size_t m = build_risk_grid(data, idx, weight, s);
  if (m == 0) return best;

  s.keys.resize(idx.size());
  for (std::uint32_t f : features) {
    for (std::size_t j = 0; j < idx.size(); ++j)
      s.keys[j] = (std::uint64_t{data.value_rank(f, idx[j])} << 32) | j;
    std::sort(s.keys.begin(), s.keys.end());
    if ((s.keys.front() >> 32) == (s.keys.back() >> 32)) continue;

    s.left_tree.reset(m + 1);
    double left_events = 0.0, expected = 0.0, s1 = 0.0, s2 = 0.0, left_n = 0.0;
    for (std::size_t j = 0; j + 1 < s.keys.size(); ++j) {
      const auto pos = static_cast<std::uint32_t>(s.keys[j] & 0xffffffffULL);
      const std::uint32_t i = idx[pos];
      const std::uint32_t k = s.rank[pos];
      const double w = weight[i];
      const double uk = s.spread_sq[k];
      // sum_{i<=k} u_i * n_L,i before this record joins the left child
      const auto [below_n, below_u] = s.left_tree.prefix(k);
      const double overlap = uk * (left_n - below_n) + below_u;
      s2 += 2.0 * w * overlap + w * w * uk;
      s1 += w * s.spread[k];
      expected += w * s.expect[k];
      if (data.event[i]) left_events += w;
      left_n += w;
      s.left_tree.add(k, w, w * uk);

      if ((s.keys[j] >> 32) == (s.keys[j + 1] >> 32)) continue;
      const double var = s1 - s2;
      if (!(var > kVarianceFloor)) continue;
      const double score = std::abs(left_events - expected) / std::sqrt(var);
      if (score > 0.0 && score > best.score * (1.0 + 1e-12)) {
        const auto next = static_cast<std::uint32_t>(s.keys[j + 1] & 0xffffffffULL);
        best.feature = f;
        best.threshold = 0.5 * (data.value(f, i) + data.value(f, idx[next]));
        best.score = score;
      }
    }
  }
  return best;
}

/// Convenience overload: `idx` may repeat records (bootstrap multiplicity).
inline SplitCandidate best_split(const TrainingMatrix& data, std::span<const std::uint32_t> idx,
                                 std::span<const std::uint32_t> features) {
  std::vector<double> weight(data.n, 0.0);
  for (auto i : idx) weight[i] += 1.0;
  std::vector<std::uint32_t> unique;
  for (std::uint32_t i = 0; i < data.n; ++i)
    if (weight[i] > 0.0) unique.push_back(i);
  SplitScratch scratch;
  return best_split(data, unique, weight, features, scratch);
}

/// Weighted Nelson-Aalen; `sample` holds (time, is_event, weight) and is sorted in place.
inline StepCurve nelson_aalen_weighted(std::vector<std::tuple<double, bool, double>>& sample) {
  std::sort(sample.begin(), sample.end());
  double at_risk = 0.0;
  for (const auto& e : sample) at_risk += std::get<2>(e);
  std::vector<double> knots, values;
  double hazard = 0.0;
  for (std::size_t i = 0; i < sample.size();) {
    const double t = std::get<0>(sample[i]);
    double deaths = 0.0, leaving = 0.0;
    for (; i < sample.size() && std::get<0>(sample[i]) == t; ++i) {
      leaving += std::get<2>(sample[i]);
      if (std::get<1>(sample[i])) deaths += std::get<2>(sample[i]);
    }
    if (deaths > 0.0) {
      hazard += deaths / at_risk;
      knots.push_back(t);
      values.push_back(hazard);
    }
    at_risk -= leaving;
  }
  return StepCurve(std::move(knots), std::move(values), 0.0);
}

class TreeBuilder {
 public:
  TreeBuilder(const TrainingMatrix& data, const ForestConfig& config, double horizon, std::uint64_t seed)
      : data_(data), config_(config), horizon_(horizon), rng_(seed), weight_(data.n, 0.0) {}

  SurvivalTree grow() {
    std::fill(weight_.begin(), weight_.end(), 0.0);
    for (std::size_t draw = 0; draw < data_.n; ++draw) weight_[uniform_below(rng_, data_.n)] += 1.0;
    idx_.clear();
    for (std::uint32_t i = 0; i < data_.n; ++i)
      if (weight_[i] > 0.0) idx_.push_back(i);
    tree_ = SurvivalTree{};
    build(0, idx_.size(), 0);
    return std::move(tree_);
  }

 private:
  /// Grows the subtree over idx_[begin, end).
  std::uint32_t build(std::size_t begin, std::size_t end, std::size_t depth) {
    const auto at = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const std::span<std::uint32_t> idx(idx_.data() + begin, end - begin);

    double events = 0.0;
    for (auto i : idx)
      if (data_.event[i]) events += weight_[i];
    const bool depth_capped = config_.max_depth && depth >= *config_.max_depth;

    SplitCandidate split;
    if (events >= static_cast<double>(config_.min_leaf_events) && !depth_capped) {
      draw_features();
      split = best_split(data_, idx, weight_, features_, scratch_);
    }
    if (!split.valid()) {
      make_leaf(at, idx);
      return at;
    }

    const auto mid = std::partition(idx.begin(), idx.end(), [&](std::uint32_t i) {
                       return data_.value(split.feature, i) <= split.threshold;
                     }) - idx.begin();
    const std::uint32_t l = build(begin, begin + static_cast<std::size_t>(mid), depth + 1);
    const std::uint32_t r = build(begin + static_cast<std::size_t>(mid), end, depth + 1);
    auto& node = tree_.nodes[at];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.score = split.score;
    node.left = l;
    node.right = r;
    return at;
  }

  /// Candidate features for one node, drawn without replacement, ascending.
  void draw_features() {
    const std::size_t p = data_.p, k = config_.candidate_count(p);
    pool_.resize(p);
    for (std::size_t i = 0; i < p; ++i) pool_[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 0; i < k; ++i) std::swap(pool_[i], pool_[i + uniform_below(rng_, p - i)]);
    features_.assign(pool_.begin(), pool_.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(features_.begin(), features_.end());
  }

  void make_leaf(std::uint32_t at, std::span<const std::uint32_t> idx) {
    leaf_sample_.clear();
    double size = 0.0;
    for (auto i : idx) {
      leaf_sample_.emplace_back(data_.time[i], data_.event[i] != 0, weight_[i]);
      size += weight_[i];
    }
    SurvivalTree::Leaf leaf;
    leaf.chf = nelson_aalen_weighted(leaf_sample_);
    leaf.size = static_cast<std::size_t>(size);
    const StepCurve survival = chf_to_survival(leaf.chf);
    leaf.lifetime = survival(0.0) > 0.0 ? expected_future_lifetime(survival, 0.0, horizon_) : 0.0;
    auto& node = tree_.nodes[at];
    node.feature = SurvivalTree::kLeaf;
    node.left = static_cast<std::uint32_t>(tree_.leaves.size());
    tree_.leaves.push_back(std::move(leaf));
  }

  const TrainingMatrix& data_;
  const ForestConfig& config_;
  double horizon_;
  Rng rng_;
  std::vector<double> weight_;  // bootstrap multiplicity per training record
  std::vector<std::uint32_t> idx_;
  std::vector<std::uint32_t> pool_, features_;
  std::vector<std::tuple<double, bool, double>> leaf_sample_;
  SurvivalTree tree_;
  SplitScratch scratch_;
};

inline void check_dimension(const Forest& forest, std::span<const double> features) {
  if (features.size() != forest.feature_count)
    throw Error("dimension mismatch: expected " + std::to_string(forest.feature_count) + " features, got " +
                std::to_string(features.size()));
}

}  // namespace detail

/// Seed of tree `index` in a forest seeded with `seed`.
inline std::uint64_t tree_seed(std::uint64_t seed, std::size_t index) { return derive_seed(seed, {index}); }

/// Grows config.n_trees bootstrap survival trees. `threads` only affects
/// speed: every tree draws from its own seed.
inline Forest fit(const Dataset& train, const ForestConfig& config, std::size_t threads = 0) {
  config.validate();
  train.validate();
  detail::require_labeled(train.records);
  double horizon = -1.0;
  for (const auto& r : train.records)
    if (r.observed()) horizon = std::max(horizon, r.time);
  if (horizon < 0.0) throw Error("no events to fit");

  const detail::TrainingMatrix data(train);
  Forest forest;
  forest.config = config;
  forest.training_horizon = horizon;
  forest.feature_count = train.feature_count();
  forest.trees.resize(config.n_trees);
  parallel_for(
      config.n_trees,
      [&](std::size_t b) {
        detail::TreeBuilder builder(data, config, horizon, tree_seed(config.seed, b));
        forest.trees[b] = builder.grow();
      },
      threads);
  return forest;
}

/// Pointwise mean of the leaf cumulative hazards reached by `features`.
inline StepCurve predict_chf(const Forest& forest, std::span<const double> features) {
  detail::check_dimension(forest, features);
  std::vector<std::pair<double, double>> jumps;
  for (const auto& tree : forest.trees) {
    const StepCurve& h = tree.route(features).chf;
    double prev = h.initial_value();
    for (std::size_t k = 0; k < h.size(); ++k) {
      jumps.emplace_back(h.knots()[k], h.values()[k] - prev);
      prev = h.values()[k];
    }
  }
  std::sort(jumps.begin(), jumps.end());
  const double b = static_cast<double>(forest.trees.size());
  std::vector<double> knots, values;
  double total = 0.0;
  for (std::size_t i = 0; i < jumps.size();) {
    const double t = jumps[i].first;
    for (; i < jumps.size() && jumps[i].first == t; ++i) total += jumps[i].second;
    knots.push_back(t);
    values.push_back(total / b);
  }
  return StepCurve(std::move(knots), std::move(values), 0.0);
}

/// Expected lifetime after t0 from the ensemble survival curve.
inline double predict_lifetime(const Forest& forest, std::span<const double> features, double t0 = 0.0) {
  return expected_future_lifetime(chf_to_survival(predict_chf(forest, features)), t0, forest.training_horizon);
}

/// Per-tree expected lifetimes and their spread. A tree whose survival is
/// already zero at t0 contributes 0.
inline EnsemblePrediction predict_with_variance(const Forest& forest, std::span<const double> features,
                                                double t0 = 0.0) {
  detail::check_dimension(forest, features);
  if (!(t0 >= 0.0) || t0 > forest.training_horizon) throw Error("invalid horizon");
  EnsemblePrediction out;
  out.per_tree_lifetimes.reserve(forest.trees.size());
  for (const auto& tree : forest.trees) {
    const auto& leaf = tree.route(features);
    if (t0 == 0.0) {
      out.per_tree_lifetimes.push_back(leaf.lifetime);
      continue;
    }
    const StepCurve s = chf_to_survival(leaf.chf);
    out.per_tree_lifetimes.push_back(s(t0) > 0.0 ? expected_future_lifetime(s, t0, forest.training_horizon) : 0.0);
  }
  const double b = static_cast<double>(out.per_tree_lifetimes.size());
  double sum = 0.0;
  for (double v : out.per_tree_lifetimes) sum += v;
  out.mean = sum / b;
  double ss = 0.0;
  for (double v : out.per_tree_lifetimes) ss += (v - out.mean) * (v - out.mean);
  out.variance = ss / b;
  out.sigma = std::sqrt(out.variance);
  return out;
}

}  // namespace semisurv
