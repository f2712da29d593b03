#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace semisurv {

/// Thrown for every contract violation in the library. The message carries
/// the short reason ("empty risk set", "not a CHF", ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SupervisionStatus { Observed, Censored, Unlabeled };

inline const char* to_string(SupervisionStatus s) {
  switch (s) {
    case SupervisionStatus::Observed: return "observed";
    case SupervisionStatus::Censored: return "censored";
    case SupervisionStatus::Unlabeled: return "unlabeled";
  }
  return "?";
}

struct SurvivalRecord {
  std::vector<double> features;
  double time = 0.0;  // meaningless when status == Unlabeled
  SupervisionStatus status = SupervisionStatus::Unlabeled;

  bool observed() const { return status == SupervisionStatus::Observed; }
  bool censored() const { return status == SupervisionStatus::Censored; }
  bool labeled() const { return status != SupervisionStatus::Unlabeled; }

  friend bool operator==(const SurvivalRecord&, const SurvivalRecord&) = default;
};

struct Dataset {
  std::vector<SurvivalRecord> records;
  std::vector<std::string> feature_names;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::size_t feature_count() const { return feature_names.size(); }

  std::size_t count(SupervisionStatus s) const {
    return static_cast<std::size_t>(std::count_if(
        records.begin(), records.end(), [s](const SurvivalRecord& r) { return r.status == s; }));
  }

  /// Same feature schema, no records.
  Dataset empty_like() const { return Dataset{{}, feature_names}; }

  void validate() const {
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (r.features.size() != feature_names.size())
        throw Error("record " + std::to_string(i) + " has " + std::to_string(r.features.size()) +
                    " features, dataset declares " + std::to_string(feature_names.size()));
      if (r.labeled() && !(r.time >= 0.0))
        throw Error("record " + std::to_string(i) + " has negative time");
    }
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Right-continuous piecewise-constant function of time. Holds both
/// cumulative hazards and survival curves.
class StepCurve {
 public:
  StepCurve() = default;

  explicit StepCurve(double initial_value) : initial_(initial_value) {}

  StepCurve(std::vector<double> knots, std::vector<double> values, double initial_value)
      : knots_(std::move(knots)), values_(std::move(values)), initial_(initial_value) {
    if (knots_.size() != values_.size()) throw Error("step curve: knots and values differ in length");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      if (!(knots_[i] >= 0.0)) throw Error("step curve: negative knot");
      if (i > 0 && !(knots_[i] > knots_[i - 1])) throw Error("step curve: knots not strictly increasing");
    }
  }

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  double initial_value() const { return initial_; }
  std::size_t size() const { return knots_.size(); }
  bool empty() const { return knots_.empty(); }

  /// Value attached to the largest knot <= t; constant past the last knot.
  double operator()(double t) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) return initial_;
    return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
  }

  bool is_chf() const {
    if (initial_ != 0.0) return false;
    double prev = initial_;
    for (double v : values_) {
      if (!(v >= prev)) return false;
      prev = v;
    }
    return true;
  }

  bool is_survival() const {
    if (initial_ != 1.0) return false;
    double prev = initial_;
    for (double v : values_) {
      if (!(v <= prev) || v < 0.0) return false;
      prev = v;
    }
    return true;
  }

  friend bool operator==(const StepCurve&, const StepCurve&) = default;

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  double initial_ = 0.0;
};

namespace detail {

inline void require_labeled(std::span<const SurvivalRecord> records) {
  for (const auto& r : records)
    if (!r.labeled()) throw Error("unsupported status");
}

/// Nelson-Aalen over (time, is_event) pairs; sorts `sample` in place.
inline StepCurve nelson_aalen_pairs(std::vector<std::pair<double, bool>>& sample) {
  std::sort(sample.begin(), sample.end());
  std::vector<double> knots, values;
  double hazard = 0.0;
  std::size_t i = 0;
  const std::size_t n = sample.size();
  while (i < n) {
    const double t = sample[i].first;
    std::size_t j = i, deaths = 0;
    for (; j < n && sample[j].first == t; ++j) deaths += sample[j].second ? 1 : 0;
    if (deaths > 0) {
      hazard += static_cast<double>(deaths) / static_cast<double>(n - i);
      knots.push_back(t);
      values.push_back(hazard);
    }
    i = j;
  }
  return StepCurve(std::move(knots), std::move(values), 0.0);
}

}  // namespace detail

/// Nelson-Aalen cumulative hazard. Censored records tied with an event
/// stay in that event's risk set.
inline StepCurve nelson_aalen(std::span<const SurvivalRecord> records) {
  if (records.empty()) throw Error("empty risk set");
  detail::require_labeled(records);
  std::vector<std::pair<double, bool>> sample;
  sample.reserve(records.size());
  for (const auto& r : records) sample.emplace_back(r.time, r.observed());
  return detail::nelson_aalen_pairs(sample);
}

inline StepCurve chf_to_survival(const StepCurve& chf) {
  if (!chf.is_chf()) throw Error("not a CHF");
  std::vector<double> values(chf.values().size());
  std::transform(chf.values().begin(), chf.values().end(), values.begin(),
                 [](double h) { return std::exp(-h); });
  return StepCurve(chf.knots(), std::move(values), 1.0);
}

/// Mean remaining lifetime after t0: (1/S(t0)) * integral of S over
/// [t0, horizon]. Exact for step curves; the tail beyond `horizon` is dropped.
inline double expected_future_lifetime(const StepCurve& survival, double t0, double horizon) {
  if (!(t0 >= 0.0) || !(horizon >= t0)) throw Error("invalid horizon");
  const double s0 = survival(t0);
  if (!(s0 > 0.0)) throw Error("zero survival at t0");

  const auto& knots = survival.knots();
  const auto& values = survival.values();
  auto it = std::upper_bound(knots.begin(), knots.end(), t0);
  std::size_t k = static_cast<std::size_t>(it - knots.begin());

  double area = 0.0;
  double from = t0;
  double level = s0;
  for (; k < knots.size() && knots[k] < horizon; ++k) {
    area += level * (knots[k] - from);
    from = knots[k];
    level = values[k];
  }
  area += level * (horizon - from);
  return area / s0;
}

/// Standardized two-sample log-rank statistic |sum(O - E)| / sqrt(sum V).
/// Returns 0 when the variance vanishes.
inline double log_rank_statistic(std::span<const SurvivalRecord> left,
                                 std::span<const SurvivalRecord> right) {
  if (left.empty() || right.empty()) throw Error("empty child");
  detail::require_labeled(left);
  detail::require_labeled(right);

  struct Entry {
    double time;
    bool event;
    bool is_left;
  };
  std::vector<Entry> pooled;
  pooled.reserve(left.size() + right.size());
  for (const auto& r : left) pooled.push_back({r.time, r.observed(), true});
  for (const auto& r : right) pooled.push_back({r.time, r.observed(), false});
  std::sort(pooled.begin(), pooled.end(), [](const Entry& a, const Entry& b) { return a.time < b.time; });

  double at_risk = static_cast<double>(pooled.size());
  double at_risk_left = static_cast<double>(left.size());
  double num = 0.0, var = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    const double t = pooled[i].time;
    double deaths = 0.0, deaths_left = 0.0, leaving = 0.0, leaving_left = 0.0;
    std::size_t j = i;
    for (; j < pooled.size() && pooled[j].time == t; ++j) {
      leaving += 1.0;
      if (pooled[j].is_left) leaving_left += 1.0;
      if (pooled[j].event) {
        deaths += 1.0;
        if (pooled[j].is_left) deaths_left += 1.0;
      }
    }
    if (deaths > 0.0) {
      // O - E written as (d_L n_R - d_R n_L) / n, so swapping sides negates it exactly
      const double at_risk_right = at_risk - at_risk_left;
      num += (deaths_left * at_risk_right - (deaths - deaths_left) * at_risk_left) / at_risk;
      if (at_risk > 1.0)
        var += deaths * (at_risk_left * at_risk_right) / (at_risk * at_risk) * (at_risk - deaths) / (at_risk - 1.0);
    }
    at_risk -= leaving;
    at_risk_left -= leaving_left;
    i = j;
  }
  if (!(var > 0.0)) return 0.0;
  return std::abs(num) / std::sqrt(var);
}

}  // namespace semisurv
