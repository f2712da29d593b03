#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace semisurv;
using oracle::rec;

namespace {

ForestConfig small_config(std::size_t trees = 15, std::uint64_t seed = 21) {
  ForestConfig c;
  c.n_trees = trees;
  c.seed = seed;
  return c;
}

Dataset hide(const Dataset& d) {
  Dataset u = d;
  for (auto& r : u.records) {
    r.status = SupervisionStatus::Unlabeled;
    r.time = 0.0;
  }
  return u;
}

struct Parts {
  Dataset observed, censored, unlabeled;
};

Parts partition(oracle::Engine& g, std::size_t n, std::size_t p, double censor, double hidden) {
  const Dataset all = oracle::random_dataset(g, n, p, censor);
  Parts out{all.empty_like(), all.empty_like(), all.empty_like()};
  std::bernoulli_distribution h(hidden);
  for (std::size_t i = 0; i < all.size(); ++i) {
    SurvivalRecord r = all.records[i];
    if (i > 0 && h(g)) {
      r.status = SupervisionStatus::Unlabeled;
      r.time = 0.0;
      out.unlabeled.records.push_back(r);
    } else {
      (r.observed() ? out.observed : out.censored).records.push_back(r);
    }
  }
  return out;
}

}  // namespace

TEST(Quartile, NearestRank) {
  EXPECT_EQ(first_quartile({0.8, 0.1, 0.5, 0.3, 0.2, 0.7, 0.4, 0.6}), 0.2);
  EXPECT_EQ(first_quartile({4.0}), 4.0);
  EXPECT_EQ(first_quartile({3.0, 1.0, 2.0}), 1.0);
  EXPECT_EQ(first_quartile({5.0, 6.0, 7.0, 8.0, 9.0}), 6.0);
}

TEST(StRsfRule, EightVarianceExample) {
  const std::vector<double> v{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  const double s = first_quartile(v);
  EXPECT_EQ(s, 0.2);
  EXPECT_EQ(st_rsf_quota(8), 1u);
  EXPECT_EQ(st_rsf_admissions(v, s, st_rsf_quota(8)), 1u);
}

TEST(StRsfRule, QuotaAndStrictThreshold) {
  EXPECT_EQ(st_rsf_quota(0), 0u);
  EXPECT_EQ(st_rsf_quota(10), 1u);
  EXPECT_EQ(st_rsf_quota(11), 2u);
  EXPECT_EQ(st_rsf_quota(95), 10u);
  const std::vector<double> equal(6, 0.5);
  EXPECT_EQ(st_rsf_admissions(equal, first_quartile(equal), 3), 0u);
  const std::vector<double> v{0.1, 0.2, 0.3, 0.9};
  EXPECT_EQ(st_rsf_admissions(v, 0.35, 2), 2u);
  EXPECT_EQ(st_rsf_admissions(v, 0.35, 10), 3u);
}

TEST(CctRule, WalkStopsAtFirstViolation) {
  const std::vector<CctCandidate> pool{{false, 0.0, 5.0, 0.1}, {true, 3.0, 4.0, 0.2}, {true, 9.0, 4.0, 1.0}};
  EXPECT_EQ(cct_admissions(pool), 2u);
  const std::vector<CctCandidate> blocked{{true, 9.0, 4.0, 1.0}, {false, 0.0, 5.0, 0.1}};
  EXPECT_EQ(cct_admissions(blocked), 0u);
  const std::vector<CctCandidate> boundary{{true, 6.0, 4.0, 1.0}};
  EXPECT_EQ(cct_admissions(boundary), 1u);
  const std::vector<CctCandidate> unlabeled(5, CctCandidate{false, 0.0, 1.0, 3.0});
  EXPECT_EQ(cct_admissions(unlabeled), 5u);
}

TEST(RsfUd, EmptyUnlabeledMatchesPlainFit) {
  oracle::Engine g(1);
  const Dataset l = oracle::random_dataset(g, 50, 3);
  const Forest a = rsf_plus_ud(l, l.empty_like(), small_config());
  const Forest b = fit(l, small_config());
  EXPECT_TRUE(a.trees == b.trees);
}

TEST(RsfUd, UnlabeledBecomeZeroTimeCensored) {
  oracle::Engine g(2);
  const Dataset l = oracle::random_dataset(g, 40, 3);
  const Dataset u = hide(oracle::random_dataset(g, 10, 3));
  const Forest a = rsf_plus_ud(l, u, small_config());
  Dataset manual = l;
  for (auto r : u.records) {
    r.status = SupervisionStatus::Censored;
    r.time = 0.0;
    manual.records.push_back(r);
  }
  EXPECT_TRUE(a.trees == fit(manual, small_config()).trees);
}

TEST(RsfUd, RejectsWrongStatuses) {
  oracle::Engine g(3);
  const Dataset l = oracle::random_dataset(g, 20, 2);
  EXPECT_THROW(rsf_plus_ud(l, l, small_config()), Error);
  Dataset censored_only = l;
  for (auto& r : censored_only.records) r.status = SupervisionStatus::Censored;
  try {
    rsf_plus_ud(censored_only, l.empty_like(), small_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "no events to fit");
  }
}

TEST(StRsf, EmptyPoolIsPlainFit) {
  oracle::Engine g(4);
  const Dataset l = oracle::random_dataset(g, 50, 3);
  const auto run = st_rsf(l, l.empty_like(), small_config());
  EXPECT_TRUE(run.forest.trees == fit(l, small_config()).trees);
  EXPECT_TRUE(run.state.augmentation_log.empty());
  EXPECT_EQ(run.state.iteration, 1u);
}

TEST(StRsfCct, EmptyPoolIsPlainFit) {
  oracle::Engine g(5);
  Dataset obs = oracle::random_dataset(g, 50, 3, 0.0);
  const auto run = st_rsf_cct(obs, obs.empty_like(), obs.empty_like(), small_config());
  EXPECT_TRUE(run.forest.trees == fit(obs, small_config()).trees);
  EXPECT_TRUE(run.state.augmentation_log.empty());
}

TEST(StRsfCct, AllUnlabeledPoolIsAdmittedInOnePass) {
  oracle::Engine g(6);
  const Dataset obs = oracle::random_dataset(g, 40, 3, 0.0);
  const Dataset u = hide(oracle::random_dataset(g, 25, 3));
  const auto run = st_rsf_cct(obs, obs.empty_like(), u, small_config());
  ASSERT_EQ(run.state.augmentation_log.size(), 1u);
  EXPECT_EQ(run.state.augmentation_log[0].added, 25u);
  EXPECT_TRUE(run.state.pool.empty());
  EXPECT_EQ(run.state.labeled.size(), 65u);
  EXPECT_TRUE(run.forest.trees == fit(run.state.labeled, detail::iteration_config(small_config(), 1)).trees);
}

TEST(StRsf, AdmissionsRespectQuotaAndThreshold) {
  oracle::Engine g(7);
  const Dataset l = oracle::random_dataset(g, 60, 4);
  const Dataset u = hide(oracle::random_dataset(g, 45, 4));
  const auto run = st_rsf(l, u, small_config());
  ASSERT_TRUE(run.state.variance_threshold.has_value());
  for (const auto& step : run.state.augmentation_log) {
    EXPECT_GT(step.added, 0u);
    EXPECT_LE(step.added, st_rsf_quota(45));
  }
  EXPECT_EQ(run.state.total_added() + run.state.pool.size(), 45u);
  for (std::size_t i = 60; i < run.state.labeled.size(); ++i) {
    const auto& r = run.state.labeled.records[i];
    EXPECT_TRUE(r.observed());
    EXPECT_GE(r.time, 0.0);
    EXPECT_TRUE(std::isfinite(r.time));
  }
  // The returned forest was trained on the final labeled set.
  EXPECT_TRUE(run.forest.trees ==
              fit(run.state.labeled, detail::iteration_config(small_config(), run.state.iteration - 1)).trees);
}

TEST(StRsf, FirstIterationMatchesManualStep) {
  oracle::Engine g(8);
  const Dataset l = oracle::random_dataset(g, 50, 3);
  const Dataset u = hide(oracle::random_dataset(g, 30, 3));
  const auto run = st_rsf(l, u, small_config());
  const Forest first = fit(l, small_config());
  std::vector<double> variances;
  for (const auto& r : u.records) variances.push_back(predict_with_variance(first, r.features).variance);
  EXPECT_EQ(*run.state.variance_threshold, first_quartile(variances));
  std::sort(variances.begin(), variances.end());
  const std::size_t expected = st_rsf_admissions(variances, first_quartile(variances), st_rsf_quota(30));
  if (expected == 0) {
    EXPECT_TRUE(run.state.augmentation_log.empty());
  } else {
    ASSERT_FALSE(run.state.augmentation_log.empty());
    EXPECT_EQ(run.state.augmentation_log[0].iteration, 1u);
    EXPECT_EQ(run.state.augmentation_log[0].added, expected);
  }
}

TEST(SelfTraining, TerminationAndConservation) {
  oracle::Engine g(9);
  for (int trial = 0; trial < 30; ++trial) {
    const Parts parts = partition(g, 30 + trial % 20, 2 + trial % 3, 0.4, 0.5);
    const ForestConfig c = small_config(5, 100 + static_cast<std::uint64_t>(trial));

    const Dataset labeled = detail::concat(parts.observed, parts.censored);
    const auto a = st_rsf(labeled, parts.unlabeled, c);
    ASSERT_LE(a.state.iteration, parts.unlabeled.size() + 1);
    ASSERT_EQ(a.state.labeled.size() + a.state.pool.size(), labeled.size() + parts.unlabeled.size());
    ASSERT_EQ(a.state.total_added(), parts.unlabeled.size() - a.state.pool.size());

    const std::size_t pool = parts.censored.size() + parts.unlabeled.size();
    const auto b = st_rsf_cct(parts.observed, parts.censored, parts.unlabeled, c);
    ASSERT_LE(b.state.iteration, pool + 1);
    ASSERT_EQ(b.state.labeled.size() + b.state.pool.size(), parts.observed.size() + pool);
    ASSERT_EQ(b.state.total_added(), pool - b.state.pool.size());
    for (const auto& r : b.state.labeled.records) ASSERT_TRUE(r.observed());
  }
}

TEST(SelfTraining, Deterministic) {
  oracle::Engine g(10);
  const Parts parts = partition(g, 60, 3, 0.4, 0.5);
  const auto a = st_rsf_cct(parts.observed, parts.censored, parts.unlabeled, small_config(), 1);
  const auto b = st_rsf_cct(parts.observed, parts.censored, parts.unlabeled, small_config(), 3);
  EXPECT_TRUE(a.forest.trees == b.forest.trees);
  EXPECT_EQ(a.state.labeled.records, b.state.labeled.records);
}

TEST(SelfTraining, StatusPreconditions) {
  oracle::Engine g(11);
  const Parts parts = partition(g, 40, 3, 0.4, 0.3);
  EXPECT_THROW(st_rsf_cct(parts.censored, parts.censored, parts.unlabeled, small_config()), Error);
  EXPECT_THROW(st_rsf(detail::concat(parts.observed, parts.censored), parts.observed, small_config()), Error);
}
