#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "brute_metrics.hpp"
#include "json.hpp"
#include "patchad/data.hpp"
#include "patchad/metrics.hpp"
#include "patchad/scoring.hpp"

namespace patchad {
namespace {

TEST(PointAdjustTest, Examples) {
  const Binary gt{0, 1, 1, 1, 0, 1};
  EXPECT_EQ(point_adjust({0, 0, 1, 0, 0, 0}, gt), (Binary{0, 1, 1, 1, 0, 0}));
  EXPECT_EQ(point_adjust(Binary(6, 0), gt), Binary(6, 0));
  EXPECT_EQ(point_adjust(gt, gt), gt);
  EXPECT_THROW(point_adjust({0, 1}, gt), ContractError);
}

TEST(PrfTest, Examples) {
  const Binary gt{0, 1, 1, 1, 0, 1};
  const Prf r = prf({0, 1, 1, 1, 0, 0}, gt);
  EXPECT_EQ(r.counts.tp, 3u);
  EXPECT_EQ(r.counts.fp, 0u);
  EXPECT_EQ(r.counts.fn, 1u);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 0.75);
  EXPECT_NEAR(r.f1, 6.0 / 7.0, 1e-15);
  EXPECT_NEAR(r.f1, 0.8571, 1e-4);
  const Prf same = prf(gt, gt);
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.recall, 1.0);
  EXPECT_EQ(same.f1, 1.0);
  EXPECT_EQ(same.acc, 1.0);
  Binary inv(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) inv[i] = 1 - gt[i];
  const Prf bad = prf(inv, gt);
  EXPECT_EQ(bad.precision, 0.0);
  EXPECT_EQ(bad.recall, 0.0);
  EXPECT_EQ(bad.f1, 0.0);
  const Prf none = prf(Binary(4, 0), Binary(4, 0));
  EXPECT_EQ(none.f1, 0.0);
}

TEST(RocAucTest, Examples) {
  EXPECT_EQ(roc_auc({0.1, 0.9}, {0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(roc_auc({0.3, 0.3, 0.3}, {0, 1, 0}), 0.5);
  EXPECT_THROW(roc_auc({0.1, 0.2}, {1, 1}), MetricUndefined);
}

TEST(RocAucTest, MatchesPairCountingAndMonotoneInvariance) {
  std::mt19937_64 g(1);
  std::uniform_int_distribution<int> coin(0, 3), lvl(0, 20);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> s(150);
    Binary gt(150);
    for (std::size_t i = 0; i < 150; ++i) {
      gt[i] = coin(g) == 0;
      s[i] = lvl(g) / 20.0 + 0.3 * gt[i];  // plenty of ties
    }
    gt[0] = 1;
    gt[1] = 0;
    const double a = roc_auc(s, gt);
    EXPECT_NEAR(a, brute::auc_pairs(s, gt), 1e-12);
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    EXPECT_NEAR(roc_auc(t, gt), a, 1e-12);
  }
}

TEST(PaDominanceTest, RandomPairs) {
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 5 + g() % 100;
    const double pg = u(g) * 0.5, pp = u(g) * 0.5;
    Binary gt(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gt[i] = u(g) < pg;
      pred[i] = u(g) < pp;
    }
    const Binary adj = point_adjust(pred, gt);
    EXPECT_EQ(point_adjust(adj, gt), adj);
    EXPECT_EQ(adj, brute::point_adjust(pred, gt));
    EXPECT_GE(prf(adj, gt).f1, prf(pred, gt).f1);
    // monotone: adding a prediction never removes adjusted ones
    Binary more = pred;
    more[g() % n] = 1;
    const Binary adj2 = point_adjust(more, gt);
    for (std::size_t i = 0; i < n; ++i) EXPECT_GE(adj2[i], adj[i]);
  }
}

TEST(EventsTest, Runs) {
  const auto ev = to_events({1, 1, 0, 0, 1, 0, 1});
  ASSERT_EQ(ev.size(), 3u);
  EXPECT_EQ(ev[0], (Event{0, 2}));
  EXPECT_EQ(ev[2], (Event{6, 7}));
}

Binary from_events(std::size_t n, std::initializer_list<std::pair<std::size_t, std::size_t>> spans) {
  Binary b(n, 0);
  for (auto [lo, hi] : spans) {
    for (std::size_t i = lo; i < hi; ++i) b[i] = 1;
  }
  return b;
}

TEST(AffiliationTest, ExactMatchIsOne) {
  const Binary gt = from_events(50, {{5, 9}, {20, 21}, {30, 45}});
  const auto a = affiliation_metrics(to_events(gt), to_events(gt), 50);
  EXPECT_NEAR(*a.precision, 1.0, 1e-12);
  EXPECT_NEAR(a.recall, 1.0, 1e-12);
  EXPECT_NEAR(*a.f1, 1.0, 1e-12);
}

TEST(AffiliationTest, SingleEventInstanceMatchesBruteForce) {
  const Binary gt = from_events(30, {{10, 20}});
  const Binary pred = from_events(30, {{0, 1}});
  const auto a = affiliation_metrics(to_events(pred), to_events(gt), 30);
  const auto b = brute::affiliation(pred, gt);
  ASSERT_TRUE(a.precision.has_value());
  EXPECT_NEAR(*a.precision, *b.precision, 1e-12);
  EXPECT_NEAR(a.recall, b.recall, 1e-12);
  // closed form: x in [0,1) sits at distance 10-x; the far set is [0,x] and [30-x,30]
  EXPECT_NEAR(*a.precision, 1.0 / 30.0, 1e-12);
}

TEST(AffiliationTest, RandomInstancesMatchBruteForce) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 20 + g() % 80;
    Binary gt(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gt[i] = u(g) < 0.15;
      pred[i] = u(g) < 0.1;
    }
    gt[n / 2] = 1;
    const auto a = affiliation_metrics(to_events(pred), to_events(gt), n);
    const auto b = brute::affiliation(pred, gt);
    EXPECT_EQ(a.precision.has_value(), b.precision.has_value());
    if (a.precision) EXPECT_NEAR(*a.precision, *b.precision, 1e-9) << rep;
    EXPECT_NEAR(a.recall, b.recall, 1e-9) << rep;
  }
}

TEST(AffiliationTest, PrecisionMonotoneAsPredictionApproaches) {
  const Binary gt = from_events(60, {{30, 35}});
  double prev = -1.0;
  for (std::size_t start = 0; start + 2 <= 30; ++start) {
    const Binary pred = from_events(60, {{start, start + 2}});
    const double p = *affiliation_metrics(to_events(pred), to_events(gt), 60).precision;
    EXPECT_GE(p, prev - 1e-12) << start;
    prev = p;
  }
}

TEST(AffiliationTest, UndefinedCases) {
  EXPECT_THROW(affiliation_metrics({{1, 2}}, {}, 10), MetricUndefined);
  const auto a = affiliation_metrics({}, {{3, 5}}, 10);
  EXPECT_FALSE(a.precision.has_value());
  EXPECT_EQ(a.recall, 0.0);
  EXPECT_FALSE(a.f1.has_value());
}

TEST(RangeSmoothTest, Examples) {
  const Binary gt = from_events(12, {{5, 7}});
  const auto same = range_smooth_labels(gt, 0);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(same[i], gt[i]);
  const auto r = range_smooth_labels(gt, 2);
  const std::vector<double> expected{0, 0, 0, 0.5, 1, 1, 1, 1, 0.5, 0, 0, 0};
  EXPECT_EQ(r, expected);
  const auto r3 = range_smooth_labels(from_events(12, {{2, 3}, {6, 7}}), 3);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_GE(r3[i], i == 2 || i == 6 ? 1.0 : 0.0);
  EXPECT_DOUBLE_EQ(r3[4], 1.0 - 1.0 / 3.0);  // max of two ramps
}

TEST(VusTest, ZeroSliceEqualsAuc) {
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> u;
  std::vector<double> s(300);
  Binary gt(300);
  for (std::size_t i = 0; i < 300; ++i) {
    gt[i] = (i / 20) % 4 == 1;
    s[i] = u(g) + 0.4 * gt[i];
  }
  const Vus v = vus(s, gt, 0);
  EXPECT_NEAR(v.roc, roc_auc(s, gt), 1e-12);
  EXPECT_NEAR(v.pr, brute::pr_auc_binary(s, gt), 1e-12);
  EXPECT_EQ(default_vus_l_max(gt), 80u);
}

TEST(VusTest, RandomScoresNearHalf) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u;
  std::vector<double> s(10000);
  Binary gt(10000);
  for (std::size_t i = 0; i < 10000; ++i) {
    gt[i] = (i / 50) % 2;
    s[i] = u(g);
  }
  const Vus v = vus(s, gt, 20);
  EXPECT_NEAR(v.roc, 0.5, 0.05);
}

TEST(VusTest, DefaultLMaxIsCapped) {
  Binary gt(2000, 0);
  for (std::size_t i = 100; i < 1000; ++i) gt[i] = 1;
  EXPECT_EQ(default_vus_l_max(gt), 250u);
  EXPECT_EQ(default_vus_l_max(from_events(40, {{2, 4}, {10, 13}})), 10u);
}

TEST(EvaluateTest, PerfectDetector) {
  const Binary gt = from_events(200, {{40, 42}});
  std::vector<double> s(200, 0.1);
  s[40] = s[41] = 0.9;
  EvalOptions o;
  o.vus_l_max = 0;
  const EvalReport r = evaluate(s, gt, o);
  for (auto v : {r.acc, r.precision, r.recall, r.pa_f1, r.f1_cls, r.auc, r.aff_precision, r.aff_recall, r.aff_f1,
                 r.vus_roc, r.vus_pr}) {
    ASSERT_TRUE(v.has_value());
    EXPECT_NEAR(*v, 1.0, 1e-12);
  }
  EXPECT_TRUE(r.gaps.empty());
}

TEST(EvaluateTest, InvertedDetector) {
  const Binary gt = from_events(200, {{40, 42}});
  std::vector<double> s(200, 0.9);
  s[40] = s[41] = 0.1;
  s[7] = 1.0;
  const EvalReport r = evaluate(s, gt);
  EXPECT_EQ(*r.pa_f1, 0.0);
  EXPECT_EQ(*r.f1_cls, 0.0);
}

TEST(EvaluateTest, SingleClassLeavesLabelledGaps) {
  std::vector<double> s{0.1, 0.5, 0.2, 0.7};
  const EvalReport r = evaluate(s, Binary(4, 0));
  EXPECT_FALSE(r.auc.has_value());
  EXPECT_TRUE(r.gaps.count("auc"));
  EXPECT_TRUE(r.gaps.count("vus_roc"));
  EXPECT_TRUE(r.gaps.count("aff_recall"));
  EXPECT_TRUE(r.pa_f1.has_value());
}

TEST(EvaluateTest, FieldsInUnitInterval) {
  std::mt19937_64 g(6);
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> s(400);
    Binary gt(400);
    for (std::size_t i = 0; i < 400; ++i) {
      gt[i] = (i / 25) % 5 == 2;
      s[i] = u(g) + 0.2 * gt[i];
    }
    EvalOptions o;
    o.sigma = 1.0 + rep;
    const EvalReport r = evaluate(s, gt, o);
    for (auto v : {r.acc, r.precision, r.recall, r.pa_f1, r.f1_cls, r.auc, r.aff_precision, r.aff_recall,
                   r.aff_f1, r.vus_roc, r.vus_pr}) {
      if (!v) continue;
      EXPECT_GE(*v, 0.0);
      EXPECT_LE(*v, 1.0 + 1e-12);
    }
    EXPECT_GE(*r.pa_f1, *r.f1_cls);
  }
}

struct Fixture {
  std::vector<double> scores;
  Binary gt;
};

Fixture load_fixture() {
  const std::string dir = PATCHAD_FIXTURE_DIR;
  Fixture f;
  f.scores = load_scores(dir + "/metrics_200_scores.csv").scores;
  f.gt = *load_csv(dir + "/metrics_200_labels.csv", std::string("label")).labels;
  return f;
}

TEST(FixtureTest, MatchesBruteForceEvaluator) {
  const Fixture f = load_fixture();
  ASSERT_EQ(f.scores.size(), 200u);
  const auto th = threshold_by_ratio(f.scores, 5.0);
  const Binary adj = point_adjust(th.flags, f.gt);
  EXPECT_EQ(adj, brute::point_adjust(th.flags, f.gt));
  EvalOptions o;
  o.sigma = 5.0;
  const EvalReport r = evaluate(f.scores, f.gt, o);
  EXPECT_EQ(*r.pa_f1, brute::f1(brute::point_adjust(th.flags, f.gt), f.gt));
  EXPECT_EQ(*r.f1_cls, brute::f1(th.flags, f.gt));
  EXPECT_NEAR(*r.auc, brute::auc_pairs(f.scores, f.gt), 1e-9);
  const auto aff = brute::affiliation(th.flags, f.gt);
  const double bf1 = 2 * *aff.precision * aff.recall / (*aff.precision + aff.recall);
  EXPECT_NEAR(*r.aff_f1, bf1, 1e-9);
  const Vus v0 = vus(f.scores, f.gt, 0);
  EXPECT_NEAR(v0.roc, brute::auc_pairs(f.scores, f.gt), 1e-9);
  EXPECT_NEAR(v0.pr, brute::pr_auc_binary(f.scores, f.gt), 1e-9);
}

TEST(FixtureTest, MatchesCommittedOracleReport) {
  const Fixture f = load_fixture();
  std::ifstream in(std::string(PATCHAD_FIXTURE_DIR) + "/metrics_200_expected_sigma5.json");
  ASSERT_TRUE(in.good());
  const auto j = nlohmann::json::parse(in);
  EvalOptions o;
  o.sigma = 5.0;
  const EvalReport r = evaluate(f.scores, f.gt, o);
  const std::pair<const char*, std::optional<double>> fields[] = {
      {"threshold", r.threshold}, {"acc", r.acc},          {"precision", r.precision},
      {"recall", r.recall},       {"pa_f1", r.pa_f1},      {"f1_cls", r.f1_cls},
      {"auc", r.auc},             {"aff_precision", r.aff_precision}, {"aff_recall", r.aff_recall},
      {"aff_f1", r.aff_f1},       {"vus_roc", r.vus_roc},  {"vus_pr", r.vus_pr}};
  for (const auto& [k, v] : fields) {
    ASSERT_TRUE(v.has_value()) << k;
    // oracle values carry 12 significant digits
    EXPECT_NEAR(*v, j.at(k).get<double>(), 1e-11) << k;
  }
  EXPECT_EQ(r.vus_l_max, j.at("vus_l_max").get<std::size_t>());
  EXPECT_EQ(r.raw.tp, j["counts"]["raw"]["tp"].get<std::size_t>());
  EXPECT_EQ(r.adjusted.fn, j["counts"]["adjusted"]["fn"].get<std::size_t>());
}

}  // namespace
}  // namespace patchad
