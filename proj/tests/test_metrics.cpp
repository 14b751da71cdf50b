#include <gtest/gtest.h>

#include <random>

#include "mqp/saliency_metrics.hpp"
#include "oracles.hpp"

using namespace mqp;
using namespace mqp::metrics;

namespace {

SaliencyMap map_of(int h, int w, std::initializer_list<double> v) {
  SaliencyMap m(h, w);
  std::copy(v.begin(), v.end(), m.raw().begin());
  return m;
}

BinaryMask mask_of(int h, int w, std::initializer_list<int> v) {
  BinaryMask m(h, w);
  std::transform(v.begin(), v.end(), m.raw().begin(), [](int x) { return static_cast<std::uint8_t>(x); });
  return m;
}

}  // namespace

TEST(Mae, Examples) {
  auto gt = mask_of(2, 2, {1, 0, 0, 1});
  EXPECT_DOUBLE_EQ(mae(to_map(gt), gt), 0.0);
  EXPECT_DOUBLE_EQ(mae(SaliencyMap(3, 3, 1, 0.5), BinaryMask(3, 3)), 0.5);
  EXPECT_DOUBLE_EQ(mae(map_of(2, 2, {1, 0, 0.5, 0.5}), mask_of(2, 2, {1, 0, 0, 1})), 0.25);
}

TEST(Mae, DimensionMismatchRejected) {
  EXPECT_THROW(mae(SaliencyMap(2, 2), BinaryMask(2, 3)), InvalidInput);
}

TEST(Mae, SymmetricForMaps) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    auto a = oracle::random_map(rng, 5, 7), b = oracle::random_map(rng, 5, 7);
    EXPECT_DOUBLE_EQ(mae(a, b), mae(b, a));
  }
}

TEST(FMeasure, PerfectPrediction) {
  auto gt = mask_of(3, 3, {0, 1, 0, 1, 1, 0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(f_measures(to_map(gt), gt).max_f, 1.0);
}

TEST(FMeasure, SeparableThresholdGivesOne) {
  auto gt = mask_of(3, 3, {1, 1, 0, 0, 0, 0, 0, 0, 0});
  auto pred = map_of(3, 3, {0.9, 0.9, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
  EXPECT_DOUBLE_EQ(f_measures(pred, gt).max_f, 1.0);
}

TEST(FMeasure, ComplementMatchesOracle) {
  auto gt = mask_of(4, 4, {1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  SaliencyMap pred(4, 4);
  for (std::size_t i = 0; i < pred.size(); ++i) pred.raw()[i] = 1.0 - gt.raw()[i];
  auto f = f_measures(pred, gt);
  auto o = oracle::f_scores(oracle::to_rows(pred), oracle::to_rows(gt));
  EXPECT_NEAR(f.max_f, o.max_f, 1e-12);
  // only the threshold 0 predicts the foreground: precision 4/16, recall 1
  EXPECT_NEAR(f.max_f, 1.3 * 0.25 / (0.3 * 0.25 + 1.0), 1e-12);
}

TEST(FMeasure, EmptyGtIsUndefined) {
  EXPECT_THROW(f_measures(SaliencyMap(2, 2, 1, 0.3), BinaryMask(2, 2)), UndefinedRecall);
}

TEST(FMeasure, MatchesOracleOnRandomInstances) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    auto p = oracle::random_map(rng, 8, 8);
    auto g = oracle::random_mask(rng, 8, 8);
    if (std::count(g.raw().begin(), g.raw().end(), 1) == 0) continue;
    auto f = f_measures(p, g);
    auto o = oracle::f_scores(oracle::to_rows(p), oracle::to_rows(g));
    EXPECT_NEAR(f.max_f, o.max_f, 1e-9);
    EXPECT_NEAR(f.mean_f, o.mean_f, 1e-9);
    EXPECT_NEAR(f.adp_f, o.adp_f, 1e-9);
  }
}

TEST(FMeasure, OrderingAndRange) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    auto p = oracle::random_map(rng, 6, 6);
    auto g = oracle::random_mask(rng, 6, 6, 0.3);
    if (std::count(g.raw().begin(), g.raw().end(), 1) == 0) continue;
    auto f = f_measures(p, g);
    EXPECT_GE(f.max_f, f.mean_f);
    EXPECT_GE(f.max_f, f.adp_f);
    for (double v : {f.max_f, f.mean_f, f.adp_f}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(SMeasure, PerfectMatch) {
  auto gt = mask_of(3, 3, {0, 1, 0, 1, 1, 0, 0, 0, 0});
  EXPECT_NEAR(s_measure(to_map(gt), gt), 1.0, 1e-12);
}

TEST(SMeasure, EmptyGtEdgeRule) {
  EXPECT_DOUBLE_EQ(s_measure(SaliencyMap(4, 4), BinaryMask(4, 4)), 1.0);
  EXPECT_DOUBLE_EQ(s_measure(SaliencyMap(4, 4, 1, 0.25), BinaryMask(4, 4)), 0.75);
  EXPECT_DOUBLE_EQ(s_measure(SaliencyMap(4, 4, 1, 0.25), BinaryMask(4, 4, 1, 1)), 0.25);
}

TEST(SMeasure, MatchesOracleOnRandomInstances) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 300; ++i) {
    auto p = oracle::random_map(rng, 8, 8);
    auto g = oracle::random_mask(rng, 8, 8, 0.05 + 0.9 * (i % 10) / 10.0);
    EXPECT_NEAR(s_measure(p, g), oracle::s_measure(oracle::to_rows(p), oracle::to_rows(g)), 1e-9);
  }
}

TEST(SMeasure, SelfSimilarityIsOneForMixedMasks) {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 200; ++i) {
    auto g = oracle::random_mask(rng, 7, 5);
    int fg = static_cast<int>(std::count(g.raw().begin(), g.raw().end(), 1));
    if (fg == 0 || fg == 35) continue;
    EXPECT_NEAR(s_measure(to_map(g), g), 1.0, 1e-9);
  }
}

TEST(SMeasure, RangeOnRandomInputs) {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 1000; ++i) {
    auto p = oracle::random_map(rng, 6, 6);
    auto g = oracle::random_mask(rng, 6, 6);
    double s = s_measure(p, g);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Consistency, IdenticalBinaryMapsScoreOne) {
  auto m = to_map(mask_of(2, 3, {1, 0, 0, 1, 1, 0}));
  EXPECT_NEAR(consistency_degree(m, m), 1.0, 1e-12);
}

TEST(Consistency, HalfMapAgainstCheckerboard) {
  SaliencyMap sota(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) sota(y, x) = (x + y) % 2;
  SaliencyMap half(4, 4, 1, 0.5);
  auto ref = binarize(sota, 0.5);
  EXPECT_NEAR(consistency_degree(half, sota), oracle::s_measure(oracle::to_rows(half), oracle::to_rows(ref)), 1e-12);
}

TEST(Consistency, DisjointBlobsBelowOne) {
  SaliencyMap a(5, 5), b(5, 5);
  a(1, 1) = 1.0;
  b(3, 3) = 1.0;
  EXPECT_LT(consistency_degree(a, b), 1.0);
}

TEST(Consistency, DimensionMismatchRejected) {
  EXPECT_THROW(consistency_degree(SaliencyMap(2, 2), SaliencyMap(3, 2)), InvalidInput);
}

TEST(Aggregate, MeansOfPerFrameValues) {
  std::mt19937_64 rng(16);
  std::vector<FrameMetrics> frames;
  for (int i = 0; i < 20; ++i) {
    auto g = oracle::random_mask(rng, 8, 8);
    g(0, 0) = 1;
    frames.push_back(evaluate_frame("f" + std::to_string(i), oracle::random_map(rng, 8, 8), g));
  }
  auto r = aggregate(frames);
  double mf = 0, sm = 0, ma = 0;
  for (const auto& f : frames) {
    mf += f.max_f / 20;
    sm += f.s_measure / 20;
    ma += f.mae / 20;
  }
  EXPECT_EQ(r.frame_count, 20);
  EXPECT_NEAR(r.max_f, mf, 1e-12);
  EXPECT_NEAR(r.s_measure, sm, 1e-12);
  EXPECT_NEAR(r.mae, ma, 1e-12);
  EXPECT_GE(r.max_f, r.mean_f);
}

TEST(Aggregate, EmptyGtFrameScoresZeroF) {
  auto fm = evaluate_frame("x", SaliencyMap(3, 3), BinaryMask(3, 3));
  EXPECT_EQ(fm.max_f, 0.0);
  EXPECT_EQ(fm.s_measure, 1.0);
  EXPECT_EQ(fm.mae, 0.0);
}
