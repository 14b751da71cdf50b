#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>

#include "mqp/motion_quality.hpp"
#include "mqp/saliency_metrics.hpp"
#include "mqp/theta.hpp"
#include "oracles.hpp"

using namespace mqp;
using namespace mqp::quality;
namespace fs = std::filesystem;

namespace {

BinaryMask square_mask(int n, int a, int b) {
  BinaryMask m(n, n);
  for (int y = a; y < b; ++y)
    for (int x = a; x < b; ++x) m(y, x) = 1;
  return m;
}

class LookupBackend final : public theta::SaliencyBackend {
 public:
  std::map<std::string, SaliencyMap> maps;
  SaliencyMap predict(const RgbImage&, const std::string& id) override {
    auto it = maps.find(id);
    if (it == maps.end()) throw IntegrationError("stub has no map");
    return it->second;
  }
  std::string name() const override { return "lookup"; }
};

}  // namespace

TEST(Mqs, PerfectFlowSaliency) {
  auto gt = square_mask(8, 2, 5);
  RgbImage rgb(8, 8, 3, 1.0);
  EXPECT_NEAR(compute_mqs(rgb, gt, [&](const RgbImage&) { return to_map(gt); }), 1.0, 1e-12);
}

TEST(Mqs, ComplementAndConstantMatchOracle) {
  auto gt = square_mask(8, 2, 5);
  RgbImage rgb(8, 8, 3, 1.0);
  SaliencyMap inv(8, 8), half(8, 8, 1, 0.5);
  for (std::size_t i = 0; i < inv.size(); ++i) inv.raw()[i] = 1.0 - gt.raw()[i];
  double a = compute_mqs(rgb, gt, [&](const RgbImage&) { return inv; });
  double b = compute_mqs(rgb, gt, [&](const RgbImage&) { return half; });
  EXPECT_NEAR(a, oracle::s_measure(oracle::to_rows(inv), oracle::to_rows(gt)), 1e-12);
  EXPECT_NEAR(b, oracle::s_measure(oracle::to_rows(half), oracle::to_rows(gt)), 1e-12);
  EXPECT_LT(a, 1.0);
}

TEST(Mqs, ThetaDimensionMismatchIsIntegrationError) {
  auto gt = square_mask(8, 2, 5);
  RgbImage rgb(8, 8, 3, 1.0);
  EXPECT_THROW(compute_mqs(rgb, gt, [](const RgbImage&) { return SaliencyMap(4, 4); }), IntegrationError);
}

TEST(FitThreshold, FourValueExample) {
  std::vector<double> v{0.2, 0.4, 0.6, 0.8};
  auto fit = fit_threshold(v);
  EXPECT_DOUBLE_EQ(fit.lam, 0.5);
  EXPECT_DOUBLE_EQ(fit.omega, 0.7);
  EXPECT_TRUE(fit.fallback_used);
  EXPECT_EQ(fit.fallback_reason, "empty_upper_set");
  EXPECT_EQ(fit.iterations, 0);
  EXPECT_FALSE(fit.degenerate);
}

TEST(FitThreshold, ConstantValuesAreDegenerate) {
  std::vector<double> v(6, 0.5);
  auto fit = fit_threshold(v);
  EXPECT_DOUBLE_EQ(fit.lam, 0.5);
  EXPECT_TRUE(fit.fallback_used);
  EXPECT_NE(fit.fallback_reason.find("class_balance"), std::string::npos);
  EXPECT_TRUE(fit.degenerate);
  std::vector<QualityRecord> recs;
  for (double m : v) recs.push_back({"f", m, 0, {}});
  for (const auto& r : assign_labels(recs, fit)) EXPECT_EQ(r.label, 1);
}

TEST(FitThreshold, EmptyListRejected) {
  EXPECT_THROW(fit_threshold(std::vector<double>{}), InvalidInput);
}

TEST(FitThreshold, MatchesBruteForceOracle) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> size(1, 300);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(size(rng));
    double lo = u(rng), hi = lo + (1.0 - lo) * u(rng);
    for (double& x : v) x = lo + (hi - lo) * u(rng);
    auto fit = fit_threshold(v);
    auto o = oracle::threshold(v);
    EXPECT_EQ(fit.lam, o.lam);
    EXPECT_EQ(fit.iterations, o.iterations);
    EXPECT_EQ(fit.converged, o.converged);
    EXPECT_EQ(fit.trace, o.trace);
    for (std::size_t i = 1; i < fit.trace.size(); ++i) EXPECT_GE(fit.trace[i], fit.trace[i - 1]);
  }
}

TEST(FitThreshold, PermutationInvariant) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(40);
    for (double& x : v) x = u(rng);
    auto a = fit_threshold(v);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(fit_threshold(v).lam, a.lam);
  }
}

TEST(AssignLabels, BoundaryAndExamples) {
  ThresholdFit fit;
  fit.lam = 0.5;
  std::vector<QualityRecord> recs{{"a", 0.3, 0, {}}, {"b", 0.5, 0, {}}};
  auto out = assign_labels(recs, fit);
  EXPECT_EQ(out[0].label, 0);
  EXPECT_EQ(out[1].label, 1);

  std::vector<QualityRecord> four;
  for (double m : {0.2, 0.4, 0.6, 0.8}) four.push_back({"x", m, 0, {}});
  auto labels = assign_labels(four, fit_threshold(std::vector<double>{0.2, 0.4, 0.6, 0.8}));
  EXPECT_EQ(labels[0].label, 0);
  EXPECT_EQ(labels[1].label, 0);
  EXPECT_EQ(labels[2].label, 1);
  EXPECT_EQ(labels[3].label, 1);
}

TEST(AssignLabels, PositiveMeanExceedsNegativeMean) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(30);
    std::vector<QualityRecord> recs;
    for (double& x : v) {
      x = u(rng);
      recs.push_back({"f", x, 0, {}});
    }
    auto fit = fit_threshold(v);
    if (fit.fallback_reason.find("class_balance") != std::string::npos) continue;
    double pos = 0, neg = 0;
    int np = 0, nn = 0;
    for (const auto& r : assign_labels(recs, fit)) {
      (r.label ? pos : neg) += r.mqs;
      (r.label ? np : nn) += 1;
    }
    if (np && nn) EXPECT_GT(pos / np, neg / nn);
  }
}

// Adding frames below the final threshold should not change which of the
// original frames are labeled high quality. This is a probe: violations are
// reported, not asserted.
TEST(AssignLabels, LowScoreAdditionProbe) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int counterexamples = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(20);
    for (double& x : v) x = u(rng);
    auto fit = fit_threshold(v);
    std::vector<double> w = v;
    for (int k = 0; k < 5; ++k) w.push_back(fit.lam * u(rng));
    auto fit2 = fit_threshold(w);
    bool superset = true;
    for (double x : v)
      if (x >= fit.lam && x < fit2.lam) superset = false;
    counterexamples += !superset;
  }
  RecordProperty("counterexamples", counterexamples);
  std::cout << "low-score addition probe: " << counterexamples << " of 200 corpora changed labels\n";
}

TEST(Trainset, FourFrameCorpusSplitsByFittedThreshold) {
  LookupBackend theta;
  std::vector<AnnotatedFlowFrame> frames;
  auto gt = square_mask(8, 2, 6);
  std::vector<SaliencyMap> outputs{to_map(gt), SaliencyMap(8, 8, 1, 0.5), SaliencyMap(8, 8, 1, 0.1),
                                   SaliencyMap(8, 8)};
  for (int y = 3; y < 5; ++y)
    for (int x = 0; x < 8; ++x) outputs[2](y, x) = 0.9;
  std::vector<double> expected;
  for (int i = 0; i < 4; ++i) {
    std::string id = "s/" + std::to_string(i);
    theta.maps[id] = outputs[i];
    flow::FlowField f(8, 8);
    f.u(0, 0) = 1.0f;
    frames.push_back({id, f, gt});
    expected.push_back(oracle::s_measure(oracle::to_rows(outputs[i]), oracle::to_rows(gt)));
  }
  auto ts = build_mqpm_trainset(frames, theta);
  auto o = oracle::threshold(expected);
  ASSERT_EQ(ts.samples.size(), 4u);
  int pos = 0;
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(ts.records[i].mqs, expected[i], 1e-12);
    EXPECT_EQ(ts.samples[i].label, expected[i] >= o.lam ? 1 : 0);
    pos += ts.samples[i].label;
  }
  EXPECT_EQ(ts.positives, pos);
  EXPECT_EQ(ts.negatives, 4 - pos);
  EXPECT_GT(pos, 0);
  EXPECT_LT(pos, 4);
}

TEST(Trainset, SingleFrameIsDegenerateButAllPositive) {
  LookupBackend theta;
  auto gt = square_mask(8, 2, 6);
  theta.maps["s/0"] = to_map(gt);
  flow::FlowField f(8, 8);
  auto ts = build_mqpm_trainset({{"s/0", f, gt}}, theta);
  EXPECT_EQ(ts.positives, 1);
  EXPECT_FALSE(ts.warnings.empty());
  EXPECT_TRUE(ts.fit.degenerate);
}

TEST(Trainset, ThetaFailureNamesFrame) {
  LookupBackend theta;
  auto gt = square_mask(8, 2, 6);
  flow::FlowField f(8, 8);
  try {
    build_mqpm_trainset({{"seq/00042", f, gt}}, theta);
    FAIL();
  } catch (const IntegrationError& e) {
    EXPECT_NE(std::string(e.what()).find("seq/00042"), std::string::npos);
  }
}

TEST(Trainset, RecordsAndFitRoundTrip) {
  auto dir = fs::temp_directory_path() / "mqp_records_test";
  std::vector<QualityRecord> recs{{"a/0", 0.123456789012345678, 0, {}}, {"a/1", 0.9, 1, {}}};
  write_records(dir / "r.tsv", recs);
  auto back = read_records(dir / "r.tsv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].frame_id, "a/0");
  EXPECT_EQ(back[0].mqs, recs[0].mqs);
  EXPECT_EQ(back[1].label, 1);

  auto fit = fit_threshold(std::vector<double>{0.2, 0.4, 0.6, 0.8});
  write_fit_summary(dir / "fit.json", fit, 2, 2);
  auto f2 = read_fit_summary(dir / "fit.json");
  EXPECT_EQ(f2.lam, fit.lam);
  EXPECT_EQ(f2.fallback_reason, fit.fallback_reason);
  EXPECT_EQ(f2.trace, fit.trace);
  fs::remove_all(dir);
}

TEST(Theta, ContrastSaliencyHighlightsOddPatch) {
  RgbImage img(16, 16, 3, 1.0);
  for (int y = 5; y < 10; ++y)
    for (int x = 5; x < 10; ++x) img(y, x, 0) = img(y, x, 1) = 0.0;
  auto s = theta::contrast_saliency(img);
  EXPECT_GT(s(7, 7), 0.9);
  EXPECT_LT(s(0, 0), 0.2);
  auto flat = theta::contrast_saliency(RgbImage(4, 4, 3, 0.3));
  for (double v : flat.raw()) EXPECT_EQ(v, 0.0);
}
