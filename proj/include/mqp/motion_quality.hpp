#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mqp/flow_io.hpp"
#include "mqp/grid.hpp"
#include "mqp/theta.hpp"

namespace mqp::quality {

struct QualityRecord {
  std::string frame_id;
  double mqs = 0.0;
  int label = 0;  // 1: high-quality motion, 0: low-quality motion
  SaliencyMap flow_saliency;  // empty when loaded from a records file
};

struct ThresholdFit {
  double lam = 0.0;
  double omega = 0.0;
  int iterations = 0;
  bool converged = false;
  bool fallback_used = false;
  // "none", "empty_upper_set", "class_balance" or both joined with '+'
  std::string fallback_reason = "none";
  // every lambda the iteration accepted, starting with the mean
  std::vector<double> trace;
  // true when the final labeling still leaves one class empty
  bool degenerate = false;
};

inline constexpr double kDefaultTol = 1e-4;
inline constexpr int kDefaultMaxIter = 100;

/// Structure-measure agreement between Θ(flow rendering) and the mask.
/// Throws IntegrationError when Θ returns a map of different size.
double compute_mqs(const flow::FlowRgb& flow_rgb, const BinaryMask& gt, const theta::ThetaFn& theta);

/// Balancing threshold by fixed-point iteration: start at the mean, then
/// lam <- (1 + mean{m : m >= lam}) / 2. Stops on |Δ| < tol, max_iter, or when
/// the next lam would leave no score above it (keeps the last valid lam).
/// If the final split leaves a class empty, falls back to the median.
/// Throws InvalidInput on an empty list. Independent of input order.
ThresholdFit fit_threshold(std::span<const double> mqs_values, double tol = kDefaultTol,
                           int max_iter = kDefaultMaxIter);

/// label = 0 if mqs < lam, else 1.
std::vector<QualityRecord> assign_labels(std::vector<QualityRecord> records, const ThresholdFit& fit);

/// Per-frame inputs of the annotated training split.
struct AnnotatedFlowFrame {
  std::string frame_id;
  flow::FlowField flow;
  BinaryMask gt;
};

struct MqpmSample {
  std::string frame_id;
  flow::FlowRgb input;
  BinaryMask gt;
  int label = 0;
};

struct MqpmTrainset {
  std::vector<MqpmSample> samples;
  std::vector<QualityRecord> records;
  ThresholdFit fit;
  int positives = 0;
  int negatives = 0;
  std::vector<std::string> warnings;
};

struct TrainsetOptions {
  std::optional<double> flow_max_magnitude;  // empty: per-frame normalization
  double tol = kDefaultTol;
  int max_iter = kDefaultMaxIter;
};

/// Scores every frame, fits lambda once over the corpus and labels all frames.
/// Θ failures are rethrown as IntegrationError naming the frame.
MqpmTrainset build_mqpm_trainset(const std::vector<AnnotatedFlowFrame>& frames,
                                 theta::SaliencyBackend& theta, const TrainsetOptions& options = {});

// Records file: one "frame_id<TAB>mqs<TAB>label" line per frame.
void write_records(const std::filesystem::path& path, const std::vector<QualityRecord>& records);
std::vector<QualityRecord> read_records(const std::filesystem::path& path);

void write_fit_summary(const std::filesystem::path& path, const ThresholdFit& fit, int positives,
                       int negatives);
ThresholdFit read_fit_summary(const std::filesystem::path& path);

}  // namespace mqp::quality
