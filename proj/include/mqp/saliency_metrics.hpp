#pragma once

#include <array>
#include <string>
#include <vector>

#include "mqp/grid.hpp"

/// Saliency evaluation: MAE, the F-measure family, S-measure and the
/// consistency degree used to rank candidate frames.
///
/// Maps are compared on their 8-bit levels round(255·v) so that every
/// binarization the adaptive threshold can produce is also visited by the
/// 256-step sweep; this keeps max_f >= adp_f on every input.
namespace mqp::metrics {

inline constexpr int kThresholds = 256;
inline constexpr double kBetaSquared = 0.3;

using FCurve = std::array<double, kThresholds>;

struct FScores {
  double max_f = 0.0;
  double mean_f = 0.0;
  double adp_f = 0.0;
};

/// Mean absolute per-pixel error.
double mae(const SaliencyMap& pred, const BinaryMask& gt);
double mae(const SaliencyMap& a, const SaliencyMap& b);

/// F_beta at thresholds k/255, k = 0..255 (foreground iff level >= k).
/// Throws UndefinedRecall when gt has no foreground pixel.
FCurve f_curve(const SaliencyMap& pred, const BinaryMask& gt);
FScores f_measures(const SaliencyMap& pred, const BinaryMask& gt);

/// Adaptive threshold min(1, 2·mean(pred)).
double adaptive_threshold(const SaliencyMap& pred);

/// Structure measure, alpha = 0.5 blend of object- and region-aware terms.
/// Empty gt scores 1 - mean(pred); full gt scores mean(pred).
double s_measure(const SaliencyMap& pred, const BinaryMask& gt);

/// S-measure of the motion map against the target map binarized at 0.5.
double consistency_degree(const SaliencyMap& motion_map, const SaliencyMap& sota_map);

struct FrameMetrics {
  std::string frame_id;
  double max_f = 0.0;
  double mean_f = 0.0;
  double adp_f = 0.0;
  double s_measure = 0.0;
  double mae = 0.0;
  FCurve curve{};
};

struct MetricsReport {
  double max_f = 0.0;
  double mean_f = 0.0;
  double adp_f = 0.0;
  double s_measure = 0.0;
  double mae = 0.0;
  // max over thresholds of the frame-averaged F curve (benchmark-toolkit style)
  double curve_max_f = 0.0;
  int frame_count = 0;
  std::vector<FrameMetrics> per_frame;
  std::vector<std::string> missing;
};

/// Scores one frame. Frames with an all-background mask get F values of 0
/// (recall undefined) and are otherwise scored normally.
FrameMetrics evaluate_frame(std::string frame_id, const SaliencyMap& pred, const BinaryMask& gt);

/// Dataset aggregates are arithmetic means of the per-frame values.
MetricsReport aggregate(std::vector<FrameMetrics> per_frame);

}  // namespace mqp::metrics
