#include "mqp/saliency_metrics.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

namespace mqp::metrics {
namespace {

constexpr double kEps = DBL_EPSILON;

int level_of(double v) { return static_cast<int>(std::lround(v * 255.0)); }

double f_beta(double tp, double predicted, double positives) {
  if (tp == 0.0) return 0.0;
  double precision = tp / predicted;
  double recall = tp / positives;
  return (1.0 + kBetaSquared) * precision * recall / (kBetaSquared * precision + recall);
}

struct LevelHistogram {
  std::array<double, kThresholds> fg{};
  std::array<double, kThresholds> all{};
  double positives = 0.0;
};

LevelHistogram histogram(const SaliencyMap& pred, const BinaryMask& gt) {
  LevelHistogram h;
  auto p = pred.values();
  auto g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    int lv = level_of(p[i]);
    h.all[lv] += 1.0;
    if (g[i]) {
      h.fg[lv] += 1.0;
      h.positives += 1.0;
    }
  }
  return h;
}

// F value for the binarization "level >= k", from the histogram tail sums.
FCurve curve_from(const LevelHistogram& h) {
  FCurve curve{};
  double tp = 0.0, predicted = 0.0;
  for (int k = kThresholds - 1; k >= 0; --k) {
    tp += h.fg[k];
    predicted += h.all[k];
    curve[k] = f_beta(tp, predicted, h.positives);
  }
  return curve;
}

void check_pair(const SaliencyMap& pred, const BinaryMask& gt, const char* what) {
  require_same_dims(pred, gt, what);
  validate_map(pred);
  validate_mask(gt);
}

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1) deviation, 0 for n < 2
  double count = 0.0;
};

double object_score(const Moments& m) {
  return 2.0 * m.mean / (m.mean * m.mean + 1.0 + m.stddev + kEps);
}

double s_object(const SaliencyMap& pred, const BinaryMask& gt, double fg_ratio) {
  // Welford accumulation over the foreground (pred) and background (1 - pred).
  Moments fg, bg;
  double fg_m2 = 0.0, bg_m2 = 0.0;
  auto p = pred.values();
  auto g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    Moments& m = g[i] ? fg : bg;
    double& m2 = g[i] ? fg_m2 : bg_m2;
    double v = g[i] ? p[i] : 1.0 - p[i];
    m.count += 1.0;
    double delta = v - m.mean;
    m.mean += delta / m.count;
    m2 += delta * (v - m.mean);
  }
  for (auto [m, m2] : {std::pair{&fg, fg_m2}, std::pair{&bg, bg_m2}}) {
    m->stddev = m->count > 1.0 ? std::sqrt(std::max(0.0, m2) / (m->count - 1.0)) : 0.0;
  }
  return fg_ratio * object_score(fg) + (1.0 - fg_ratio) * object_score(bg);
}

// SSIM-style agreement of one rectangular block [y0,y1) x [x0,x1).
double block_ssim(const SaliencyMap& pred, const BinaryMask& gt, int y0, int y1, int x0,
                  int x1) {
  double n = static_cast<double>(y1 - y0) * (x1 - x0);
  if (n <= 0.0) return 0.0;
  double sx = 0.0, sy = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      sx += pred(y, x);
      sy += gt(y, x);
    }
  double mx = sx / n, my = sy / n;
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      double dx = pred(y, x) - mx;
      double dy = gt(y, x) - my;
      vx += dx * dx;
      vy += dy * dy;
      cxy += dx * dy;
    }
  double denom = n - 1.0 + kEps;
  vx /= denom;
  vy /= denom;
  cxy /= denom;
  double alpha = 4.0 * mx * my * cxy;
  double beta = (mx * mx + my * my) * (vx + vy);
  if (alpha != 0.0) return alpha / (beta + kEps);
  if (beta == 0.0) return 1.0;
  return 0.0;
}

double s_region(const SaliencyMap& pred, const BinaryMask& gt) {
  const int h = gt.height(), w = gt.width();
  // 1-based centroid, rounded half away from zero.
  double total = 0.0, col_acc = 0.0, row_acc = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (gt(y, x)) {
        total += 1.0;
        col_acc += x + 1;
        row_acc += y + 1;
      }
  int cx, cy;
  if (total == 0.0) {
    cx = static_cast<int>(std::round(w / 2.0));
    cy = static_cast<int>(std::round(h / 2.0));
  } else {
    cx = static_cast<int>(std::round(col_acc / total));
    cy = static_cast<int>(std::round(row_acc / total));
  }
  double area = static_cast<double>(w) * h;
  double w1 = static_cast<double>(cx) * cy / area;
  double w2 = static_cast<double>(w - cx) * cy / area;
  double w3 = static_cast<double>(cx) * (h - cy) / area;
  double w4 = 1.0 - w1 - w2 - w3;
  return w1 * block_ssim(pred, gt, 0, cy, 0, cx) + w2 * block_ssim(pred, gt, 0, cy, cx, w) +
         w3 * block_ssim(pred, gt, cy, h, 0, cx) + w4 * block_ssim(pred, gt, cy, h, cx, w);
}

}  // namespace

double mae(const SaliencyMap& pred, const BinaryMask& gt) {
  check_pair(pred, gt, "mae");
  auto p = pred.values();
  auto g = gt.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - g[i]);
  return acc / static_cast<double>(p.size());
}

double mae(const SaliencyMap& a, const SaliencyMap& b) {
  require_same_dims(a, b, "mae");
  validate_map(a);
  validate_map(b);
  auto pa = a.values();
  auto pb = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) acc += std::abs(pa[i] - pb[i]);
  return acc / static_cast<double>(pa.size());
}

double adaptive_threshold(const SaliencyMap& pred) {
  double sum = 0.0;
  for (double v : pred.values()) sum += v;
  return std::min(1.0, 2.0 * sum / static_cast<double>(pred.size()));
}

FCurve f_curve(const SaliencyMap& pred, const BinaryMask& gt) {
  check_pair(pred, gt, "f_measures");
  auto h = histogram(pred, gt);
  if (h.positives == 0.0) throw UndefinedRecall("f_measures: ground truth has no foreground");
  return curve_from(h);
}

FScores f_measures(const SaliencyMap& pred, const BinaryMask& gt) {
  check_pair(pred, gt, "f_measures");
  auto h = histogram(pred, gt);
  if (h.positives == 0.0) throw UndefinedRecall("f_measures: ground truth has no foreground");
  FCurve curve = curve_from(h);

  FScores out;
  double sum = 0.0;
  for (double f : curve) {
    out.max_f = std::max(out.max_f, f);
    sum += f;
  }
  out.mean_f = sum / kThresholds;

  // Smallest level whose value reaches the adaptive threshold.
  double thr = adaptive_threshold(pred);
  int first = kThresholds - 1;
  for (int k = 0; k < kThresholds; ++k) {
    if (k / 255.0 >= thr) {
      first = k;
      break;
    }
  }
  out.adp_f = curve[first];
  return out;
}

double s_measure(const SaliencyMap& pred, const BinaryMask& gt) {
  check_pair(pred, gt, "s_measure");
  double fg = 0.0, mean_pred = 0.0;
  auto p = pred.values();
  auto g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    fg += g[i];
    mean_pred += p[i];
  }
  double n = static_cast<double>(p.size());
  double y = fg / n;
  mean_pred /= n;
  double q;
  if (fg == 0.0) {
    q = 1.0 - mean_pred;
  } else if (fg == n) {
    q = mean_pred;
  } else {
    constexpr double alpha = 0.5;
    q = alpha * s_object(pred, gt, y) + (1.0 - alpha) * s_region(pred, gt);
  }
  return std::clamp(q, 0.0, 1.0);
}

double consistency_degree(const SaliencyMap& motion_map, const SaliencyMap& sota_map) {
  require_same_dims(motion_map, sota_map, "consistency_degree");
  validate_map(sota_map);
  return s_measure(motion_map, binarize(sota_map, 0.5));
}

FrameMetrics evaluate_frame(std::string frame_id, const SaliencyMap& pred, const BinaryMask& gt) {
  FrameMetrics fm;
  fm.frame_id = std::move(frame_id);
  fm.mae = mae(pred, gt);
  fm.s_measure = s_measure(pred, gt);
  auto h = histogram(pred, gt);
  if (h.positives > 0.0) {
    auto scores = f_measures(pred, gt);
    fm.max_f = scores.max_f;
    fm.mean_f = scores.mean_f;
    fm.adp_f = scores.adp_f;
    fm.curve = curve_from(h);
  }
  return fm;
}

MetricsReport aggregate(std::vector<FrameMetrics> per_frame) {
  MetricsReport r;
  r.frame_count = static_cast<int>(per_frame.size());
  if (per_frame.empty()) {
    r.per_frame = std::move(per_frame);
    return r;
  }
  FCurve mean_curve{};
  for (const auto& f : per_frame) {
    r.max_f += f.max_f;
    r.mean_f += f.mean_f;
    r.adp_f += f.adp_f;
    r.s_measure += f.s_measure;
    r.mae += f.mae;
    for (int k = 0; k < kThresholds; ++k) mean_curve[k] += f.curve[k];
  }
  double n = static_cast<double>(per_frame.size());
  r.max_f /= n;
  r.mean_f /= n;
  r.adp_f /= n;
  r.s_measure /= n;
  r.mae /= n;
  for (double& v : mean_curve) v /= n;
  r.curve_max_f = *std::max_element(mean_curve.begin(), mean_curve.end());
  r.per_frame = std::move(per_frame);
  return r;
}

}  // namespace mqp::metrics
