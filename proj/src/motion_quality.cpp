#include "mqp/motion_quality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "mqp/saliency_metrics.hpp"

namespace mqp::quality {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Mean of the sorted tail starting at the first value >= lam, summed in
// ascending order. Returns nullopt when the tail is empty.
std::optional<double> upper_mean(const std::vector<double>& sorted, double lam) {
  auto first = std::lower_bound(sorted.begin(), sorted.end(), lam);
  if (first == sorted.end()) return std::nullopt;
  double sum = 0.0;
  for (auto it = first; it != sorted.end(); ++it) sum += *it;
  return sum / static_cast<double>(sorted.end() - first);
}

void add_reason(ThresholdFit& fit, const std::string& reason) {
  fit.fallback_used = true;
  fit.fallback_reason = fit.fallback_reason == "none" ? reason : fit.fallback_reason + "+" + reason;
}

}  // namespace

double compute_mqs(const flow::FlowRgb& flow_rgb, const BinaryMask& gt, const theta::ThetaFn& theta) {
  SaliencyMap sal = theta(flow_rgb);
  if (sal.height() != gt.height() || sal.width() != gt.width() || sal.channels() != 1) {
    throw IntegrationError("theta returned a " + std::to_string(sal.height()) + "x" +
                           std::to_string(sal.width()) + " map for a " +
                           std::to_string(gt.height()) + "x" + std::to_string(gt.width()) +
                           " frame");
  }
  return metrics::s_measure(sal, gt);
}

ThresholdFit fit_threshold(std::span<const double> mqs_values, double tol, int max_iter) {
  if (mqs_values.empty()) throw InvalidInput("fit_threshold: empty score list");
  std::vector<double> sorted(mqs_values.begin(), mqs_values.end());
  std::sort(sorted.begin(), sorted.end());

  ThresholdFit fit;
  double sum = 0.0;
  for (double m : sorted) sum += m;
  double lam = sum / static_cast<double>(sorted.size());
  fit.trace.push_back(lam);
  fit.omega = *upper_mean(sorted, lam);

  for (int it = 0; it < max_iter; ++it) {
    double omega = *upper_mean(sorted, lam);
    double next = (1.0 + omega) / 2.0;
    fit.omega = omega;
    if (!upper_mean(sorted, next)) {
      add_reason(fit, "empty_upper_set");
      break;
    }
    double delta = std::abs(next - lam);
    lam = next;
    ++fit.iterations;
    fit.trace.push_back(lam);
    if (delta < tol) {
      fit.converged = true;
      fit.omega = *upper_mean(sorted, lam);
      break;
    }
  }

  auto upper = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), lam);
  if (upper == 0 || upper == static_cast<std::ptrdiff_t>(sorted.size())) {
    add_reason(fit, "class_balance");
    lam = median_of(sorted);
    upper = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), lam);
    fit.degenerate = upper == 0 || upper == static_cast<std::ptrdiff_t>(sorted.size());
  }
  fit.lam = lam;
  return fit;
}

std::vector<QualityRecord> assign_labels(std::vector<QualityRecord> records, const ThresholdFit& fit) {
  for (auto& r : records) r.label = r.mqs < fit.lam ? 0 : 1;
  return records;
}

MqpmTrainset build_mqpm_trainset(const std::vector<AnnotatedFlowFrame>& frames,
                                 theta::SaliencyBackend& theta, const TrainsetOptions& options) {
  if (frames.empty()) throw InvalidInput("build_mqpm_trainset: no frames");
  MqpmTrainset set;
  std::vector<double> scores;
  std::vector<flow::FlowRgb> renders;
  for (const auto& f : frames) {
    auto rgb = flow::encode_color_wheel(f.flow, options.flow_max_magnitude);
    if (rgb.height() != f.gt.height() || rgb.width() != f.gt.width()) {
      throw IntegrationError("flow/mask size mismatch on frame " + f.frame_id);
    }
    QualityRecord rec;
    rec.frame_id = f.frame_id;
    try {
      rec.mqs = compute_mqs(rgb, f.gt, [&](const RgbImage& img) {
        rec.flow_saliency = theta.predict(img, f.frame_id);
        return rec.flow_saliency;
      });
    } catch (const Error& e) {
      throw IntegrationError("theta failed on frame " + f.frame_id + ": " + e.what());
    }
    scores.push_back(rec.mqs);
    set.records.push_back(std::move(rec));
    renders.push_back(std::move(rgb));
  }

  set.fit = fit_threshold(scores, options.tol, options.max_iter);
  set.records = assign_labels(std::move(set.records), set.fit);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    int label = set.records[i].label;
    (label ? set.positives : set.negatives)++;
    set.samples.push_back({frames[i].frame_id, std::move(renders[i]), frames[i].gt, label});
  }
  if (set.fit.degenerate) {
    set.warnings.push_back("degenerate corpus: only one quality class present (" +
                           std::to_string(set.positives) + " positive, " +
                           std::to_string(set.negatives) + " negative)");
  }
  return set;
}

void write_records(const std::filesystem::path& path, const std::vector<QualityRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "# frame_id\tmqs\tlabel\n" << std::setprecision(17);
  for (const auto& r : records) out << r.frame_id << '\t' << r.mqs << '\t' << r.label << '\n';
  if (!out) throw MissingDependency("cannot write records: " + path.string());
}

std::vector<QualityRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDependency("cannot read records: " + path.string());
  std::vector<QualityRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    QualityRecord r;
    if (!std::getline(ss, r.frame_id, '\t') || !(ss >> r.mqs >> r.label)) {
      throw FormatError("malformed record line in " + path.string() + ": " + line);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_fit_summary(const std::filesystem::path& path, const ThresholdFit& fit, int positives,
                       int negatives) {
  nlohmann::json j = {{"lambda", fit.lam},
                      {"omega", fit.omega},
                      {"iterations", fit.iterations},
                      {"converged", fit.converged},
                      {"fallback_used", fit.fallback_used},
                      {"fallback_reason", fit.fallback_reason},
                      {"degenerate", fit.degenerate},
                      {"trace", fit.trace},
                      {"positives", positives},
                      {"negatives", negatives}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream(path) << j.dump(2) << '\n';
}

ThresholdFit read_fit_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDependency("cannot read fit summary: " + path.string());
  auto j = nlohmann::json::parse(in);
  ThresholdFit fit;
  fit.lam = j.at("lambda");
  fit.omega = j.at("omega");
  fit.iterations = j.at("iterations");
  fit.converged = j.at("converged");
  fit.fallback_used = j.at("fallback_used");
  fit.fallback_reason = j.at("fallback_reason");
  fit.degenerate = j.value("degenerate", false);
  fit.trace = j.at("trace").get<std::vector<double>>();
  return fit;
}

}  // namespace mqp::quality
