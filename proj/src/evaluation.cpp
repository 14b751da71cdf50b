#include "mqp/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mqp/dataset.hpp"
#include "mqp/errors.hpp"
#include "mqp/image_io.hpp"

namespace fs = std::filesystem;

namespace mqp::eval {

metrics::MetricsReport evaluate(const fs::path& pred_dir, const fs::path& gt_dir,
                                const std::optional<std::vector<std::string>>& frame_ids) {
  std::vector<std::string> ids;
  if (frame_ids) {
    ids = *frame_ids;
  } else {
    for (const auto& f : data::scan_frames(gt_dir)) ids.push_back(f.frame_id);
  }
  std::vector<metrics::FrameMetrics> per_frame;
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    auto pred_path = data::map_path(pred_dir, id);
    if (!fs::exists(pred_path)) {
      missing.push_back(id);
      continue;
    }
    auto gt = io::read_mask(data::map_path(gt_dir, id));
    auto pred = io::read_map(pred_path);
    if (!pred.same_shape(gt)) pred = resize_bilinear(pred, gt.height(), gt.width());
    per_frame.push_back(metrics::evaluate_frame(id, pred, gt));
  }
  auto report = metrics::aggregate(std::move(per_frame));
  report.missing = std::move(missing);
  return report;
}

void write_per_frame_csv(const fs::path& path, const metrics::MetricsReport& report) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "frame_id,max_f,mean_f,adp_f,s_measure,mae\n" << std::setprecision(17);
  for (const auto& f : report.per_frame) {
    out << f.frame_id << ',' << f.max_f << ',' << f.mean_f << ',' << f.adp_f << ',' << f.s_measure << ',' << f.mae
        << '\n';
  }
}

nlohmann::json summary_json(const metrics::MetricsReport& r) {
  return {{"max_f", r.max_f},         {"mean_f", r.mean_f}, {"adp_f", r.adp_f},
          {"s_measure", r.s_measure}, {"mae", r.mae},       {"curve_max_f", r.curve_max_f},
          {"frames", r.frame_count},  {"missing", r.missing}};
}

std::string format_table(const std::vector<std::pair<std::string, metrics::MetricsReport>>& rows) {
  std::size_t name_w = 6;
  for (const auto& [name, _] : rows) name_w = std::max(name_w, name.size());
  std::ostringstream s;
  s << std::left << std::setw(static_cast<int>(name_w)) << "Method" << std::right;
  for (const char* h : {"maxF", "meanF", "adpF", "S-M", "MAE", "frames"}) s << std::setw(9) << h;
  s << '\n' << std::string(name_w + 54, '-') << '\n' << std::fixed << std::setprecision(3);
  for (const auto& [name, r] : rows) {
    s << std::left << std::setw(static_cast<int>(name_w)) << name << std::right << std::setw(9) << r.max_f
      << std::setw(9) << r.mean_f << std::setw(9) << r.adp_f << std::setw(9) << r.s_measure << std::setw(9) << r.mae
      << std::setw(9) << r.frame_count << '\n';
  }
  return s.str();
}

}  // namespace mqp::eval
