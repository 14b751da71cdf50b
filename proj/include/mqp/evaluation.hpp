#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mqp/saliency_metrics.hpp"

namespace mqp::eval {

/// Scores <pred_dir>/<frame_id>.png against every mask under gt_dir (or only
/// the listed frame ids). Predictions of a different size are resized to
/// the mask. Missing predictions are listed in the report and excluded from
/// the aggregates.
metrics::MetricsReport evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                const std::optional<std::vector<std::string>>& frame_ids = {});

void write_per_frame_csv(const std::filesystem::path& path, const metrics::MetricsReport& report);

nlohmann::json summary_json(const metrics::MetricsReport& report);

/// Plain-text table: one row per named report with maxF, meanF, adpF, S-M
/// and MAE columns.
std::string format_table(const std::vector<std::pair<std::string, metrics::MetricsReport>>& rows);

}  // namespace mqp::eval
