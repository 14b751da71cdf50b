#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mqp/errors.hpp"
#include "mqp/mqpm_network.hpp"
#include "mqp/refine_trainer.hpp"
#include "mqp/saliency_metrics.hpp"
#include "mqp/synthetic.hpp"

namespace mqp::pipeline {

/// Directories of one corpus split. Any entry may be empty when a stage
/// does not need it.
struct SplitRoots {
  std::filesystem::path frames;
  std::filesystem::path gt;
  std::filesystem::path flows;
  std::filesystem::path sota;
};

struct FlowSpec {
  std::string kind = "directory";  // "directory" or "command"
  std::string command;             // template with {frame0} {frame1} {out}
};

struct ThetaSpec {
  std::string kind = "contrast";  // "contrast", "directory" or "command"
  std::string arg;
};

struct SyntheticSetup {
  std::filesystem::path train_root;
  std::filesystem::path test_root;
  synth::SynthSpec train;
  synth::SynthSpec test;
};

struct PipelineConfig {
  SplitRoots train;
  SplitRoots test;
  FlowSpec flow;
  ThetaSpec theta;
  std::string target_method = "target";
  mqpm::MqpmConfig mqpm;
  refine::RefineConfig refine;
  int window = 5;
  std::filesystem::path out = "out";
  std::uint64_t seed = 1;
  std::optional<double> flow_max_magnitude;
  std::optional<SyntheticSetup> synthetic;
  std::vector<int> ablation_windows = {1, 2, 3, 4, 5, 10};

  void validate() const;
};

/// Relative paths in the file are resolved against its directory. A
/// "train"/"test" block may give "root" (frames/, gt/, flows/, sota/ below
/// it) and override single directories.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base);
nlohmann::json config_to_json(const PipelineConfig& config);

/// Sets the seed of the pipeline and of both training configs.
void apply_seed(PipelineConfig& config, std::uint64_t seed);

/// Failure inside a pipeline stage; what() starts with "stage N (name)".
class StageError : public Error {
 public:
  StageError(int stage, const std::string& name, const std::string& message)
      : Error("stage " + std::to_string(stage) + " (" + name + "): " + message), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

using Logger = std::function<void(const std::string&)>;

/// Generates the configured synthetic splits that are not on disk yet.
void ensure_synthetic(const PipelineConfig& config, const Logger& log = {});

struct StagePaths {
  std::filesystem::path step1, step2, step3;
  explicit StagePaths(const std::filesystem::path& out)
      : step1(out / "step1"), step2(out / "step2"), step3(out / "step3") {}
};

/// Step 1: motion quality labels on the training split and MQPM training.
nlohmann::json run_stage1(const PipelineConfig& config, const Logger& log = {});
/// Step 2: MQPM over the test split, window filtering, manifest.
nlohmann::json run_stage2(const PipelineConfig& config, const Logger& log = {});
/// Step 3: refinement training and inference, evaluation when GT exists.
nlohmann::json run_stage3(const PipelineConfig& config, const Logger& log = {});

/// All three stages; writes <out>/report.json. Failures are rethrown as
/// StageError, keeping every artifact written before the failure.
nlohmann::json run_pipeline(const PipelineConfig& config, const Logger& log = {});

/// Every frame scored in step 2, as persisted in candidates.csv.
struct ScoredRow {
  std::string frame_id;
  std::filesystem::path frame;
  double quality_confidence = 0.0;
  bool decision = false;
  std::optional<double> consistency;
};
std::vector<ScoredRow> read_candidates_csv(const std::filesystem::path& path);

struct AblationOptions {
  // any of: ms_baseline, ms_minus_mqpm, ms_mqpm, full, hq_lq, window_sweep
  std::vector<std::string> variants = {"ms_baseline", "ms_minus_mqpm", "ms_mqpm", "full", "hq_lq", "window_sweep"};
};

struct WindowRow {
  int window = 0;
  int survivors = 0;
  metrics::MetricsReport report;
};

struct AblationResult {
  std::vector<std::pair<std::string, metrics::MetricsReport>> variants;
  std::optional<metrics::MetricsReport> target;
  std::optional<metrics::MetricsReport> hq;
  std::optional<metrics::MetricsReport> lq;
  std::vector<WindowRow> windows;
  std::vector<std::string> notices;
  std::string tables;

  const metrics::MetricsReport* find(const std::string& name) const;
};

/// Runs the requested variants on the test split of a completed pipeline
/// and writes <out>/ablation/{tables.txt, ablation.json, selection_stats.csv}.
/// Variants that cannot run are omitted with a notice.
AblationResult ablation_report(const PipelineConfig& config, const AblationOptions& options = {},
                               const Logger& log = {});

inline constexpr const char* kMsBaseline = "MS Baseline";
inline constexpr const char* kMsMinusMqpm = "MS-MQPM";
inline constexpr const char* kMsMqpm = "MS+MQPM";
inline constexpr const char* kFull = "MS+MQPM+SOTA";

}  // namespace mqp::pipeline
