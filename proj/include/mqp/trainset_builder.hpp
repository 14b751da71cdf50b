#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mqp/flow_io.hpp"
#include "mqp/grid.hpp"
#include "mqp/mqpm_network.hpp"

namespace mqp::trainset {

/// MQPM verdict for one frame of the test corpus.
struct ScoredFrame {
  std::string frame_id;
  std::filesystem::path frame_path;
  SaliencyMap motion_saliency;  // native resolution
  double quality_confidence = 0.0;
  bool quality_decision = false;
};

struct CandidateFrame {
  std::string frame_id;
  std::filesystem::path frame_path;
  SaliencyMap motion_saliency;
  SaliencyMap sota_map;
  double consistency = 0.0;
  bool quality_decision = true;

  std::string sequence() const { return frame_id.substr(0, frame_id.rfind('/')); }
};

struct Selection {
  std::vector<ScoredFrame> scored;         // every frame with a flow field
  std::vector<CandidateFrame> candidates;  // accepted frames, temporal order
  std::vector<std::string> warnings;
};

/// Flow -> color wheel -> MQPM for every pair; frames with a positive
/// decision become candidates carrying the consistency degree between their
/// motion map and the target-method map. Throws IntegrationError naming the
/// frame when an accepted frame has no target-method map.
Selection select_candidates(const std::vector<flow::FramePair>& frames, flow::FlowProvider& flows,
                            const mqpm::MqpmModel& model, const std::filesystem::path& sota_dir,
                            std::optional<double> flow_max_magnitude = {});

/// Indices kept by the keep-1-of-W filter: consecutive blocks of W entries
/// within each run of equal sequence names, keeping the highest
/// consistency of each block (earliest on ties). Throws ConfigError for
/// W < 1.
std::vector<std::size_t> window_indices(std::span<const std::string> sequences,
                                        std::span<const double> consistency, int window);

std::vector<CandidateFrame> filter_window(const std::vector<CandidateFrame>& candidates, int window);

struct ManifestEntry {
  std::string frame_id;
  std::filesystem::path frame;
  std::filesystem::path pseudo_gt;
  double consistency = 0.0;
};

struct SelectionStats {
  int corpus_frames = 0;
  int accepted = 0;
  int survivors = 0;
  double acceptance_fraction = 0.0;
  double candidate_mean_consistency = 0.0;
  double survivor_mean_consistency = 0.0;
};

struct TrainingManifest {
  std::vector<ManifestEntry> entries;
  int window = 5;
  std::string target_method;
  std::string mqpm_checkpoint_id;
  // "sota" for the regular manifest, "motion" for the ablation variant
  std::string pseudo_gt_source = "sota";
  SelectionStats stats;
};

struct ManifestInfo {
  int window = 5;
  std::string target_method;
  std::string mqpm_checkpoint_id;
  int corpus_frames = 0;
  std::vector<double> candidate_consistency;
};

SelectionStats selection_stats(const ManifestInfo& info, std::span<const CandidateFrame> filtered);

/// Writes out_dir/manifest.json whose pseudo-GT paths point at the
/// target-method maps in sota_dir. Throws DegenerateInput when filtered is
/// empty.
TrainingManifest build_manifest(const std::vector<CandidateFrame>& filtered,
                                const std::filesystem::path& sota_dir,
                                const std::filesystem::path& out_dir, const ManifestInfo& info);

/// Ablation variant: stores the motion maps of the filtered frames under
/// out_dir/motion_maps and uses them as pseudo-GT.
TrainingManifest build_motion_manifest(const std::vector<CandidateFrame>& filtered,
                                       const std::filesystem::path& out_dir, const ManifestInfo& info);

void write_manifest(const std::filesystem::path& path, const TrainingManifest& manifest);
TrainingManifest read_manifest(const std::filesystem::path& path);

struct SelectionRow {
  int window = 5;
  SelectionStats stats;
  std::optional<double> max_f;
  std::optional<double> s_measure;
  std::optional<double> mae;
};

/// One row per window: W, keep ratio, counts, consistencies, and metrics
/// when evaluation data exists (empty cells otherwise).
void write_selection_stats(const std::filesystem::path& path, const std::vector<SelectionRow>& rows);

}  // namespace mqp::trainset
