#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mqp/dataset.hpp"
#include "mqp/mqpm_network.hpp"
#include "mqp/trainset_builder.hpp"

namespace mqp::refine {

/// Training settings of the single-stream appearance model. The network is
/// a localization branch with exactly the MQPM layout.
struct RefineConfig {
  mqpm::NetworkConfig net;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 5;
  bool hflip_augment = true;
  // false: pseudo-GT binarized at binarize_threshold before BCE
  bool soft_targets = false;
  double binarize_threshold = 0.5;
  // optional MQPM checkpoint whose encoder initializes the model
  std::string init_from_mqpm;
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const RefineConfig& c);
void from_json(const nlohmann::json& j, RefineConfig& c);

struct RefineSample {
  std::string frame_id;
  RgbImage frame;
  SaliencyMap pseudo_gt;
};

struct RefineResult {
  nn::Checkpoint checkpoint;
  std::vector<mqpm::EpochLoss> log;  // cls stays 0
  std::set<std::string> visited;
  std::vector<std::string> warnings;
};

/// Loads frame and pseudo-GT of every manifest entry. Throws IntegrationError
/// when their sizes differ and InvalidInput for an empty manifest.
std::vector<RefineSample> load_manifest_samples(const trainset::TrainingManifest& manifest);

RefineResult train_refine(const std::vector<RefineSample>& samples, const RefineConfig& config);
RefineResult train_refine(const trainset::TrainingManifest& manifest, const RefineConfig& config);

class RefineModel {
 public:
  explicit RefineModel(const RefineConfig& config);

  /// Saliency at the frame's native resolution. Pure: no state changes.
  SaliencyMap predict(const RgbImage& frame) const;

  mqpm::LocalizationNet& net() { return net_; }
  const RefineConfig& config() const { return config_; }
  nn::Checkpoint to_checkpoint() const;
  /// Throws IntegrationError when kind, names or shapes disagree.
  static RefineModel from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  RefineConfig config_;
  mqpm::LocalizationNet net_;
};

std::vector<SaliencyMap> infer_refined(const std::vector<RgbImage>& frames, const nn::Checkpoint& ckpt);

/// Runs the model over frames and writes <out_dir>/<frame_id>.png.
void infer_to_directory(const std::vector<data::FrameEntry>& frames, const nn::Checkpoint& ckpt,
                        const std::filesystem::path& out_dir);

using ShapeSignature = std::vector<std::pair<std::string, std::vector<int>>>;
ShapeSignature shape_signature(const std::vector<nn::Param*>& params);

}  // namespace mqp::refine
