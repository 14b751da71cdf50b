#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace mqp::synth {

/// Parameters of a procedural micro-dataset: textured shapes over textured
/// backgrounds, alternating between a clean-motion regime (static camera,
/// rigid translation) and a chaotic one (camera motion, background
/// deformation, object jitter and scale wobble).
struct SynthSpec {
  int videos = 8;
  int frames = 30;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 7;
  int min_segment = 4;
  int max_segment = 10;
  double hq_speed_min = 1.5;
  double hq_speed_max = 3.0;
  double camera_speed = 2.0;
  double deformation = 1.0;
  // radius in pixels over which object flow bleeds into the background
  double flow_fattening = 3.0;
  // corruption strength of the simulated target maps, in [0,1]
  double target_hq_error = 0.1;
  double target_lq_error = 0.6;
  std::string video_prefix = "video";

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

struct FrameRegime {
  std::string frame_id;
  bool high_quality = false;
};

struct SynthSummary {
  int frames = 0;
  int flows = 0;
  int hq_frames = 0;
  int lq_frames = 0;
  std::vector<FrameRegime> regimes;
};

/// Writes frames/, gt/, flows/, sota/ (simulated target maps), regimes.csv
/// and spec.json under root. Seed-deterministic. Throws ConfigError for a
/// spec without frames.
SynthSummary gen_synthetic(const SynthSpec& spec, const std::filesystem::path& root);

std::vector<FrameRegime> read_regimes(const std::filesystem::path& path);

}  // namespace mqp::synth
