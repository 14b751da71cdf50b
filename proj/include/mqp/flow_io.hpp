#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mqp/grid.hpp"

namespace mqp::flow {

/// Per-pixel displacement in pixels/frame. Vectors with a component beyond
/// kUnknownFlow (or NaN) are flagged invalid.
struct FlowField {
  Grid<float> u;
  Grid<float> v;
  BinaryMask valid;

  FlowField() = default;
  FlowField(int height, int width)
      : u(height, width), v(height, width), valid(height, width, 1, 1) {}

  int height() const { return u.height(); }
  int width() const { return u.width(); }
};

/// Color-wheel rendering, 3 channels in [0,1].
using FlowRgb = RgbImage;

inline constexpr float kUnknownFlow = 1e9f;

/// Middlebury .flo container: "PIEH", int32 width, int32 height, then
/// interleaved float32 (u,v) pairs in row-major order, little-endian.
FlowField decode_flo(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_flo(const FlowField& flow);

FlowField read_flo(const std::filesystem::path& path);
void write_flo(const std::filesystem::path& path, const FlowField& flow);

/// The 55-entry Middlebury color wheel, channel values in [0,255].
const std::vector<std::array<int, 3>>& color_wheel();

/// Direction -> hue via atan2(-v,-u), magnitude/max_magnitude -> saturation
/// (clamped at 1). Zero flow is white, invalid vectors are black. Without
/// max_magnitude the per-frame maximum valid magnitude is used.
FlowRgb encode_color_wheel(const FlowField& flow, std::optional<double> max_magnitude = {});

/// Consecutive frame pair for which a flow field is requested.
struct FramePair {
  std::string frame_id;  // "<sequence>/<frame stem>" of the first frame
  std::filesystem::path frame_t;
  std::filesystem::path frame_t1;
};

class FlowProvider {
 public:
  virtual ~FlowProvider() = default;
  /// Throws MissingDependency naming the frame when no flow can be produced.
  virtual FlowField flow(const FramePair& pair) = 0;
};

/// Reads <root>/<frame_id>.flo.
class DirectoryFlowProvider final : public FlowProvider {
 public:
  explicit DirectoryFlowProvider(std::filesystem::path root);
  FlowField flow(const FramePair& pair) override;
  std::filesystem::path path_for(const std::string& frame_id) const;

 private:
  std::filesystem::path root_;
};

/// Runs an external estimator. The command template may reference
/// {frame0}, {frame1} and {out}; the tool must write a .flo file to {out}.
/// Results are cached under cache_dir and reused on later calls.
/// Invocations are serialized.
class CommandFlowProvider final : public FlowProvider {
 public:
  CommandFlowProvider(std::string command_template, std::filesystem::path cache_dir);
  FlowField flow(const FramePair& pair) override;

 private:
  std::string template_;
  std::filesystem::path cache_dir_;
  std::mutex mutex_;
};

}  // namespace mqp::flow
