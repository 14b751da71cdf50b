#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include "mqp/grid.hpp"

namespace mqp::theta {

/// Image saliency model applied to flow renderings. Returns a map with the
/// image's dimensions.
using ThetaFn = std::function<SaliencyMap(const RgbImage&)>;

/// Frequency-tuned contrast saliency: distance of each slightly blurred pixel
/// from the mean image color, min-max normalized. Used as the built-in stand-in
/// for a pretrained detector.
SaliencyMap contrast_saliency(const RgbImage& image);

/// Θ bound to a frame: some backends (precomputed directories) need the id.
class SaliencyBackend {
 public:
  virtual ~SaliencyBackend() = default;
  virtual SaliencyMap predict(const RgbImage& image, const std::string& frame_id) = 0;
  virtual std::string name() const = 0;
};

class ContrastBackend final : public SaliencyBackend {
 public:
  SaliencyMap predict(const RgbImage& image, const std::string& frame_id) override;
  std::string name() const override { return "contrast"; }
};

/// Precomputed maps at <root>/<frame_id>.png (e.g. a detector run offline on
/// the rendered flows).
class DirectoryBackend final : public SaliencyBackend {
 public:
  explicit DirectoryBackend(std::filesystem::path root);
  SaliencyMap predict(const RgbImage& image, const std::string& frame_id) override;
  std::string name() const override { return "directory:" + root_.string(); }

 private:
  std::filesystem::path root_;
};

/// External command with {in} (RGB png) and {out} (8-bit map png)
/// placeholders. Invocations are serialized.
class CommandBackend final : public SaliencyBackend {
 public:
  CommandBackend(std::string command_template, std::filesystem::path scratch_dir);
  SaliencyMap predict(const RgbImage& image, const std::string& frame_id) override;
  std::string name() const override { return "command"; }

 private:
  std::string template_;
  std::filesystem::path scratch_;
  std::mutex mutex_;
};

/// kind: "contrast" | "directory" | "command"; arg is the root or template.
std::unique_ptr<SaliencyBackend> make_backend(const std::string& kind, const std::string& arg,
                                              const std::filesystem::path& scratch_dir);

}  // namespace mqp::theta
