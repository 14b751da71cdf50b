#include "mqp/theta.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

#include "mqp/image_io.hpp"

namespace mqp::theta {
namespace fs = std::filesystem;

namespace {

// Separable 5-tap binomial blur with clamped borders.
RgbImage blur5(const RgbImage& img) {
  constexpr std::array<double, 5> k = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  const int h = img.height(), w = img.width(), ch = img.channels();
  RgbImage tmp(h, w, ch), out(h, w, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int t = -2; t <= 2; ++t) acc += k[t + 2] * img(y, std::clamp(x + t, 0, w - 1), c);
        tmp(y, x, c) = acc;
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int t = -2; t <= 2; ++t) acc += k[t + 2] * tmp(std::clamp(y + t, 0, h - 1), x, c);
        out(y, x, c) = acc;
      }
  return out;
}

std::string substitute(std::string text, const std::string& key, const std::string& value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

}  // namespace

SaliencyMap contrast_saliency(const RgbImage& image) {
  if (image.channels() != 3) throw InvalidInput("contrast_saliency expects an RGB image");
  const int h = image.height(), w = image.width();
  std::array<double, 3> mean{};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) mean[c] += image(y, x, c);
  for (double& m : mean) m /= static_cast<double>(image.pixels());

  RgbImage blurred = blur5(image);
  SaliencyMap sal(h, w);
  double lo = INFINITY, hi = -INFINITY;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double d = 0.0;
      for (int c = 0; c < 3; ++c) d += (blurred(y, x, c) - mean[c]) * (blurred(y, x, c) - mean[c]);
      sal(y, x) = std::sqrt(d);
      lo = std::min(lo, sal(y, x));
      hi = std::max(hi, sal(y, x));
    }
  double range = hi - lo;
  for (double& v : sal.raw()) v = range > 1e-12 ? (v - lo) / range : 0.0;
  return sal;
}

SaliencyMap ContrastBackend::predict(const RgbImage& image, const std::string&) {
  return contrast_saliency(image);
}

DirectoryBackend::DirectoryBackend(fs::path root) : root_(std::move(root)) {}

SaliencyMap DirectoryBackend::predict(const RgbImage&, const std::string& frame_id) {
  auto path = root_ / (frame_id + ".png");
  if (!fs::exists(path)) {
    throw MissingDependency("no precomputed saliency map for frame " + frame_id);
  }
  return io::read_map(path);
}

CommandBackend::CommandBackend(std::string command_template, fs::path scratch_dir)
    : template_(std::move(command_template)), scratch_(std::move(scratch_dir)) {}

SaliencyMap CommandBackend::predict(const RgbImage& image, const std::string& frame_id) {
  std::lock_guard lock(mutex_);
  fs::create_directories(scratch_);
  auto in = scratch_ / "theta_in.png";
  auto out = scratch_ / "theta_out.png";
  fs::remove(out);
  io::write_rgb(in, image);
  std::string cmd = substitute(substitute(template_, "{in}", in.string()), "{out}", out.string());
  if (std::system(cmd.c_str()) != 0 || !fs::exists(out)) {
    throw IntegrationError("saliency command failed on frame " + frame_id);
  }
  return io::read_map(out);
}

std::unique_ptr<SaliencyBackend> make_backend(const std::string& kind, const std::string& arg,
                                              const fs::path& scratch_dir) {
  if (kind == "contrast") return std::make_unique<ContrastBackend>();
  if (kind == "directory") return std::make_unique<DirectoryBackend>(arg);
  if (kind == "command") return std::make_unique<CommandBackend>(arg, scratch_dir);
  throw ConfigError("unknown theta kind: " + kind);
}

}  // namespace mqp::theta
