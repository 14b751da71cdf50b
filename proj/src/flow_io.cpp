#include "mqp/flow_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

namespace mqp::flow {
namespace fs = std::filesystem;

namespace {

constexpr char kTag[4] = {'P', 'I', 'E', 'H'};

static_assert(std::endian::native == std::endian::little,
              ".flo codec assumes a little-endian host");

template <typename T>
T load_le(const std::uint8_t* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

template <typename T>
void store_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

bool unknown(float u, float v) {
  return std::isnan(u) || std::isnan(v) || std::fabs(u) > kUnknownFlow ||
         std::fabs(v) > kUnknownFlow;
}

std::vector<std::array<int, 3>> make_wheel() {
  constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
  std::vector<std::array<int, 3>> w;
  w.reserve(RY + YG + GC + CB + BM + MR);
  for (int i = 0; i < RY; ++i) w.push_back({255, 255 * i / RY, 0});
  for (int i = 0; i < YG; ++i) w.push_back({255 - 255 * i / YG, 255, 0});
  for (int i = 0; i < GC; ++i) w.push_back({0, 255, 255 * i / GC});
  for (int i = 0; i < CB; ++i) w.push_back({0, 255 - 255 * i / CB, 255});
  for (int i = 0; i < BM; ++i) w.push_back({255 * i / BM, 0, 255});
  for (int i = 0; i < MR; ++i) w.push_back({255, 0, 255 - 255 * i / MR});
  return w;
}

std::string substitute(std::string text, const std::string& key, const std::string& value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

}  // namespace

FlowField decode_flo(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw FormatError(".flo: header truncated");
  if (std::memcmp(bytes.data(), kTag, 4) != 0) throw FormatError(".flo: bad magic tag");
  auto width = load_le<std::int32_t>(bytes.data() + 4);
  auto height = load_le<std::int32_t>(bytes.data() + 8);
  if (width < 1 || height < 1 || width > 100000 || height > 100000) {
    throw FormatError(".flo: implausible dimensions " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
  std::size_t expected = 12 + static_cast<std::size_t>(width) * height * 8;
  if (bytes.size() < expected) throw FormatError(".flo: payload truncated");
  if (bytes.size() > expected) throw FormatError(".flo: trailing bytes after payload");

  FlowField flow(height, width);
  const std::uint8_t* p = bytes.data() + 12;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x, p += 8) {
      float u = load_le<float>(p);
      float v = load_le<float>(p + 4);
      flow.u(y, x) = u;
      flow.v(y, x) = v;
      flow.valid(y, x) = unknown(u, v) ? 0 : 1;
    }
  }
  return flow;
}

std::vector<std::uint8_t> encode_flo(const FlowField& flow) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + flow.u.pixels() * 8);
  out.insert(out.end(), kTag, kTag + 4);
  store_le<std::int32_t>(out, flow.width());
  store_le<std::int32_t>(out, flow.height());
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      store_le<float>(out, flow.u(y, x));
      store_le<float>(out, flow.v(y, x));
    }
  }
  return out;
}

FlowField read_flo(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingDependency("cannot open flow file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_flo(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_flo(const fs::path& path, const FlowField& flow) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto bytes = encode_flo(flow);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw MissingDependency("cannot write flow file: " + path.string());
}

const std::vector<std::array<int, 3>>& color_wheel() {
  static const auto wheel = make_wheel();
  return wheel;
}

FlowRgb encode_color_wheel(const FlowField& flow, std::optional<double> max_magnitude) {
  if (max_magnitude && !(*max_magnitude > 0.0)) {
    throw InvalidInput("encode_color_wheel: max_magnitude must be positive");
  }
  double max_rad = 0.0;
  bool any_valid = false;
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      if (!flow.valid(y, x)) continue;
      any_valid = true;
      max_rad = std::max(max_rad, std::hypot<double>(flow.u(y, x), flow.v(y, x)));
    }
  }
  if (!any_valid) throw DegenerateInput("encode_color_wheel: flow has no valid vector");
  double norm = max_magnitude.value_or(max_rad);

  const auto& wheel = color_wheel();
  const int ncols = static_cast<int>(wheel.size());
  FlowRgb rgb(flow.height(), flow.width(), 3, 0.0);
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      if (!flow.valid(y, x)) continue;
      double fu = flow.u(y, x), fv = flow.v(y, x);
      double rad = norm > 0.0 ? std::min(1.0, std::hypot(fu, fv) / norm) : 0.0;
      double a = std::atan2(-fv, -fu) / std::numbers::pi;
      double fk = (a + 1.0) / 2.0 * (ncols - 1);
      int k0 = static_cast<int>(fk);
      int k1 = (k0 + 1) % ncols;
      double f = fk - k0;
      for (int c = 0; c < 3; ++c) {
        double col = (1.0 - f) * wheel[k0][c] / 255.0 + f * wheel[k1][c] / 255.0;
        rgb(y, x, c) = 1.0 - rad * (1.0 - col);
      }
    }
  }
  return rgb;
}

DirectoryFlowProvider::DirectoryFlowProvider(fs::path root) : root_(std::move(root)) {}

fs::path DirectoryFlowProvider::path_for(const std::string& frame_id) const {
  return root_ / (frame_id + ".flo");
}

FlowField DirectoryFlowProvider::flow(const FramePair& pair) {
  auto path = path_for(pair.frame_id);
  if (!fs::exists(path)) {
    throw MissingDependency("no precomputed flow for frame " + pair.frame_id + " (" +
                            path.string() + ")");
  }
  return read_flo(path);
}

CommandFlowProvider::CommandFlowProvider(std::string command_template, fs::path cache_dir)
    : template_(std::move(command_template)), cache_dir_(std::move(cache_dir)) {}

FlowField CommandFlowProvider::flow(const FramePair& pair) {
  auto out = cache_dir_ / (pair.frame_id + ".flo");
  std::lock_guard lock(mutex_);
  if (!fs::exists(out)) {
    if (template_.empty()) {
      throw MissingDependency("no flow command configured and no cached flow for frame " +
                              pair.frame_id);
    }
    fs::create_directories(out.parent_path());
    std::string cmd = substitute(template_, "{frame0}", pair.frame_t.string());
    cmd = substitute(cmd, "{frame1}", pair.frame_t1.string());
    cmd = substitute(cmd, "{out}", out.string());
    int rc = std::system(cmd.c_str());
    if (rc != 0 || !fs::exists(out)) {
      throw MissingDependency("flow command failed for frame " + pair.frame_id + ": " + cmd);
    }
  }
  return read_flo(out);
}

}  // namespace mqp::flow
