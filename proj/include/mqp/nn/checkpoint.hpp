#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace mqp::nn {

struct ParamBlob {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

/// Versioned container: magic "MQPCKPT", u32 version, JSON header (kind and
/// config echo), then named parameter blobs stored as raw float64.
struct Checkpoint {
  std::string kind;  // "mqpm" or "refine"
  nlohmann::json config;
  std::vector<ParamBlob> params;

  /// 16 hex digits of a FNV-1a hash over kind and parameter bytes.
  std::string id() const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mqp::nn
