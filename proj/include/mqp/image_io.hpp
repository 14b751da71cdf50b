#pragma once

#include <filesystem>

#include "mqp/grid.hpp"

namespace mqp::io {

// 8-bit single-channel maps: value v is stored as round(255·v).
SaliencyMap read_map(const std::filesystem::path& path);
void write_map(const std::filesystem::path& path, const SaliencyMap& map);

// Ground-truth masks are binarized at 128 on load.
BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

RgbImage read_rgb(const std::filesystem::path& path);
void write_rgb(const std::filesystem::path& path, const RgbImage& image);

}  // namespace mqp::io
