#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mqp/flow_io.hpp"

namespace mqp::data {

/// One video frame on disk. Frame ids are "<sequence>/<stem>".
struct FrameEntry {
  std::string frame_id;
  std::string sequence;
  std::filesystem::path path;
};

/// Frames of every sequence directory under root, sorted by sequence and
/// file name. Accepts .png, .jpg and .jpeg. Throws MissingDependency when
/// root does not exist.
std::vector<FrameEntry> scan_frames(const std::filesystem::path& root);

/// Consecutive frame pairs within each sequence; the last frame of a
/// sequence has no successor and yields no pair.
std::vector<flow::FramePair> frame_pairs(const std::vector<FrameEntry>& frames);

/// <root>/<frame_id>.png
std::filesystem::path map_path(const std::filesystem::path& root, const std::string& frame_id);

/// Standard corpus layout used by the pipeline and the synthetic generator.
struct CorpusLayout {
  std::filesystem::path frames;
  std::filesystem::path gt;
  std::filesystem::path flows;
  std::filesystem::path sota;

  static CorpusLayout under(const std::filesystem::path& root);
};

}  // namespace mqp::data
