#include "mqp/dataset.hpp"

#include <algorithm>

#include "mqp/errors.hpp"

namespace fs = std::filesystem;

namespace mqp::data {

namespace {

bool is_image(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

std::vector<FrameEntry> scan_frames(const fs::path& root) {
  if (!fs::is_directory(root)) throw MissingDependency("frame directory not found: " + root.string());
  std::vector<fs::path> sequences;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) sequences.push_back(e.path());
  std::sort(sequences.begin(), sequences.end());

  std::vector<FrameEntry> out;
  for (const auto& seq : sequences) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(seq))
      if (e.is_regular_file() && is_image(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    const auto name = seq.filename().string();
    for (const auto& f : files) out.push_back({name + "/" + f.stem().string(), name, f});
  }
  return out;
}

std::vector<flow::FramePair> frame_pairs(const std::vector<FrameEntry>& frames) {
  std::vector<flow::FramePair> out;
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    if (frames[i].sequence != frames[i + 1].sequence) continue;
    out.push_back({frames[i].frame_id, frames[i].path, frames[i + 1].path});
  }
  return out;
}

fs::path map_path(const fs::path& root, const std::string& frame_id) {
  return root / (frame_id + ".png");
}

CorpusLayout CorpusLayout::under(const fs::path& root) {
  return {root / "frames", root / "gt", root / "flows", root / "sota"};
}

}  // namespace mqp::data
