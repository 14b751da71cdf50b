#include "mqp/grid.hpp"

#include <algorithm>
#include <cmath>

namespace mqp {

void validate_map(const SaliencyMap& map) {
  if (map.empty()) throw InvalidInput("saliency map is empty");
  for (double v : map.values()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw InvalidInput("saliency map value outside [0,1]");
    }
  }
}

void validate_mask(const BinaryMask& mask) {
  if (mask.empty()) throw InvalidInput("mask is empty");
  for (auto v : mask.values()) {
    if (v > 1) throw InvalidInput("mask value is not binary");
  }
}

BinaryMask binarize(const SaliencyMap& map, double threshold) {
  BinaryMask out(map.height(), map.width());
  auto src = map.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= threshold ? 1 : 0;
  return out;
}

SaliencyMap to_map(const BinaryMask& mask) {
  SaliencyMap out(mask.height(), mask.width());
  auto src = mask.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
  return out;
}

Grid<double> resize_bilinear(const Grid<double>& src, int height, int width) {
  if (src.height() == height && src.width() == width) return src;
  Grid<double> out(height, width, src.channels());
  const double sy = static_cast<double>(src.height()) / height;
  const double sx = static_cast<double>(src.width()) / width;
  for (int y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, src.height() - 1);
    double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, src.width() - 1);
      double wx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        double top = (1 - wx) * src(y0, x0, c) + wx * src(y0, x1, c);
        double bot = (1 - wx) * src(y1, x0, c) + wx * src(y1, x1, c);
        out(y, x, c) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

BinaryMask resize_nearest(const BinaryMask& src, int height, int width) {
  if (src.height() == height && src.width() == width) return src;
  BinaryMask out(height, width);
  for (int y = 0; y < height; ++y) {
    int sy = std::min(src.height() - 1, static_cast<int>((y + 0.5) * src.height() / height));
    for (int x = 0; x < width; ++x) {
      int sx = std::min(src.width() - 1, static_cast<int>((x + 0.5) * src.width() / width));
      out(y, x) = src(sy, sx);
    }
  }
  return out;
}

}  // namespace mqp
