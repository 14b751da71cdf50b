#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mqp/errors.hpp"

namespace mqp {

/// Dense row-major H×W(×C) array. Value semantics; cheap to move.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < 1 || width < 1 || channels < 1) {
      throw InvalidInput("grid dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  T& operator()(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  const T& operator()(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return height_ == other.height() && width_ == other.width() &&
           channels_ == other.channels();
  }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

/// Unit-interval saliency values, single channel.
using SaliencyMap = Grid<double>;
/// Strictly {0,1} values, single channel.
using BinaryMask = Grid<std::uint8_t>;
/// Three interleaved channels in [0,1], RGB order.
using RgbImage = Grid<double>;

/// Throws InvalidInput unless every value is finite and in [0,1].
void validate_map(const SaliencyMap& map);
void validate_mask(const BinaryMask& mask);

/// Pixels >= threshold become foreground.
BinaryMask binarize(const SaliencyMap& map, double threshold = 0.5);
SaliencyMap to_map(const BinaryMask& mask);

/// Bilinear resampling with half-pixel centers; works on any channel count.
Grid<double> resize_bilinear(const Grid<double>& src, int height, int width);
BinaryMask resize_nearest(const BinaryMask& src, int height, int width);

template <typename T>
Grid<T> flip_horizontal(const Grid<T>& src) {
  Grid<T> out(src.height(), src.width(), src.channels());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < src.channels(); ++c)
        out(y, x, c) = src(y, src.width() - 1 - x, c);
  return out;
}

template <typename A, typename B>
void require_same_dims(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw InvalidInput(std::string(what) + ": dimension mismatch (" +
                       std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                       " vs " + std::to_string(b.height()) + "x" +
                       std::to_string(b.width()) + ")");
  }
}

}  // namespace mqp
