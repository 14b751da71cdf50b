#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mqp/grid.hpp"

namespace mqp::nn {

/// Single-sample C×H×W activation block, channel-major.
struct Tensor {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int channels, int height, int width, double fill = 0.0)
      : c(channels), h(height), w(width),
        data(static_cast<std::size_t>(channels) * height * width, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  double& at(int ch, int y, int x) { return data[(ch * plane()) + static_cast<std::size_t>(y) * w + x]; }
  double at(int ch, int y, int x) const {
    return data[(ch * plane()) + static_cast<std::size_t>(y) * w + x];
  }
  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

/// HWC grid (image or map) -> CHW tensor, and back.
Tensor from_grid(const Grid<double>& g);
Grid<double> to_grid(const Tensor& t);

/// Trainable parameter with its gradient accumulator.
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;

  Param() = default;
  Param(std::string n, std::vector<int> s);
  void zero_grad();
};

}  // namespace mqp::nn
