#pragma once

#include <Eigen/Core>
#include <random>
#include <vector>

#include "mqp/nn/tensor.hpp"

/// Layers keep parameters as members and write per-call state into an
/// explicit Cache, so a const forward without cache is safe to share
/// between threads.
namespace mqp::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// "Same"-padded 2-D convolution with optional dilation.
class Conv2d {
 public:
  struct Cache {
    RowMatrix cols;  // im2col of the input, (Cin·k·k) × (H·W)
    int h = 0;
    int w = 0;
  };

  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int dilation = 1);

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  Tensor backward(const Tensor& grad_out, const Cache& cache);

  /// He-normal weights, zero bias.
  void init(std::mt19937_64& rng);
  std::vector<Param*> params() { return {&weight_, &bias_}; }
  Param& weight() { return weight_; }
  Param& bias() { return bias_; }
  int out_channels() const { return out_; }

 private:
  RowMatrix im2col(const Tensor& x) const;
  void col2im(const RowMatrix& cols, Tensor& dx) const;

  int in_ = 0;
  int out_ = 0;
  int k_ = 1;
  int dilation_ = 1;
  Param weight_;
  Param bias_;
};

class Linear {
 public:
  struct Cache {
    std::vector<double> x;
  };

  Linear() = default;
  Linear(const std::string& name, int in_features, int out_features);

  std::vector<double> forward(const std::vector<double>& x, Cache* cache = nullptr) const;
  std::vector<double> backward(const std::vector<double>& grad_out, const Cache& cache);
  void init(std::mt19937_64& rng);
  std::vector<Param*> params() { return {&weight_, &bias_}; }
  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  int in_ = 0;
  int out_ = 0;
  Param weight_;
  Param bias_;
};

// Stateless element-wise and resampling ops. Backward functions take what
// they need from the forward pass explicitly.
Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& grad_out, const Tensor& output);

double sigmoid(double z);
Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& grad_out, const Tensor& output);

/// 2×2 max pooling, stride 2. Requires even spatial dims.
Tensor maxpool2(const Tensor& x, std::vector<int>* argmax = nullptr);
Tensor maxpool2_backward(const Tensor& grad_out, const std::vector<int>& argmax, int in_h, int in_w);

/// Bilinear resampling with half-pixel centers (matches resize_bilinear).
Tensor upsample_bilinear(const Tensor& x, int height, int width);
Tensor upsample_bilinear_backward(const Tensor& grad_out, int in_h, int in_w);

Tensor concat_channels(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> split_channels(const Tensor& g, int first_channels);

std::vector<double> global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const std::vector<double>& grad_out, int h, int w);

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(const std::vector<Param*>& params);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace mqp::nn
