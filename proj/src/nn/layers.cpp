#include "mqp/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mqp::nn {

Tensor from_grid(const Grid<double>& g) {
  Tensor t(g.channels(), g.height(), g.width());
  for (int c = 0; c < g.channels(); ++c)
    for (int y = 0; y < g.height(); ++y)
      for (int x = 0; x < g.width(); ++x) t.at(c, y, x) = g(y, x, c);
  return t;
}

Grid<double> to_grid(const Tensor& t) {
  Grid<double> g(t.h, t.w, t.c);
  for (int c = 0; c < t.c; ++c)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x) g(y, x, c) = t.at(c, y, x);
  return g;
}

Param::Param(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
  std::size_t count = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                      [](std::size_t a, int b) { return a * b; });
  value.assign(count, 0.0);
  grad.assign(count, 0.0);
}

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int dilation)
    : in_(in_channels), out_(out_channels), k_(kernel), dilation_(dilation),
      weight_(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias_(name + ".bias", {out_channels}) {}

void Conv2d::init(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (in_ * k_ * k_)));
  for (double& w : weight_.value) w = normal(rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

RowMatrix Conv2d::im2col(const Tensor& x) const {
  const int hw = x.h * x.w;
  const int half = k_ / 2;
  RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(in_) * k_ * k_, hw);
  for (int ci = 0; ci < in_; ++ci) {
    for (int ky = 0; ky < k_; ++ky) {
      const int dy = (ky - half) * dilation_;
      for (int kx = 0; kx < k_; ++kx) {
        const int dx = (kx - half) * dilation_;
        double* row = cols.row((ci * k_ + ky) * k_ + kx).data();
        const int y_lo = std::max(0, -dy), y_hi = std::min(x.h, x.h - dy);
        const int x_lo = std::max(0, -dx), x_hi = std::min(x.w, x.w - dx);
        for (int y = y_lo; y < y_hi; ++y) {
          const double* src = &x.data[ci * x.plane() + static_cast<std::size_t>(y + dy) * x.w];
          double* dst = row + static_cast<std::ptrdiff_t>(y) * x.w;
          for (int xx = x_lo; xx < x_hi; ++xx) dst[xx] = src[xx + dx];
        }
      }
    }
  }
  return cols;
}

void Conv2d::col2im(const RowMatrix& cols, Tensor& dx) const {
  const int half = k_ / 2;
  for (int ci = 0; ci < in_; ++ci) {
    for (int ky = 0; ky < k_; ++ky) {
      const int dy = (ky - half) * dilation_;
      for (int kx = 0; kx < k_; ++kx) {
        const int ddx = (kx - half) * dilation_;
        const double* row = cols.row((ci * k_ + ky) * k_ + kx).data();
        const int y_lo = std::max(0, -dy), y_hi = std::min(dx.h, dx.h - dy);
        const int x_lo = std::max(0, -ddx), x_hi = std::min(dx.w, dx.w - ddx);
        for (int y = y_lo; y < y_hi; ++y) {
          double* dst = &dx.data[ci * dx.plane() + static_cast<std::size_t>(y + dy) * dx.w];
          const double* src = row + static_cast<std::ptrdiff_t>(y) * dx.w;
          for (int xx = x_lo; xx < x_hi; ++xx) dst[xx + ddx] += src[xx];
        }
      }
    }
  }
}

Tensor Conv2d::forward(const Tensor& x, Cache* cache) const {
  if (x.c != in_) {
    throw IntegrationError(weight_.name + ": expected " + std::to_string(in_) +
                           " input channels, got " + std::to_string(x.c));
  }
  RowMatrix cols = im2col(x);
  Tensor out(out_, x.h, x.w);
  Eigen::Map<const RowMatrix> w(weight_.value.data(), out_, static_cast<Eigen::Index>(in_) * k_ * k_);
  Eigen::Map<RowMatrix> y(out.data.data(), out_, static_cast<Eigen::Index>(x.h) * x.w);
  Eigen::Map<const Eigen::VectorXd> b(bias_.value.data(), out_);
  y.noalias() = w * cols;
  y.colwise() += b;
  if (cache) {
    cache->cols = std::move(cols);
    cache->h = x.h;
    cache->w = x.w;
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out, const Cache& cache) {
  const Eigen::Index kk = static_cast<Eigen::Index>(in_) * k_ * k_;
  const Eigen::Index hw = static_cast<Eigen::Index>(cache.h) * cache.w;
  Eigen::Map<const RowMatrix> g(grad_out.data.data(), out_, hw);
  Eigen::Map<const RowMatrix> w(weight_.value.data(), out_, kk);
  Eigen::Map<RowMatrix> dw(weight_.grad.data(), out_, kk);
  Eigen::Map<Eigen::VectorXd> db(bias_.grad.data(), out_);
  dw.noalias() += g * cache.cols.transpose();
  db += g.rowwise().sum();
  RowMatrix dcols = w.transpose() * g;
  Tensor dx(in_, cache.h, cache.w);
  col2im(dcols, dx);
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(const std::string& name, int in_features, int out_features)
    : in_(in_features), out_(out_features),
      weight_(name + ".weight", {out_features, in_features}),
      bias_(name + ".bias", {out_features}) {}

void Linear::init(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / in_));
  for (double& w : weight_.value) w = normal(rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

std::vector<double> Linear::forward(const std::vector<double>& x, Cache* cache) const {
  if (static_cast<int>(x.size()) != in_) throw IntegrationError(weight_.name + ": bad input size");
  std::vector<double> y(bias_.value);
  for (int o = 0; o < out_; ++o)
    for (int i = 0; i < in_; ++i) y[o] += weight_.value[o * in_ + i] * x[i];
  if (cache) cache->x = x;
  return y;
}

std::vector<double> Linear::backward(const std::vector<double>& grad_out, const Cache& cache) {
  std::vector<double> dx(in_, 0.0);
  for (int o = 0; o < out_; ++o) {
    bias_.grad[o] += grad_out[o];
    for (int i = 0; i < in_; ++i) {
      weight_.grad[o * in_ + i] += grad_out[o] * cache.x[i];
      dx[i] += grad_out[o] * weight_.value[o * in_ + i];
    }
  }
  return dx;
}

// ---------------------------------------------------------------- element-wise

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& output) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (output.data[i] <= 0.0) g.data[i] = 0.0;
  return g;
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = sigmoid(v);
  return y;
}

Tensor sigmoid_backward(const Tensor& grad_out, const Tensor& output) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g.data[i] *= output.data[i] * (1.0 - output.data[i]);
  return g;
}

// ---------------------------------------------------------------- pooling

Tensor maxpool2(const Tensor& x, std::vector<int>* argmax) {
  if (x.h % 2 || x.w % 2) throw ConfigError("maxpool2 needs even spatial dims");
  Tensor y(x.c, x.h / 2, x.w / 2);
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t o = 0;
  for (int c = 0; c < x.c; ++c)
    for (int yy = 0; yy < y.h; ++yy)
      for (int xx = 0; xx < y.w; ++xx, ++o) {
        int best = -1;
        double best_v = -INFINITY;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            int idx = static_cast<int>(c * x.plane() + (2 * yy + dy) * x.w + 2 * xx + dx);
            if (x.data[idx] > best_v) {
              best_v = x.data[idx];
              best = idx;
            }
          }
        y.data[o] = best_v;
        if (argmax) (*argmax)[o] = best;
      }
  return y;
}

Tensor maxpool2_backward(const Tensor& grad_out, const std::vector<int>& argmax, int in_h, int in_w) {
  Tensor dx(grad_out.c, in_h, in_w);
  for (std::size_t i = 0; i < grad_out.size(); ++i) dx.data[argmax[i]] += grad_out.data[i];
  return dx;
}

// ---------------------------------------------------------------- resampling

namespace {

struct AxisTaps {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

AxisTaps axis_taps(int in, int out) {
  AxisTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double f = std::clamp((i + 0.5) * scale - 0.5, 0.0, in - 1.0);
    t.lo[i] = static_cast<int>(f);
    t.hi[i] = std::min(t.lo[i] + 1, in - 1);
    t.frac[i] = f - t.lo[i];
  }
  return t;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& x, int height, int width) {
  if (x.h == height && x.w == width) return x;
  auto ty = axis_taps(x.h, height);
  auto tx = axis_taps(x.w, width);
  Tensor y(x.c, height, width);
  for (int c = 0; c < x.c; ++c)
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) {
        double wy = ty.frac[i], wx = tx.frac[j];
        double top = (1 - wx) * x.at(c, ty.lo[i], tx.lo[j]) + wx * x.at(c, ty.lo[i], tx.hi[j]);
        double bot = (1 - wx) * x.at(c, ty.hi[i], tx.lo[j]) + wx * x.at(c, ty.hi[i], tx.hi[j]);
        y.at(c, i, j) = (1 - wy) * top + wy * bot;
      }
  return y;
}

Tensor upsample_bilinear_backward(const Tensor& grad_out, int in_h, int in_w) {
  if (grad_out.h == in_h && grad_out.w == in_w) return grad_out;
  auto ty = axis_taps(in_h, grad_out.h);
  auto tx = axis_taps(in_w, grad_out.w);
  Tensor dx(grad_out.c, in_h, in_w);
  for (int c = 0; c < grad_out.c; ++c)
    for (int i = 0; i < grad_out.h; ++i)
      for (int j = 0; j < grad_out.w; ++j) {
        double g = grad_out.at(c, i, j);
        double wy = ty.frac[i], wx = tx.frac[j];
        dx.at(c, ty.lo[i], tx.lo[j]) += g * (1 - wy) * (1 - wx);
        dx.at(c, ty.lo[i], tx.hi[j]) += g * (1 - wy) * wx;
        dx.at(c, ty.hi[i], tx.lo[j]) += g * wy * (1 - wx);
        dx.at(c, ty.hi[i], tx.hi[j]) += g * wy * wx;
      }
  return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.h != b.h || a.w != b.w) throw IntegrationError("concat: spatial size mismatch");
  Tensor y(a.c + b.c, a.h, a.w);
  std::copy(a.data.begin(), a.data.end(), y.data.begin());
  std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return y;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& g, int first_channels) {
  Tensor a(first_channels, g.h, g.w), b(g.c - first_channels, g.h, g.w);
  std::copy(g.data.begin(), g.data.begin() + static_cast<std::ptrdiff_t>(a.size()), a.data.begin());
  std::copy(g.data.begin() + static_cast<std::ptrdiff_t>(a.size()), g.data.end(), b.data.begin());
  return {std::move(a), std::move(b)};
}

std::vector<double> global_avg_pool(const Tensor& x) {
  std::vector<double> y(x.c, 0.0);
  for (int c = 0; c < x.c; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.plane(); ++i) acc += x.data[c * x.plane() + i];
    y[c] = acc / static_cast<double>(x.plane());
  }
  return y;
}

Tensor global_avg_pool_backward(const std::vector<double>& grad_out, int h, int w) {
  Tensor dx(static_cast<int>(grad_out.size()), h, w);
  const double inv = 1.0 / (static_cast<double>(h) * w);
  for (int c = 0; c < dx.c; ++c)
    std::fill(dx.data.begin() + static_cast<std::ptrdiff_t>(c * dx.plane()),
              dx.data.begin() + static_cast<std::ptrdiff_t>((c + 1) * dx.plane()), grad_out[c] * inv);
  return dx;
}

// ---------------------------------------------------------------- Adam

void Adam::step(const std::vector<Param*>& params) {
  if (m_.empty()) {
    for (auto* p : params) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace mqp::nn
