// Straight-from-definition reference implementations used by the tests.
// Deliberately naive: explicit loops, two-pass moments, copied sub-blocks.
#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <random>
#include <vector>

#include "mqp/grid.hpp"

namespace oracle {

using Map = std::vector<std::vector<double>>;
using Mask = std::vector<std::vector<int>>;

inline Map to_rows(const mqp::SaliencyMap& m) {
  Map out(m.height(), std::vector<double>(m.width()));
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) out[y][x] = m(y, x);
  return out;
}

inline Mask to_rows(const mqp::BinaryMask& m) {
  Mask out(m.height(), std::vector<int>(m.width()));
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) out[y][x] = m(y, x) ? 1 : 0;
  return out;
}

inline double mae(const Map& p, const Mask& g) {
  double s = 0;
  int n = 0;
  for (std::size_t y = 0; y < p.size(); ++y)
    for (std::size_t x = 0; x < p[y].size(); ++x, ++n) s += std::fabs(p[y][x] - g[y][x]);
  return s / n;
}

// Maps are quantized to 8-bit levels; threshold t marks pixels whose
// quantized value is >= t.
inline double f_at(const Map& p, const Mask& g, double t) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t y = 0; y < p.size(); ++y)
    for (std::size_t x = 0; x < p[y].size(); ++x) {
      bool on = std::round(p[y][x] * 255.0) / 255.0 >= t;
      if (on && g[y][x]) tp += 1;
      if (on && !g[y][x]) fp += 1;
      if (!on && g[y][x]) fn += 1;
    }
  double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  if (precision + recall == 0) return 0.0;
  return 1.3 * precision * recall / (0.3 * precision + recall);
}

struct F {
  double max_f, mean_f, adp_f;
};

inline F f_scores(const Map& p, const Mask& g) {
  F out{0, 0, 0};
  for (int k = 0; k <= 255; ++k) {
    double f = f_at(p, g, k / 255.0);
    out.max_f = std::max(out.max_f, f);
    out.mean_f += f / 256.0;
  }
  double mean = 0;
  int n = 0;
  for (const auto& row : p)
    for (double v : row) {
      mean += v;
      ++n;
    }
  out.adp_f = f_at(p, g, std::min(1.0, 2.0 * mean / n));
  return out;
}

// ---- structure measure, following the published reference algorithm

inline double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / v.size();
}

inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v), s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

inline double object_term(const std::vector<double>& v) {
  double x = mean_of(v);
  return 2.0 * x / (x * x + 1.0 + sample_std(v) + DBL_EPSILON);
}

inline double s_object(const Map& p, const Mask& g) {
  std::vector<double> fg, bg;
  double u = 0, n = 0;
  for (std::size_t y = 0; y < p.size(); ++y)
    for (std::size_t x = 0; x < p[y].size(); ++x) {
      n += 1;
      if (g[y][x]) {
        fg.push_back(p[y][x]);
        u += 1;
      } else {
        bg.push_back(1.0 - p[y][x]);
      }
    }
  u /= n;
  return u * object_term(fg) + (1 - u) * object_term(bg);
}

inline double ssim(const std::vector<double>& a, const std::vector<double>& b) {
  double N = static_cast<double>(a.size());
  double x = mean_of(a), y = mean_of(b);
  double sx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sx += (a[i] - x) * (a[i] - x);
    sy += (b[i] - y) * (b[i] - y);
    sxy += (a[i] - x) * (b[i] - y);
  }
  sx /= N - 1 + DBL_EPSILON;
  sy /= N - 1 + DBL_EPSILON;
  sxy /= N - 1 + DBL_EPSILON;
  double alpha = 4 * x * y * sxy;
  double beta = (x * x + y * y) * (sx + sy);
  if (alpha != 0) return alpha / (beta + DBL_EPSILON);
  if (beta == 0) return 1.0;
  return 0.0;
}

inline double s_region(const Map& p, const Mask& g) {
  const int h = static_cast<int>(g.size()), w = static_cast<int>(g[0].size());
  double total = 0, sx = 0, sy = 0;
  for (int r = 1; r <= h; ++r)
    for (int c = 1; c <= w; ++c)
      if (g[r - 1][c - 1]) {
        total += 1;
        sx += c;
        sy += r;
      }
  int X = total == 0 ? static_cast<int>(std::round(w / 2.0)) : static_cast<int>(std::round(sx / total));
  int Y = total == 0 ? static_cast<int>(std::round(h / 2.0)) : static_cast<int>(std::round(sy / total));
  auto block = [&](int r0, int r1, int c0, int c1, std::vector<double>& a, std::vector<double>& b) {
    for (int r = r0; r < r1; ++r)
      for (int c = c0; c < c1; ++c) {
        a.push_back(p[r][c]);
        b.push_back(g[r][c]);
      }
  };
  double area = static_cast<double>(w) * h;
  double weights[4] = {X * Y / area, (w - X) * Y / area, X * (h - Y) / area, 0};
  weights[3] = 1 - weights[0] - weights[1] - weights[2];
  int bounds[4][4] = {{0, Y, 0, X}, {0, Y, X, w}, {Y, h, 0, X}, {Y, h, X, w}};
  double q = 0;
  for (int k = 0; k < 4; ++k) {
    std::vector<double> a, b;
    block(bounds[k][0], bounds[k][1], bounds[k][2], bounds[k][3], a, b);
    if (a.empty()) continue;
    q += weights[k] * ssim(a, b);
  }
  return q;
}

inline double s_measure(const Map& p, const Mask& g) {
  double y = 0, mp = 0, n = 0;
  for (std::size_t r = 0; r < p.size(); ++r)
    for (std::size_t c = 0; c < p[r].size(); ++c) {
      y += g[r][c];
      mp += p[r][c];
      n += 1;
    }
  y /= n;
  mp /= n;
  double q;
  if (y == 0) {
    q = 1 - mp;
  } else if (y == 1) {
    q = mp;
  } else {
    q = 0.5 * s_object(p, g) + 0.5 * s_region(p, g);
  }
  return std::clamp(q, 0.0, 1.0);
}

// ---- safeguarded fixed-point threshold, by exhaustive scans

struct Fit {
  double lam;
  int iterations;
  bool converged;
  bool empty_upper;
  bool class_balance;
  std::vector<double> trace;
};

inline Fit threshold(std::vector<double> v, double tol = 1e-4, int max_iter = 100) {
  std::sort(v.begin(), v.end());
  auto upper_count = [&](double t) {
    int c = 0;
    for (double m : v) c += m >= t;
    return c;
  };
  auto upper_mean = [&](double t) {
    double s = 0;
    int c = 0;
    for (double m : v)
      if (m >= t) {
        s += m;
        ++c;
      }
    return s / c;
  };
  double s = 0;
  for (double m : v) s += m;
  Fit f{s / v.size(), 0, false, false, false, {}};
  f.trace.push_back(f.lam);
  for (int it = 0; it < max_iter; ++it) {
    double next = (1 + upper_mean(f.lam)) / 2;
    if (upper_count(next) == 0) {
      f.empty_upper = true;
      break;
    }
    double d = std::fabs(next - f.lam);
    f.lam = next;
    f.iterations++;
    f.trace.push_back(next);
    if (d < tol) {
      f.converged = true;
      break;
    }
  }
  int up = upper_count(f.lam);
  if (up == 0 || up == static_cast<int>(v.size())) {
    f.class_balance = true;
    std::size_t n = v.size();
    f.lam = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
  }
  return f;
}

// ---- keep-1-of-W selection by brute force over explicit blocks

inline std::vector<std::size_t> window(const std::vector<double>& c, int w) {
  std::vector<std::size_t> keep;
  std::vector<std::vector<std::size_t>> blocks;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i % w == 0) blocks.emplace_back();
    blocks.back().push_back(i);
  }
  for (const auto& b : blocks) {
    std::size_t best = b.front();
    for (std::size_t i : b)
      if (c[i] > c[best]) best = i;
    keep.push_back(best);
  }
  return keep;
}

// ---- random instances

inline mqp::SaliencyMap random_map(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mqp::SaliencyMap m(h, w);
  for (double& v : m.raw()) v = u(rng);
  return m;
}

inline mqp::BinaryMask random_mask(std::mt19937_64& rng, int h, int w, double p = 0.4) {
  std::bernoulli_distribution b(p);
  mqp::BinaryMask m(h, w);
  for (auto& v : m.raw()) v = b(rng);
  return m;
}

}  // namespace oracle
