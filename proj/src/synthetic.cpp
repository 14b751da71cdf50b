#include "mqp/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "mqp/dataset.hpp"
#include "mqp/errors.hpp"
#include "mqp/flow_io.hpp"
#include "mqp/grid.hpp"
#include "mqp/image_io.hpp"

namespace fs = std::filesystem;

namespace mqp::synth {

void SynthSpec::validate() const {
  if (videos < 1 || frames < 1) throw ConfigError("synthetic spec must request at least one frame");
  if (height < 8 || width < 8) throw ConfigError("synthetic frames must be at least 8x8");
  if (min_segment < 1 || max_segment < min_segment) throw ConfigError("invalid segment length range");
  if (hq_speed_min < 0 || hq_speed_max < hq_speed_min) throw ConfigError("invalid speed range");
  if (flow_fattening < 0) throw ConfigError("flow_fattening must be >= 0");
  for (double e : {target_hq_error, target_lq_error})
    if (e < 0 || e > 1) throw ConfigError("target errors must lie in [0,1]");
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"videos", s.videos},
       {"frames", s.frames},
       {"height", s.height},
       {"width", s.width},
       {"seed", s.seed},
       {"min_segment", s.min_segment},
       {"max_segment", s.max_segment},
       {"hq_speed_min", s.hq_speed_min},
       {"hq_speed_max", s.hq_speed_max},
       {"camera_speed", s.camera_speed},
       {"deformation", s.deformation},
       {"flow_fattening", s.flow_fattening},
       {"target_hq_error", s.target_hq_error},
       {"target_lq_error", s.target_lq_error},
       {"video_prefix", s.video_prefix}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  SynthSpec d;
  s.videos = j.value("videos", d.videos);
  s.frames = j.value("frames", d.frames);
  s.height = j.value("height", d.height);
  s.width = j.value("width", d.width);
  s.seed = j.value("seed", d.seed);
  s.min_segment = j.value("min_segment", d.min_segment);
  s.max_segment = j.value("max_segment", d.max_segment);
  s.hq_speed_min = j.value("hq_speed_min", d.hq_speed_min);
  s.hq_speed_max = j.value("hq_speed_max", d.hq_speed_max);
  s.camera_speed = j.value("camera_speed", d.camera_speed);
  s.deformation = j.value("deformation", d.deformation);
  s.flow_fattening = j.value("flow_fattening", d.flow_fattening);
  s.target_hq_error = j.value("target_hq_error", d.target_hq_error);
  s.target_lq_error = j.value("target_lq_error", d.target_lq_error);
  s.video_prefix = j.value("video_prefix", d.video_prefix);
}

namespace {

using Vec2 = std::array<double, 2>;
using Color = std::array<double, 3>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Rng {
  std::mt19937_64 g;
  explicit Rng(std::uint64_t seed) : g(seed) {}
  double uniform() { return static_cast<double>(g() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int integer(int a, int b) { return a + static_cast<int>(g() % static_cast<std::uint64_t>(b - a + 1)); }
};

Color hsv(double h, double s, double v) {
  double r = std::fabs(std::fmod(h * 6.0, 6.0));
  auto channel = [&](double n) {
    double k = std::fmod(n + r, 6.0);
    return v - v * s * std::clamp(std::min(k, 4.0 - k), 0.0, 1.0);
  };
  return {channel(5.0), channel(3.0), channel(1.0)};
}

struct Background {
  Color base{};
  struct Wave {
    double fx, fy, phase;
    Color amp;
  };
  std::vector<Wave> waves;

  Background(Rng& rng, int size) {
    double g = rng.uniform(0.35, 0.6);
    for (auto& c : base) c = g + rng.uniform(-0.05, 0.05);
    for (int i = 0; i < 4; ++i) {
      double angle = rng.uniform(0, kTwoPi);
      double freq = kTwoPi * rng.uniform(2.0, 7.0) / size;
      double a = rng.uniform(0.03, 0.07);
      waves.push_back({freq * std::cos(angle), freq * std::sin(angle), rng.uniform(0, kTwoPi),
                       {a * rng.uniform(0.8, 1.2), a * rng.uniform(0.8, 1.2), a * rng.uniform(0.8, 1.2)}});
    }
  }

  Color at(double x, double y) const {
    Color c = base;
    for (const auto& w : waves) {
      double s = std::sin(w.fx * x + w.fy * y + w.phase);
      for (int k = 0; k < 3; ++k) c[k] += w.amp[k] * s;
    }
    for (auto& v : c) v = std::clamp(v, 0.0, 1.0);
    return c;
  }
};

struct Shape {
  Color color{};
  double rx = 0, ry = 0, lobe_amp = 0, lobe_phase = 0, stripe_f = 0, stripe_dir = 0;
  int lobes = 3;

  Shape(Rng& rng, int size) {
    color = hsv(rng.uniform(), rng.uniform(0.75, 1.0), rng.uniform(0.8, 1.0));
    rx = size * rng.uniform(0.12, 0.2);
    ry = size * rng.uniform(0.12, 0.2);
    lobes = rng.integer(2, 5);
    lobe_amp = rng.uniform(0.05, 0.15);
    lobe_phase = rng.uniform(0, kTwoPi);
    stripe_f = kTwoPi * rng.uniform(0.15, 0.35);
    stripe_dir = rng.uniform(0, kTwoPi);
  }

  double extent() const { return std::max(rx, ry) * (1.0 + lobe_amp); }

  bool inside(double ox, double oy) const {
    double r = std::hypot(ox / rx, oy / ry);
    double theta = std::atan2(oy, ox);
    return r <= 1.0 + lobe_amp * std::sin(lobes * theta + lobe_phase);
  }

  Color at(double ox, double oy) const {
    double s = 0.1 * std::sin(stripe_f * (ox * std::cos(stripe_dir) + oy * std::sin(stripe_dir)));
    Color c = color;
    for (auto& v : c) v = std::clamp(v + s, 0.0, 1.0);
    return c;
  }
};

struct Deformation {
  double amp = 0, wx = 0, wy = 0, px = 0, py = 0;
  Vec2 at(double x, double y) const {
    if (amp == 0) return {0, 0};
    return {amp * std::sin(wx * y + px), amp * std::sin(wy * x + py)};
  }
};

struct FrameState {
  Vec2 pos{};
  double scale = 1.0;
  Vec2 camera{};
  Deformation deform;
};

SaliencyMap box_blur(const SaliencyMap& m, int radius) {
  if (radius <= 0) return m;
  const int h = m.height(), w = m.width();
  SaliencyMap tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int d = -radius; d <= radius; ++d) s += m(y, std::clamp(x + d, 0, w - 1));
      tmp(y, x) = s / (2 * radius + 1);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int d = -radius; d <= radius; ++d) s += tmp(std::clamp(y + d, 0, h - 1), x);
      out(y, x) = s / (2 * radius + 1);
    }
  return out;
}

BinaryMask morph(const BinaryMask& m, int radius, bool dilate) {
  if (radius <= 0) return m;
  const int h = m.height(), w = m.width();
  BinaryMask out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool any = false, all = true;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          int yy = y + dy, xx = x + dx;
          bool v = yy >= 0 && yy < h && xx >= 0 && xx < w && m(yy, xx);
          any = any || v;
          all = all && v;
        }
      out(y, x) = dilate ? any : all;
    }
  return out;
}

SaliencyMap simulate_target(const BinaryMask& gt, bool high_quality, double error, Rng& rng) {
  const int h = gt.height(), w = gt.width();
  if (high_quality) {
    SaliencyMap m = box_blur(to_map(gt), 1);
    for (double& v : m.raw()) v *= 1.0 - 0.3 * error;
    return m;
  }
  double angle = rng.uniform(0, kTwoPi);
  int dx = static_cast<int>(std::lround(error * 6.0 * std::cos(angle)));
  int dy = static_cast<int>(std::lround(error * 6.0 * std::sin(angle)));
  BinaryMask shifted(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int sy = y - dy, sx = x - dx;
      shifted(y, x) = (sy >= 0 && sy < h && sx >= 0 && sx < w) ? gt(sy, sx) : 0;
    }
  shifted = morph(shifted, static_cast<int>(std::lround(error * 2.0)), rng.uniform() < 0.5);

  double br = std::max(1.0, error * 0.2 * std::min(h, w));
  double bx = rng.uniform(br, w - br), by = rng.uniform(br, h - br);
  double fp = 0.3 + 0.6 * error;
  SaliencyMap m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double obj = shifted(y, x) * (1.0 - 0.35 * error);
      double blob = std::hypot(x - bx, y - by) <= br ? fp : 0.0;
      m(y, x) = std::max(obj, blob);
    }
  m = box_blur(m, 1 + static_cast<int>(std::lround(2.0 * error)));
  for (double& v : m.raw()) v = std::clamp(v, 0.0, 1.0);
  return m;
}

std::string stem(int t) {
  std::ostringstream s;
  s << std::setw(5) << std::setfill('0') << t;
  return s.str();
}

}  // namespace

SynthSummary gen_synthetic(const SynthSpec& spec, const fs::path& root) {
  spec.validate();
  const auto layout = data::CorpusLayout::under(root);
  const int H = spec.height, W = spec.width, T = spec.frames;
  const int size = std::min(H, W);
  Rng rng(spec.seed);
  SynthSummary summary;

  std::ofstream regimes_out;
  fs::create_directories(root);
  regimes_out.open(root / "regimes.csv");
  regimes_out << "frame_id,regime\n";

  for (int v = 0; v < spec.videos; ++v) {
    std::ostringstream vname;
    vname << spec.video_prefix << std::setw(2) << std::setfill('0') << v;
    const std::string video = vname.str();

    Background bg(rng, size);
    Shape shape(rng, size);

    std::vector<bool> hq(T);
    {
      bool regime = rng.uniform() < 0.5;
      int t = 0;
      while (t < T) {
        int len = rng.integer(spec.min_segment, spec.max_segment);
        for (int k = 0; k < len && t < T; ++k) hq[t++] = regime;
        regime = !regime;
      }
    }

    // motion between frame t and t+1 follows the regime of frame t
    std::vector<FrameState> st(T);
    const double margin = shape.extent() * 1.15 + 2.0;
    auto inside = [&](const Vec2& p) {
      return p[0] >= margin && p[0] <= W - 1 - margin && p[1] >= margin && p[1] <= H - 1 - margin;
    };
    st[0].pos = {rng.uniform(0.4, 0.6) * (W - 1), rng.uniform(0.4, 0.6) * (H - 1)};
    Vec2 velocity{0, 0};
    for (int t = 0; t + 1 < T; ++t) {
      FrameState& cur = st[t];
      FrameState& next = st[t + 1];
      next = cur;
      next.deform = {};
      if (hq[t]) {
        if (t == 0 || !hq[t - 1]) {
          double a = rng.uniform(0, kTwoPi), s = rng.uniform(spec.hq_speed_min, spec.hq_speed_max);
          velocity = {s * std::cos(a), s * std::sin(a)};
        }
        for (int k = 0; k < 2; ++k) {
          Vec2 p = cur.pos;
          p[k] += velocity[k];
          if (!inside(p)) velocity[k] = -velocity[k];
        }
        next.pos = {cur.pos[0] + velocity[0], cur.pos[1] + velocity[1]};
        if (!inside(next.pos)) {
          velocity = {0, 0};
          next.pos = cur.pos;
        }
      } else {
        double a = rng.uniform(0, kTwoPi), s = spec.camera_speed * rng.uniform(0.5, 1.5);
        Vec2 cam{s * std::cos(a), s * std::sin(a)};
        Vec2 jitter{rng.uniform(-0.75, 0.75), rng.uniform(-0.75, 0.75)};
        Vec2 p{cur.pos[0] - cam[0] + jitter[0], cur.pos[1] - cam[1] + jitter[1]};
        for (int k = 0; k < 2; ++k) {
          if (p[k] < margin || p[k] > (k == 0 ? W : H) - 1 - margin) {
            cam[k] = -cam[k];
            p[k] = cur.pos[k] - cam[k] + jitter[k];
          }
        }
        if (!inside(p)) p = cur.pos;
        next.pos = p;
        next.camera = {cur.camera[0] + cam[0], cur.camera[1] + cam[1]};
        next.scale = rng.uniform(0.92, 1.08);
        const double f = kTwoPi / size;
        next.deform = {spec.deformation * rng.uniform(0.7, 1.3), f * rng.uniform(1.0, 2.5),
                       f * rng.uniform(1.0, 2.5), rng.uniform(0, kTwoPi), rng.uniform(0, kTwoPi)};
      }
    }

    std::vector<BinaryMask> masks;
    for (int t = 0; t < T; ++t) {
      const FrameState& s = st[t];
      RgbImage frame(H, W, 3);
      BinaryMask mask(H, W);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double ox = (x - s.pos[0]) / s.scale, oy = (y - s.pos[1]) / s.scale;
          Color c;
          if (shape.inside(ox, oy)) {
            c = shape.at(ox, oy);
            mask(y, x) = 1;
          } else {
            Vec2 d = s.deform.at(x, y);
            c = bg.at(x + s.camera[0] + d[0], y + s.camera[1] + d[1]);
          }
          for (int k = 0; k < 3; ++k) frame(y, x, k) = c[k];
        }
      const std::string id = video + "/" + stem(t);
      io::write_rgb(data::map_path(layout.frames, id), frame);
      io::write_mask(data::map_path(layout.gt, id), mask);
      double err = hq[t] ? spec.target_hq_error : spec.target_lq_error;
      io::write_map(data::map_path(layout.sota, id), simulate_target(mask, hq[t], err, rng));
      masks.push_back(std::move(mask));
      summary.regimes.push_back({id, static_cast<bool>(hq[t])});
      regimes_out << id << ',' << (hq[t] ? "hq" : "lq") << '\n';
      ++summary.frames;
      (hq[t] ? summary.hq_frames : summary.lq_frames)++;
    }

    const int r = static_cast<int>(std::ceil(spec.flow_fattening));
    for (int t = 0; t + 1 < T; ++t) {
      const FrameState& a = st[t];
      const FrameState& b = st[t + 1];
      const double ratio = b.scale / a.scale;
      auto object_flow = [&](int x, int y) -> Vec2 {
        return {b.pos[0] - a.pos[0] + (ratio - 1.0) * (x - a.pos[0]),
                b.pos[1] - a.pos[1] + (ratio - 1.0) * (y - a.pos[1])};
      };
      auto background_flow = [&](int x, int y) -> Vec2 {
        Vec2 da = a.deform.at(x, y), db = b.deform.at(x, y);
        return {-(b.camera[0] - a.camera[0]) - (db[0] - da[0]), -(b.camera[1] - a.camera[1]) - (db[1] - da[1])};
      };
      const BinaryMask& m = masks[t];
      flow::FlowField f(H, W);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          Vec2 fl;
          if (m(y, x)) {
            fl = object_flow(x, y);
          } else {
            fl = background_flow(x, y);
            double best = spec.flow_fattening + 1.0;
            int qx = -1, qy = -1;
            for (int dy = -r; dy <= r; ++dy)
              for (int dx = -r; dx <= r; ++dx) {
                int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= H || xx < 0 || xx >= W || !m(yy, xx)) continue;
                double d = std::hypot(dx, dy);
                if (d < best) {
                  best = d;
                  qx = xx;
                  qy = yy;
                }
              }
            if (qx >= 0 && best <= spec.flow_fattening) {
              double wgt = 1.0 - best / (spec.flow_fattening + 1.0);
              Vec2 of = object_flow(qx, qy);
              fl = {fl[0] + wgt * (of[0] - fl[0]), fl[1] + wgt * (of[1] - fl[1])};
            }
          }
          f.u(y, x) = static_cast<float>(fl[0]);
          f.v(y, x) = static_cast<float>(fl[1]);
        }
      flow::write_flo(layout.flows / (video + "/" + stem(t) + ".flo"), f);
      ++summary.flows;
    }
  }

  std::ofstream(root / "spec.json") << nlohmann::json(spec).dump(2) << '\n';
  return summary;
}

std::vector<FrameRegime> read_regimes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDependency("regime table not found: " + path.string());
  std::vector<FrameRegime> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    out.push_back({line.substr(0, comma), line.substr(comma + 1) == "hq"});
  }
  return out;
}

}  // namespace mqp::synth
