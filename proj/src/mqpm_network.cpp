#include "mqp/mqpm_network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>

namespace mqp::mqpm {

using nn::Conv2d;
using nn::Tensor;

// ---------------------------------------------------------------- config

NetworkConfig NetworkConfig::resolved() const {
  NetworkConfig c = *this;
  if (c.encoder == "vgg16") {
    c.encoder_channels = {64, 128, 256, 512, 512};
    c.encoder_convs = {2, 2, 3, 3, 3};
  } else if (c.encoder == "vgg-micro") {
    c.encoder_channels = {8, 16, 32, 32};
    c.encoder_convs = {1, 1, 1, 1};
  }
  if (c.encoder_channels.size() < 3) throw ConfigError("encoder needs at least three stages");
  if (c.encoder_convs.size() != c.encoder_channels.size()) {
    throw ConfigError("encoder_convs and encoder_channels differ in length");
  }
  for (std::size_t i = 0; i < c.encoder_channels.size(); ++i) {
    if (c.encoder_channels[i] < 1 || c.encoder_convs[i] < 1) {
      throw ConfigError("encoder stage widths and conv counts must be positive");
    }
  }
  if (c.dilation_rates.empty()) throw ConfigError("dilation_rates must not be empty");
  for (std::size_t i = 0; i < c.dilation_rates.size(); ++i) {
    if (c.dilation_rates[i] < 1) throw ConfigError("dilation rates must be positive");
    if (i > 0 && c.dilation_rates[i] <= c.dilation_rates[i - 1]) {
      throw ConfigError("dilation rates must be strictly increasing");
    }
  }
  if (c.attention_width < 1) throw ConfigError("attention_width must be positive");
  if (c.decoder_channels.size() != 3) throw ConfigError("decoder_channels needs three entries");
  for (int d : c.decoder_channels)
    if (d < 1) throw ConfigError("decoder channels must be positive");
  int stride = c.stride_product();
  if (c.input_height < 1 || c.input_width < 1 || c.input_height % stride || c.input_width % stride) {
    throw ConfigError("input size " + std::to_string(c.input_height) + "x" +
                      std::to_string(c.input_width) + " is not divisible by the encoder stride " +
                      std::to_string(stride));
  }
  return c;
}

int NetworkConfig::stride_product() const {
  std::size_t stages = encoder_channels.size();
  if (encoder == "vgg16") stages = 5;
  if (encoder == "vgg-micro") stages = 4;
  return stages == 0 ? 1 : 1 << (stages - 1);
}

void MqpmConfig::validate() const {
  (void)net.resolved();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = {{"input_height", c.input_height},
       {"input_width", c.input_width},
       {"encoder", c.encoder},
       {"encoder_channels", c.encoder_channels},
       {"encoder_convs", c.encoder_convs},
       {"dilation_rates", c.dilation_rates},
       {"attention_width", c.attention_width},
       {"decoder_channels", c.decoder_channels},
       {"encoder_weights", c.encoder_weights}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  NetworkConfig d;
  c.input_height = j.value("input_height", d.input_height);
  c.input_width = j.value("input_width", d.input_width);
  c.encoder = j.value("encoder", d.encoder);
  c.encoder_channels = j.value("encoder_channels", d.encoder_channels);
  c.encoder_convs = j.value("encoder_convs", d.encoder_convs);
  c.dilation_rates = j.value("dilation_rates", d.dilation_rates);
  c.attention_width = j.value("attention_width", d.attention_width);
  c.decoder_channels = j.value("decoder_channels", d.decoder_channels);
  c.encoder_weights = j.value("encoder_weights", d.encoder_weights);
}

void to_json(nlohmann::json& j, const MqpmConfig& c) {
  j = {{"net", c.net},
       {"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"hflip_augment", c.hflip_augment},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, MqpmConfig& c) {
  MqpmConfig d;
  c.net = j.value("net", d.net);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.epochs = j.value("epochs", d.epochs);
  c.hflip_augment = j.value("hflip_augment", d.hflip_augment);
  c.seed = j.value("seed", d.seed);
}

// ---------------------------------------------------------------- attention

DilatedAttention::DilatedAttention(const std::string& name, int channels,
                                   const std::vector<int>& rates, int width)
    : fuse_(name + ".fuse", width * static_cast<int>(rates.size()), 1, 1) {
  for (std::size_t i = 0; i < rates.size(); ++i) {
    branches_.emplace_back(name + ".branch" + std::to_string(i), channels, width, 3, rates[i]);
  }
}

void DilatedAttention::init(std::mt19937_64& rng) {
  for (auto& b : branches_) b.init(rng);
  fuse_.init(rng);
}

std::vector<nn::Param*> DilatedAttention::params() {
  std::vector<nn::Param*> out;
  for (auto& b : branches_)
    for (auto* p : b.params()) out.push_back(p);
  for (auto* p : fuse_.params()) out.push_back(p);
  return out;
}

Tensor DilatedAttention::apply_gate(const Tensor& x, const Tensor& gate) {
  Tensor y = x;
  for (int c = 0; c < x.c; ++c)
    for (std::size_t i = 0; i < x.plane(); ++i) {
      auto k = c * x.plane() + i;
      y.data[k] = x.data[k] * gate.data[i] + x.data[k];
    }
  return y;
}

Tensor DilatedAttention::attention_map(const Tensor& x) const {
  Tensor cat;
  for (const auto& b : branches_) {
    Tensor out = nn::relu(b.forward(x));
    cat = cat.size() ? nn::concat_channels(cat, out) : std::move(out);
  }
  return nn::sigmoid(fuse_.forward(cat));
}

Tensor DilatedAttention::forward(const Tensor& x, Cache* cache) const {
  if (!cache) return apply_gate(x, attention_map(x));
  cache->input = x;
  cache->branch.assign(branches_.size(), {});
  cache->branch_out.assign(branches_.size(), {});
  Tensor cat;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    cache->branch_out[i] = nn::relu(branches_[i].forward(x, &cache->branch[i]));
    cat = cat.size() ? nn::concat_channels(cat, cache->branch_out[i]) : cache->branch_out[i];
  }
  cache->gate = nn::sigmoid(fuse_.forward(cat, &cache->fuse));
  return apply_gate(x, cache->gate);
}

Tensor DilatedAttention::backward(const Tensor& grad_out, const Cache& cache) {
  const Tensor& x = cache.input;
  const Tensor& gate = cache.gate;
  Tensor dx(x.c, x.h, x.w);
  Tensor dgate(1, x.h, x.w);
  for (int c = 0; c < x.c; ++c)
    for (std::size_t i = 0; i < x.plane(); ++i) {
      auto k = c * x.plane() + i;
      dx.data[k] = grad_out.data[k] * (gate.data[i] + 1.0);
      dgate.data[i] += grad_out.data[k] * x.data[k];
    }
  Tensor dcat = fuse_.backward(nn::sigmoid_backward(dgate, gate), cache.fuse);
  for (std::size_t b = branches_.size(); b-- > 0;) {
    Tensor part;
    if (b == 0) {
      part = std::move(dcat);
    } else {
      auto [rest, last] = nn::split_channels(dcat, dcat.c - cache.branch_out[b].c);
      dcat = std::move(rest);
      part = std::move(last);
    }
    Tensor g = branches_[b].backward(nn::relu_backward(part, cache.branch_out[b]), cache.branch[b]);
    for (std::size_t k = 0; k < dx.size(); ++k) dx.data[k] += g.data[k];
  }
  return dx;
}

// ---------------------------------------------------------------- localization

LocalizationNet::LocalizationNet(const NetworkConfig& config, std::uint64_t seed)
    : config_(config.resolved()) {
  const auto& ch = config_.encoder_channels;
  const int n = static_cast<int>(ch.size());
  int in = 3;
  for (int s = 0; s < n; ++s) {
    std::vector<Conv2d> convs;
    for (int i = 0; i < config_.encoder_convs[s]; ++i) {
      convs.emplace_back("encoder.stage" + std::to_string(s) + ".conv" + std::to_string(i), in, ch[s], 3);
      in = ch[s];
    }
    stages_.push_back(std::move(convs));
  }
  for (int k = 0; k < 3; ++k) {
    attention_[k] = DilatedAttention("attention" + std::to_string(k), ch[n - 3 + k],
                                     config_.dilation_rates, config_.attention_width);
  }
  const auto& dc = config_.decoder_channels;
  decoder_[0] = Conv2d("decoder0", ch[n - 1], dc[0], 3);
  decoder_[1] = Conv2d("decoder1", dc[0] + ch[n - 2], dc[1], 3);
  decoder_[2] = Conv2d("decoder2", dc[1] + ch[n - 3], dc[2], 3);
  head_ = Conv2d("head", dc[2], 1, 1);

  std::mt19937_64 rng(seed);
  for (auto& st : stages_)
    for (auto& c : st) c.init(rng);
  for (auto& a : attention_) a.init(rng);
  for (auto& d : decoder_) d.init(rng);
  head_.init(rng);
}

std::vector<nn::Param*> LocalizationNet::params() {
  std::vector<nn::Param*> out;
  auto add = [&out](std::vector<nn::Param*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  for (auto& st : stages_)
    for (auto& c : st) add(c.params());
  for (auto& a : attention_) add(a.params());
  for (auto& d : decoder_) add(d.params());
  add(head_.params());
  return out;
}

LocalizationNet::Output LocalizationNet::forward(const Tensor& x, Cache* cache) const {
  if (x.h != config_.input_height || x.w != config_.input_width) {
    throw IntegrationError("network input is " + std::to_string(x.h) + "x" + std::to_string(x.w) +
                           ", expected " + std::to_string(config_.input_height) + "x" +
                           std::to_string(config_.input_width));
  }
  const int n = static_cast<int>(stages_.size());
  if (cache) cache->stages.assign(n, {});
  std::vector<Tensor> taps(n);
  Tensor t = x;
  for (int s = 0; s < n; ++s) {
    Cache::Stage* sc = cache ? &cache->stages[s] : nullptr;
    if (s > 0) {
      if (sc) {
        sc->in_h = t.h;
        sc->in_w = t.w;
      }
      t = nn::maxpool2(t, sc ? &sc->argmax : nullptr);
    }
    for (const auto& conv : stages_[s]) {
      if (sc) {
        sc->conv.emplace_back();
        t = nn::relu(conv.forward(t, &sc->conv.back()));
        sc->out.push_back(t);
      } else {
        t = nn::relu(conv.forward(t));
      }
    }
    taps[s] = t;
  }

  std::array<Tensor, 3> att;
  for (int k = 0; k < 3; ++k) {
    att[k] = attention_[k].forward(taps[n - 3 + k], cache ? &cache->attention[k] : nullptr);
  }

  auto conv_relu = [&](int j, const Tensor& in) {
    Tensor out = nn::relu(decoder_[j].forward(in, cache ? &cache->decoder[j] : nullptr));
    if (cache) cache->decoder_out[j] = out;
    return out;
  };
  Tensor d = conv_relu(0, att[2]);
  d = conv_relu(1, nn::concat_channels(nn::upsample_bilinear(d, att[1].h, att[1].w), att[1]));
  d = conv_relu(2, nn::concat_channels(nn::upsample_bilinear(d, att[0].h, att[0].w), att[0]));

  Tensor logits = head_.forward(d, cache ? &cache->head : nullptr);
  Tensor prob = nn::sigmoid(nn::upsample_bilinear(logits, x.h, x.w));
  if (cache) cache->prob = prob;
  return {std::move(prob), std::move(d)};
}

void LocalizationNet::backward(const Tensor& grad_prob, const Tensor* grad_features, Cache& cache) {
  const int n = static_cast<int>(stages_.size());
  const Tensor& d2 = cache.decoder_out[2];
  Tensor g = nn::sigmoid_backward(grad_prob, cache.prob);
  g = nn::upsample_bilinear_backward(g, d2.h, d2.w);
  g = head_.backward(g, cache.head);
  if (grad_features) {
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += grad_features->data[i];
  }

  std::array<Tensor, 3> gatt;
  for (int j = 2; j >= 0; --j) {
    g = decoder_[j].backward(nn::relu_backward(g, cache.decoder_out[j]), cache.decoder[j]);
    if (j == 0) {
      gatt[2] = std::move(g);
      break;
    }
    const Tensor& prev = cache.decoder_out[j - 1];
    auto [gup, gskip] = nn::split_channels(g, prev.c);
    gatt[2 - j] = std::move(gskip);
    g = nn::upsample_bilinear_backward(gup, prev.h, prev.w);
  }

  std::vector<Tensor> gtap(n);
  for (int k = 0; k < 3; ++k) gtap[n - 3 + k] = attention_[k].backward(gatt[k], cache.attention[k]);

  Tensor flow;  // gradient w.r.t. the output of stage s
  for (int s = n - 1; s >= 0; --s) {
    if (gtap[s].size()) {
      if (flow.size()) {
        for (std::size_t i = 0; i < flow.size(); ++i) flow.data[i] += gtap[s].data[i];
      } else {
        flow = std::move(gtap[s]);
      }
    }
    auto& sc = cache.stages[s];
    for (int i = static_cast<int>(stages_[s].size()) - 1; i >= 0; --i) {
      flow = stages_[s][i].backward(nn::relu_backward(flow, sc.out[i]), sc.conv[i]);
    }
    if (s > 0) flow = nn::maxpool2_backward(flow, sc.argmax, sc.in_h, sc.in_w);
  }
}

// ---------------------------------------------------------------- MQPM

MqpmModel::MqpmModel(const MqpmConfig& config)
    : config_(config), loc_(config.net, config.seed) {
  config_.validate();
  fc_ = nn::Linear("classifier", loc_.feature_channels(), 1);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  fc_.init(rng);
}

MqpmModel::Forward MqpmModel::forward(const Tensor& x, Cache* cache) const {
  auto out = loc_.forward(x, cache ? &cache->loc : nullptr);
  auto pooled = nn::global_avg_pool(out.features);
  double z = fc_.forward(pooled, cache ? &cache->fc : nullptr)[0];
  double q = nn::sigmoid(z);
  if (cache) cache->q = q;
  return {std::move(out.prob), q};
}

void MqpmModel::backward(const Tensor& grad_prob, double grad_q, Cache& cache) {
  double gz = grad_q * cache.q * (1.0 - cache.q);
  auto gpool = fc_.backward({gz}, cache.fc);
  const Tensor& feat = cache.loc.decoder_out[2];
  Tensor gfeat = nn::global_avg_pool_backward(gpool, feat.h, feat.w);
  loc_.backward(grad_prob, &gfeat, cache.loc);
}

std::vector<nn::Param*> MqpmModel::params() {
  auto out = loc_.params();
  for (auto* p : fc_.params()) out.push_back(p);
  return out;
}

nn::Checkpoint MqpmModel::to_checkpoint() const {
  auto& self = const_cast<MqpmModel&>(*this);
  return {"mqpm", nlohmann::json(config_), export_params(self.params())};
}

MqpmModel MqpmModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.kind != "mqpm") throw IntegrationError("checkpoint kind is '" + ckpt.kind + "', expected 'mqpm'");
  MqpmConfig config;
  try {
    config = ckpt.config.get<MqpmConfig>();
    config.validate();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrationError(std::string("checkpoint config: ") + e.what());
  } catch (const ConfigError& e) {
    throw IntegrationError(std::string("checkpoint config: ") + e.what());
  }
  MqpmModel model(config);
  auto params = model.params();
  if (params.size() != ckpt.params.size()) {
    throw IntegrationError("checkpoint holds " + std::to_string(ckpt.params.size()) +
                           " tensors, model expects " + std::to_string(params.size()));
  }
  import_params(params, ckpt.params);
  return model;
}

MqpmModel build_mqpm(const MqpmConfig& config) {
  MqpmModel model(config);
  if (!config.net.encoder_weights.empty()) load_encoder_weights(model.localization(), config.net.encoder_weights);
  return model;
}

// ---------------------------------------------------------------- parameters

std::vector<nn::ParamBlob> export_params(const std::vector<nn::Param*>& params) {
  std::vector<nn::ParamBlob> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back({p->name, p->shape, p->value});
  return out;
}

void import_params(const std::vector<nn::Param*>& params, const std::vector<nn::ParamBlob>& blobs,
                   const std::string& prefix_filter) {
  std::map<std::string, const nn::ParamBlob*> by_name;
  for (const auto& b : blobs) by_name[b.name] = &b;
  for (auto* p : params) {
    if (!prefix_filter.empty() && p->name.rfind(prefix_filter, 0) != 0) continue;
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw IntegrationError("checkpoint lacks tensor " + p->name);
    if (it->second->shape != p->shape) throw IntegrationError("shape mismatch for tensor " + p->name);
    p->value = it->second->values;
  }
}

void load_encoder_weights(LocalizationNet& net, const std::string& path) {
  auto ckpt = nn::load_checkpoint(path);
  import_params(net.params(), ckpt.params, "encoder.");
}

// ---------------------------------------------------------------- losses

double bce_sum(std::span<const double> prob, std::span<const double> target, std::span<double> grad,
               double scale) {
  double loss = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = prob[i], t = target[i];
    const double pc = std::clamp(p, kLogEps, 1.0 - kLogEps);
    loss -= t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc);
    if (!grad.empty()) {
      grad[i] = (p < kLogEps || p > 1.0 - kLogEps) ? 0.0 : scale * (-t / p + (1.0 - t) / (1.0 - p));
    }
  }
  return loss;
}

namespace {

void check_batch(std::span<const SaliencyMap> ms, std::span<const BinaryMask> gt) {
  if (ms.size() != gt.size() || ms.empty()) throw InvalidInput("bce_loss: batch size mismatch");
  for (std::size_t b = 0; b < ms.size(); ++b) require_same_dims(ms[b], gt[b], "bce_loss");
}

double clamp_q(double q) { return std::clamp(q, kLogEps, 1.0 - kLogEps); }

}  // namespace

double bce_loss(std::span<const SaliencyMap> ms, std::span<const BinaryMask> gt) {
  check_batch(ms, gt);
  double total = 0.0, count = 0.0;
  for (std::size_t b = 0; b < ms.size(); ++b) {
    auto target = to_map(gt[b]);
    total += bce_sum(ms[b].values(), target.values(), {}, 0.0);
    count += static_cast<double>(ms[b].size());
  }
  return total / count;
}

std::vector<SaliencyMap> bce_loss_grad(std::span<const SaliencyMap> ms, std::span<const BinaryMask> gt) {
  check_batch(ms, gt);
  double count = 0.0;
  for (const auto& m : ms) count += static_cast<double>(m.size());
  std::vector<SaliencyMap> out;
  for (std::size_t b = 0; b < ms.size(); ++b) {
    SaliencyMap g(ms[b].height(), ms[b].width());
    auto target = to_map(gt[b]);
    bce_sum(ms[b].values(), target.values(), g.values(), 1.0 / count);
    out.push_back(std::move(g));
  }
  return out;
}

double cls_loss(std::span<const double> q, std::span<const int> labels) {
  if (q.size() != labels.size() || q.empty()) throw InvalidInput("cls_loss: batch size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    double qc = clamp_q(q[i]);
    total -= labels[i] * std::log(qc) + (1 - labels[i]) * std::log(1.0 - qc);
  }
  return total / static_cast<double>(q.size());
}

std::vector<double> cls_loss_grad(std::span<const double> q, std::span<const int> labels) {
  if (q.size() != labels.size() || q.empty()) throw InvalidInput("cls_loss: batch size mismatch");
  std::vector<double> g(q.size(), 0.0);
  const double n = static_cast<double>(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] < kLogEps || q[i] > 1.0 - kLogEps) continue;
    g[i] = (-labels[i] / q[i] + (1 - labels[i]) / (1.0 - q[i])) / n;
  }
  return g;
}

double total_loss(double bce, double cls) { return bce + cls; }

// ---------------------------------------------------------------- data

Tensor prepare_input(const RgbImage& image, const NetworkConfig& net) {
  Tensor t = nn::from_grid(resize_bilinear(image, net.input_height, net.input_width));
  for (double& v : t.data) v -= 0.5;
  return t;
}

PreparedSample prepare_sample(const RgbImage& image, const SaliencyMap& target, bool flip,
                              const NetworkConfig& net) {
  RgbImage img = flip ? flip_horizontal(image) : image;
  SaliencyMap tgt = flip ? flip_horizontal(target) : target;
  PreparedSample s;
  s.input = prepare_input(img, net);
  s.target = nn::from_grid(resize_bilinear(tgt, net.input_height, net.input_width));
  return s;
}

// ---------------------------------------------------------------- training

namespace {

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

struct SampleLoss {
  double bce = 0.0;
  double cls = 0.0;
};

// Forward (and optionally backward) for one sample; gradients are scaled for
// a batch of batch_size.
SampleLoss run_sample(MqpmModel& model, const PreparedSample& s, int label, std::size_t batch_size,
                      bool backward) {
  const double hw = static_cast<double>(s.target.size());
  if (!backward) {
    auto fwd = model.forward(s.input);
    double q = fwd.q;
    double b = bce_sum(fwd.prob.data, s.target.data, {}, 0.0) / hw;
    std::array<double, 1> qs{q};
    std::array<int, 1> ls{label};
    return {b, cls_loss(qs, ls)};
  }
  MqpmModel::Cache cache;
  auto fwd = model.forward(s.input, &cache);
  Tensor gprob(1, fwd.prob.h, fwd.prob.w);
  double b = bce_sum(fwd.prob.data, s.target.data, gprob.data, 1.0 / (hw * batch_size)) / hw;
  std::array<double, 1> qs{fwd.q};
  std::array<int, 1> ls{label};
  double c = cls_loss(qs, ls);
  double gq = cls_loss_grad(qs, ls)[0] / static_cast<double>(batch_size);
  model.backward(gprob, gq, cache);
  return {b, c};
}

}  // namespace

TrainResult train_mqpm(const std::vector<quality::MqpmSample>& trainset, const MqpmConfig& config) {
  config.validate();
  if (trainset.empty()) throw InvalidInput("train_mqpm: empty training set");
  TrainResult result;
  int positives = 0;
  for (const auto& s : trainset) positives += s.label;
  if (positives == 0 || positives == static_cast<int>(trainset.size())) {
    result.warnings.push_back("training set holds a single quality class");
  }

  MqpmModel model = build_mqpm(config);
  const NetworkConfig net = config.net.resolved();
  auto params = model.params();
  nn::Adam adam(config.learning_rate);
  std::mt19937_64 rng(config.seed + 0x2545F4914F6CDD1Dull);

  std::vector<SaliencyMap> targets;
  targets.reserve(trainset.size());
  for (const auto& s : trainset) {
    if (s.input.height() != s.gt.height() || s.input.width() != s.gt.width()) {
      throw IntegrationError("flow rendering and mask differ in size for " + s.frame_id);
    }
    targets.push_back(to_map(s.gt));
  }

  auto record = [&](int epoch, double bce, double cls, double n) {
    result.log.push_back({epoch, bce / n, cls / n, total_loss(bce / n, cls / n)});
  };

  {
    double bce = 0.0, cls = 0.0;
    for (std::size_t i = 0; i < trainset.size(); ++i) {
      auto s = prepare_sample(trainset[i].input, targets[i], false, net);
      auto l = run_sample(model, s, trainset[i].label, 1, false);
      bce += l.bce;
      cls += l.cls;
    }
    record(0, bce, cls, static_cast<double>(trainset.size()));
  }

  std::vector<std::size_t> order(trainset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    double bce = 0.0, cls = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::size_t end = std::min(order.size(), start + batch);
      for (auto* p : params) p->zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const auto& sample = trainset[order[k]];
        bool flip = config.hflip_augment && (rng() & 1u);
        auto s = prepare_sample(sample.input, targets[order[k]], flip, net);
        auto l = run_sample(model, s, sample.label, end - start, true);
        bce += l.bce;
        cls += l.cls;
        result.visited.insert(sample.frame_id);
      }
      adam.step(params);
    }
    record(epoch, bce, cls, static_cast<double>(trainset.size()));
  }
  result.checkpoint = model.to_checkpoint();
  return result;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLoss>& log) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "epoch,bce,cls,total\n" << std::setprecision(10);
  for (const auto& e : log) out << e.epoch << ',' << e.bce << ',' << e.cls << ',' << e.total << '\n';
}

QualityPrediction predict_quality(const flow::FlowRgb& flow_rgb, const MqpmModel& model) {
  const NetworkConfig net = model.config().net.resolved();
  auto fwd = model.forward(prepare_input(flow_rgb, net));
  QualityPrediction out;
  out.output.motion_saliency = resize_bilinear(nn::to_grid(fwd.prob), flow_rgb.height(), flow_rgb.width());
  for (double& v : out.output.motion_saliency.raw()) v = std::clamp(v, 0.0, 1.0);
  out.output.quality_confidence = fwd.q;
  out.decision = fwd.q >= 0.5;
  return out;
}

}  // namespace mqp::mqpm
