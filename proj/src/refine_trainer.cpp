#include "mqp/refine_trainer.hpp"

#include <algorithm>
#include <random>

#include "mqp/errors.hpp"
#include "mqp/image_io.hpp"
#include "mqp/parallel.hpp"

namespace fs = std::filesystem;

namespace mqp::refine {

void RefineConfig::validate() const {
  (void)net.resolved();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (binarize_threshold < 0.0 || binarize_threshold > 1.0) {
    throw ConfigError("binarize_threshold must lie in [0,1]");
  }
}

void to_json(nlohmann::json& j, const RefineConfig& c) {
  j = {{"net", c.net},
       {"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"hflip_augment", c.hflip_augment},
       {"soft_targets", c.soft_targets},
       {"binarize_threshold", c.binarize_threshold},
       {"init_from_mqpm", c.init_from_mqpm},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, RefineConfig& c) {
  RefineConfig d;
  c.net = j.value("net", d.net);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.epochs = j.value("epochs", d.epochs);
  c.hflip_augment = j.value("hflip_augment", d.hflip_augment);
  c.soft_targets = j.value("soft_targets", d.soft_targets);
  c.binarize_threshold = j.value("binarize_threshold", d.binarize_threshold);
  c.init_from_mqpm = j.value("init_from_mqpm", d.init_from_mqpm);
  c.seed = j.value("seed", d.seed);
}

std::vector<RefineSample> load_manifest_samples(const trainset::TrainingManifest& manifest) {
  if (manifest.entries.empty()) throw InvalidInput("training manifest is empty");
  std::vector<RefineSample> out;
  for (const auto& e : manifest.entries) {
    RefineSample s{e.frame_id, io::read_rgb(e.frame), io::read_map(e.pseudo_gt)};
    if (s.frame.height() != s.pseudo_gt.height() || s.frame.width() != s.pseudo_gt.width()) {
      throw IntegrationError("frame and pseudo-GT differ in size for " + e.frame_id);
    }
    out.push_back(std::move(s));
  }
  return out;
}

RefineModel::RefineModel(const RefineConfig& config) : config_(config), net_(config.net, config.seed) {
  config_.validate();
  if (!config_.init_from_mqpm.empty()) {
    auto ckpt = nn::load_checkpoint(config_.init_from_mqpm);
    if (ckpt.kind != "mqpm") throw IntegrationError("init_from_mqpm does not name an MQPM checkpoint");
    mqpm::import_params(net_.params(), ckpt.params, "encoder.");
  }
}

SaliencyMap RefineModel::predict(const RgbImage& frame) const {
  const auto net = config_.net.resolved();
  auto out = net_.forward(mqpm::prepare_input(frame, net));
  SaliencyMap m = resize_bilinear(nn::to_grid(out.prob), frame.height(), frame.width());
  for (double& v : m.raw()) v = std::clamp(v, 0.0, 1.0);
  return m;
}

nn::Checkpoint RefineModel::to_checkpoint() const {
  auto& self = const_cast<RefineModel&>(*this);
  RefineConfig stored = config_;
  stored.init_from_mqpm.clear();
  return {"refine", nlohmann::json(stored), mqpm::export_params(self.net_.params())};
}

RefineModel RefineModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.kind != "refine") {
    throw IntegrationError("checkpoint kind is '" + ckpt.kind + "', expected 'refine'");
  }
  RefineConfig config;
  try {
    config = ckpt.config.get<RefineConfig>();
    config.init_from_mqpm.clear();
    config.validate();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrationError(std::string("checkpoint config: ") + e.what());
  } catch (const ConfigError& e) {
    throw IntegrationError(std::string("checkpoint config: ") + e.what());
  }
  RefineModel model(config);
  auto params = model.net_.params();
  if (params.size() != ckpt.params.size()) {
    throw IntegrationError("checkpoint holds " + std::to_string(ckpt.params.size()) + " tensors, model expects " +
                           std::to_string(params.size()));
  }
  mqpm::import_params(params, ckpt.params);
  return model;
}

RefineResult train_refine(const std::vector<RefineSample>& samples, const RefineConfig& config) {
  config.validate();
  if (samples.empty()) throw InvalidInput("train_refine: empty training set");
  RefineModel model(config);
  const auto net = config.net.resolved();
  auto params = model.net().params();
  nn::Adam adam(config.learning_rate);
  std::mt19937_64 rng(config.seed + 0x2545F4914F6CDD1Dull);
  RefineResult result;

  std::vector<SaliencyMap> targets;
  for (const auto& s : samples) {
    if (s.frame.height() != s.pseudo_gt.height() || s.frame.width() != s.pseudo_gt.width()) {
      throw IntegrationError("frame and pseudo-GT differ in size for " + s.frame_id);
    }
    targets.push_back(config.soft_targets ? s.pseudo_gt : to_map(binarize(s.pseudo_gt, config.binarize_threshold)));
  }

  auto record = [&](int epoch, double bce) {
    double mean = bce / static_cast<double>(samples.size());
    result.log.push_back({epoch, mean, 0.0, mean});
  };
  {
    double bce = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto s = mqpm::prepare_sample(samples[i].frame, targets[i], false, net);
      auto out = model.net().forward(s.input);
      bce += mqpm::bce_sum(out.prob.data, s.target.data, {}, 0.0) / static_cast<double>(s.target.size());
    }
    record(0, bce);
  }

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double bce = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::size_t end = std::min(order.size(), start + batch);
      for (auto* p : params) p->zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const auto& sample = samples[order[k]];
        bool flip = config.hflip_augment && (rng() & 1u);
        auto s = mqpm::prepare_sample(sample.frame, targets[order[k]], flip, net);
        mqpm::LocalizationNet::Cache cache;
        auto out = model.net().forward(s.input, &cache);
        const double hw = static_cast<double>(s.target.size());
        nn::Tensor grad(1, out.prob.h, out.prob.w);
        bce += mqpm::bce_sum(out.prob.data, s.target.data, grad.data, 1.0 / (hw * (end - start))) / hw;
        model.net().backward(grad, nullptr, cache);
        result.visited.insert(sample.frame_id);
      }
      adam.step(params);
    }
    record(epoch, bce);
  }
  result.checkpoint = model.to_checkpoint();
  return result;
}

RefineResult train_refine(const trainset::TrainingManifest& manifest, const RefineConfig& config) {
  return train_refine(load_manifest_samples(manifest), config);
}

std::vector<SaliencyMap> infer_refined(const std::vector<RgbImage>& frames, const nn::Checkpoint& ckpt) {
  const RefineModel model = RefineModel::from_checkpoint(ckpt);
  std::vector<SaliencyMap> out(frames.size());
  parallel_for(frames.size(), [&](std::size_t i) { out[i] = model.predict(frames[i]); });
  return out;
}

void infer_to_directory(const std::vector<data::FrameEntry>& frames, const nn::Checkpoint& ckpt,
                        const fs::path& out_dir) {
  const RefineModel model = RefineModel::from_checkpoint(ckpt);
  parallel_for(frames.size(), [&](std::size_t i) {
    io::write_map(data::map_path(out_dir, frames[i].frame_id), model.predict(io::read_rgb(frames[i].path)));
  });
}

ShapeSignature shape_signature(const std::vector<nn::Param*>& params) {
  ShapeSignature sig;
  for (const auto* p : params) sig.emplace_back(p->name, p->shape);
  return sig;
}

}  // namespace mqp::refine
