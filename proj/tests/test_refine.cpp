#include <gtest/gtest.h>

#include <filesystem>

#include "mqp/errors.hpp"
#include "mqp/image_io.hpp"
#include "mqp/refine_trainer.hpp"
#include "mqp/saliency_metrics.hpp"

using namespace mqp;
using namespace mqp::refine;
namespace fs = std::filesystem;

namespace {

mqpm::NetworkConfig micro_net() {
  mqpm::NetworkConfig c;
  c.encoder = "vgg-micro";
  c.input_height = 32;
  c.input_width = 32;
  c.dilation_rates = {1, 2};
  c.attention_width = 4;
  c.decoder_channels = {8, 8, 8};
  return c;
}

RefineConfig micro_config() {
  RefineConfig c;
  c.net = micro_net();
  c.batch_size = 2;
  c.epochs = 2;
  return c;
}

// Red square on a gray-green background; the square is the salient object.
RefineSample square_sample(int i) {
  RefineSample s;
  s.frame_id = "sq/" + std::to_string(i);
  s.frame = RgbImage(32, 32, 3);
  s.pseudo_gt = SaliencyMap(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      s.frame(y, x, 0) = 0.4;
      s.frame(y, x, 1) = 0.5;
      s.frame(y, x, 2) = 0.4;
    }
  int oy = 4 + 4 * i, ox = 6 + 3 * i;
  for (int y = oy; y < oy + 12; ++y)
    for (int x = ox; x < ox + 12; ++x) {
      s.frame(y, x, 0) = 0.95;
      s.frame(y, x, 1) = 0.1;
      s.frame(y, x, 2) = 0.1;
      s.pseudo_gt(y, x) = 1.0;
    }
  return s;
}

std::vector<RefineSample> square_set(int n) {
  std::vector<RefineSample> v;
  for (int i = 0; i < n; ++i) v.push_back(square_sample(i));
  return v;
}

}  // namespace

TEST(Refine, SharesTheMqpmLocalizationLayout) {
  mqpm::MqpmConfig mc;
  mc.net = micro_net();
  auto mqpm_model = mqpm::build_mqpm(mc);
  RefineModel refine_model(micro_config());
  EXPECT_EQ(shape_signature(refine_model.net().params()),
            shape_signature(mqpm_model.localization().params()));
}

TEST(Refine, EncoderInitFromMqpmCheckpoint) {
  auto dir = fs::temp_directory_path() / "mqp_refine_init";
  fs::create_directories(dir);
  mqpm::MqpmConfig mc;
  mc.net = micro_net();
  mc.seed = 99;
  auto mqpm_model = mqpm::build_mqpm(mc);
  nn::save_checkpoint(dir / "m.ckpt", mqpm_model.to_checkpoint());
  auto cfg = micro_config();
  cfg.init_from_mqpm = (dir / "m.ckpt").string();
  RefineModel m(cfg);
  auto a = m.net().params();
  auto b = mqpm_model.localization().params();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->name.rfind("encoder.", 0) == 0) {
      EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
    }
  }
  cfg.init_from_mqpm = (dir / "missing.ckpt").string();
  EXPECT_ANY_THROW(RefineModel{cfg});
  fs::remove_all(dir);
}

TEST(Refine, ErrorsOnBadInputs) {
  EXPECT_THROW(train_refine(std::vector<RefineSample>{}, micro_config()), InvalidInput);
  auto bad = square_set(1);
  bad[0].pseudo_gt = SaliencyMap(16, 16);
  EXPECT_THROW(train_refine(bad, micro_config()), IntegrationError);
  EXPECT_THROW(load_manifest_samples(trainset::TrainingManifest{}), InvalidInput);
  auto cfg = micro_config();
  cfg.epochs = 0;
  EXPECT_THROW(train_refine(square_set(1), cfg), ConfigError);
  cfg = micro_config();
  cfg.net.input_height = 30;
  EXPECT_THROW(train_refine(square_set(1), cfg), ConfigError);
}

TEST(Refine, ManifestSizeMismatchNamesFrame) {
  auto dir = fs::temp_directory_path() / "mqp_refine_manifest";
  fs::create_directories(dir);
  io::write_rgb(dir / "f.png", RgbImage(8, 8, 3, 0.5));
  io::write_map(dir / "g.png", SaliencyMap(8, 6));
  trainset::TrainingManifest m;
  m.entries.push_back({"seq/00003", dir / "f.png", dir / "g.png", 0.5});
  try {
    load_manifest_samples(m);
    FAIL();
  } catch (const IntegrationError& e) {
    EXPECT_NE(std::string(e.what()).find("seq/00003"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Refine, TrainingVisitsOnlyManifestFramesAndIsDeterministic) {
  auto set = square_set(3);
  auto a = train_refine(set, micro_config());
  EXPECT_EQ(a.log.size(), 3u);
  for (const auto& id : a.visited) {
    bool known = false;
    for (const auto& s : set) known |= s.frame_id == id;
    EXPECT_TRUE(known) << id;
  }
  EXPECT_EQ(a.visited.size(), set.size());
  auto b = train_refine(set, micro_config());
  EXPECT_EQ(nn::encode_checkpoint(a.checkpoint), nn::encode_checkpoint(b.checkpoint));
}

TEST(Refine, InferenceCountDimsAndPurity) {
  auto res = train_refine(square_set(2), micro_config());
  std::vector<RgbImage> frames{RgbImage(20, 28, 3, 0.3), square_sample(0).frame, RgbImage(64, 48, 3, 0.7)};
  auto a = infer_refined(frames, res.checkpoint);
  ASSERT_EQ(a.size(), frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_EQ(a[i].height(), frames[i].height());
    EXPECT_EQ(a[i].width(), frames[i].width());
    for (double v : a[i].raw()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  auto b = infer_refined(frames, res.checkpoint);
  for (std::size_t i = 0; i < frames.size(); ++i) EXPECT_EQ(a[i].raw(), b[i].raw());
}

TEST(Refine, CheckpointRoundTripAndKindCheck) {
  auto res = train_refine(square_set(1), micro_config());
  auto model = RefineModel::from_checkpoint(res.checkpoint);
  EXPECT_EQ(nn::encode_checkpoint(model.to_checkpoint()), nn::encode_checkpoint(res.checkpoint));
  auto wrong = res.checkpoint;
  wrong.kind = "mqpm";
  EXPECT_THROW(RefineModel::from_checkpoint(wrong), IntegrationError);
}

TEST(Refine, InferToDirectoryWritesOneMapPerFrame) {
  auto dir = fs::temp_directory_path() / "mqp_refine_infer";
  fs::remove_all(dir);
  fs::create_directories(dir / "frames" / "v");
  std::vector<data::FrameEntry> frames;
  for (int i = 0; i < 3; ++i) {
    auto p = dir / "frames" / "v" / ("0000" + std::to_string(i) + ".png");
    io::write_rgb(p, square_sample(i).frame);
    frames.push_back({"v/0000" + std::to_string(i), "v", p});
  }
  auto res = train_refine(square_set(1), micro_config());
  infer_to_directory(frames, res.checkpoint, dir / "out");
  for (const auto& f : frames) {
    auto m = io::read_map(data::map_path(dir / "out", f.frame_id));
    EXPECT_EQ(m.height(), 32);
  }
  fs::remove_all(dir);
}

TEST(Refine, OverfitsFourFrames) {
  auto cfg = micro_config();
  cfg.epochs = 60;
  cfg.learning_rate = 5e-3;
  auto set = square_set(4);
  auto res = train_refine(set, cfg);
  EXPECT_LT(res.log.back().bce, res.log.front().bce);
  std::vector<RgbImage> frames;
  for (const auto& s : set) frames.push_back(s.frame);
  auto maps = infer_refined(frames, res.checkpoint);
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto f = metrics::f_measures(maps[i], binarize(set[i].pseudo_gt, 0.5));
    EXPECT_GT(f.max_f, 0.9) << set[i].frame_id;
  }
}

TEST(Refine, ConfigJsonRoundTrip) {
  auto cfg = micro_config();
  cfg.soft_targets = true;
  cfg.binarize_threshold = 0.3;
  cfg.seed = 17;
  nlohmann::json j = cfg;
  auto back = j.get<RefineConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_THROW(nlohmann::json::parse(R"({"batch_size": 0})").get<RefineConfig>().validate(), ConfigError);
}
