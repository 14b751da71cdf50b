#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mqp/dataset.hpp"
#include "mqp/errors.hpp"
#include "mqp/evaluation.hpp"
#include "mqp/flow_io.hpp"
#include "mqp/image_io.hpp"
#include "mqp/pipeline.hpp"
#include "mqp/saliency_metrics.hpp"
#include "mqp/synthetic.hpp"

using namespace mqp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json tiny_config_json() {
  nlohmann::json net = {{"input_height", 32}, {"input_width", 32}, {"encoder", "vgg-micro"},
                        {"dilation_rates", {1, 2}}, {"attention_width", 4},
                        {"decoder_channels", {8, 8, 8}}};
  return {
      {"synthetic",
       {{"train_root", "synth/train"},
        {"test_root", "synth/test"},
        {"train", {{"videos", 2}, {"frames", 10}, {"height", 32}, {"width", 32}, {"seed", 3}}},
        {"test", {{"videos", 2}, {"frames", 10}, {"height", 32}, {"width", 32}, {"seed", 4}}}}},
      {"mqpm", {{"net", net}, {"epochs", 2}, {"batch_size", 4}}},
      {"refine", {{"net", net}, {"epochs", 2}, {"batch_size", 4}}},
      {"window", 2},
      {"out", "out"},
      {"seed", 5}};
}

}  // namespace

TEST(Synthetic, DefaultCorpusCounts) {
  TempDir tmp("mqp_synth_counts");
  synth::SynthSpec spec;
  auto sum = synth::gen_synthetic(spec, tmp.path);
  EXPECT_EQ(sum.frames, 240);
  EXPECT_EQ(sum.flows, 232);
  EXPECT_EQ(sum.hq_frames + sum.lq_frames, 240);
  EXPECT_GT(sum.hq_frames, 0);
  EXPECT_GT(sum.lq_frames, 0);
  auto layout = data::CorpusLayout::under(tmp.path);
  auto frames = data::scan_frames(layout.frames);
  EXPECT_EQ(frames.size(), 240u);
  EXPECT_EQ(data::frame_pairs(frames).size(), 232u);
  int flo = 0, gt = 0, sota = 0;
  for (const auto& f : frames) {
    flo += fs::exists(layout.flows / (f.frame_id + ".flo"));
    gt += fs::exists(data::map_path(layout.gt, f.frame_id));
    sota += fs::exists(data::map_path(layout.sota, f.frame_id));
  }
  EXPECT_EQ(flo, 232);
  EXPECT_EQ(gt, 240);
  EXPECT_EQ(sota, 240);
  EXPECT_EQ(synth::read_regimes(tmp.path / "regimes.csv").size(), 240u);
}

TEST(Synthetic, CleanRegimeFlowIsRigidInsideTheObject) {
  TempDir tmp("mqp_synth_rigid");
  synth::SynthSpec spec;
  spec.videos = 3;
  spec.frames = 12;
  auto sum = synth::gen_synthetic(spec, tmp.path);
  int checked = 0;
  for (const auto& r : sum.regimes) {
    if (!r.high_quality) continue;
    auto flo = tmp.path / "flows" / (r.frame_id + ".flo");
    if (!fs::exists(flo)) continue;
    auto f = flow::read_flo(flo);
    auto gt = io::read_mask(data::map_path(tmp.path / "gt", r.frame_id));
    float u0 = 0, v0 = 0;
    bool first = true;
    for (int y = 0; y < gt.height(); ++y)
      for (int x = 0; x < gt.width(); ++x) {
        if (!gt(y, x)) continue;
        if (first) {
          u0 = f.u(y, x);
          v0 = f.v(y, x);
          first = false;
        }
        EXPECT_NEAR(f.u(y, x), u0, 1e-4) << r.frame_id;
        EXPECT_NEAR(f.v(y, x), v0, 1e-4) << r.frame_id;
      }
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Synthetic, SeedDeterminism) {
  TempDir a("mqp_synth_seed_a"), b("mqp_synth_seed_b"), c("mqp_synth_seed_c");
  synth::SynthSpec spec;
  spec.videos = 1;
  spec.frames = 5;
  synth::gen_synthetic(spec, a.path);
  synth::gen_synthetic(spec, b.path);
  spec.seed += 1;
  synth::gen_synthetic(spec, c.path);
  for (const auto& sub : {"frames/video00/00000.png", "gt/video00/00003.png", "flows/video00/00001.flo",
                          "sota/video00/00002.png"}) {
    EXPECT_EQ(read_file(a.path / sub), read_file(b.path / sub)) << sub;
  }
  EXPECT_NE(read_file(a.path / "frames/video00/00000.png"), read_file(c.path / "frames/video00/00000.png"));
}

TEST(Synthetic, TargetMapsAreWorseOnChaoticFrames) {
  TempDir tmp("mqp_synth_target");
  synth::SynthSpec spec;
  spec.videos = 4;
  spec.frames = 20;
  auto sum = synth::gen_synthetic(spec, tmp.path);
  double hq = 0, lq = 0;
  int nh = 0, nl = 0;
  for (const auto& r : sum.regimes) {
    auto s = metrics::s_measure(io::read_map(data::map_path(tmp.path / "sota", r.frame_id)),
                                io::read_mask(data::map_path(tmp.path / "gt", r.frame_id)));
    (r.high_quality ? hq : lq) += s;
    (r.high_quality ? nh : nl) += 1;
  }
  ASSERT_GT(nh, 0);
  ASSERT_GT(nl, 0);
  EXPECT_GT(hq / nh, lq / nl);
}

TEST(Synthetic, RejectsEmptySpec) {
  TempDir tmp("mqp_synth_empty");
  synth::SynthSpec spec;
  spec.frames = 0;
  EXPECT_THROW(synth::gen_synthetic(spec, tmp.path), ConfigError);
  spec = {};
  spec.videos = 0;
  EXPECT_THROW(synth::gen_synthetic(spec, tmp.path), ConfigError);
}

TEST(Evaluate, GroundTruthCopiesScorePerfectly) {
  TempDir tmp("mqp_eval_copy");
  synth::SynthSpec spec;
  spec.videos = 1;
  spec.frames = 6;
  synth::gen_synthetic(spec, tmp.path);
  auto report = eval::evaluate(tmp.path / "gt", tmp.path / "gt");
  EXPECT_EQ(report.frame_count, 6);
  EXPECT_DOUBLE_EQ(report.mae, 0.0);
  EXPECT_NEAR(report.s_measure, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(report.max_f, 1.0);
  EXPECT_TRUE(report.missing.empty());
}

TEST(Evaluate, MissingPredictionsAreListed) {
  TempDir tmp("mqp_eval_missing");
  synth::SynthSpec spec;
  spec.videos = 1;
  spec.frames = 4;
  synth::gen_synthetic(spec, tmp.path);
  fs::copy(tmp.path / "gt", tmp.path / "pred", fs::copy_options::recursive);
  fs::remove(tmp.path / "pred/video00/00002.png");
  auto report = eval::evaluate(tmp.path / "pred", tmp.path / "gt");
  EXPECT_EQ(report.frame_count, 3);
  ASSERT_EQ(report.missing.size(), 1u);
  EXPECT_EQ(report.missing[0], "video00/00002");
  auto only = eval::evaluate(tmp.path / "pred", tmp.path / "gt", std::vector<std::string>{"video00/00001"});
  EXPECT_EQ(only.frame_count, 1);
}

TEST(Evaluate, TableHasOneRowPerReport) {
  metrics::MetricsReport r;
  r.max_f = 0.5;
  r.frame_count = 3;
  auto t = eval::format_table({{"first", r}, {"second", r}});
  EXPECT_NE(t.find("first"), std::string::npos);
  EXPECT_NE(t.find("second"), std::string::npos);
  EXPECT_NE(t.find("maxF"), std::string::npos);
  EXPECT_NE(t.find("0.500"), std::string::npos);
}

TEST(PipelineConfig, ParsesAndResolvesRelativePaths) {
  auto c = pipeline::config_from_json(tiny_config_json(), "/base");
  ASSERT_TRUE(c.synthetic.has_value());
  EXPECT_EQ(c.synthetic->train_root, fs::path("/base/synth/train"));
  EXPECT_EQ(c.train.frames, fs::path("/base/synth/train/frames"));
  EXPECT_EQ(c.test.sota, fs::path("/base/synth/test/sota"));
  EXPECT_EQ(c.out, fs::path("/base/out"));
  EXPECT_EQ(c.window, 2);
  EXPECT_EQ(c.mqpm.seed, 5u);
  EXPECT_EQ(c.refine.seed, 5u);
  EXPECT_EQ(c.mqpm.epochs, 2);
  auto again = pipeline::config_from_json(pipeline::config_to_json(c), "/elsewhere");
  EXPECT_EQ(pipeline::config_to_json(again), pipeline::config_to_json(c));
}

TEST(PipelineConfig, RejectsBadValues) {
  auto j = tiny_config_json();
  j["window"] = 0;
  EXPECT_THROW(pipeline::config_from_json(j, "/base").validate(), ConfigError);
  j = tiny_config_json();
  j["mqpm"]["net"]["input_height"] = 30;
  EXPECT_THROW(pipeline::config_from_json(j, "/base").mqpm.net.resolved(), ConfigError);
}

TEST(Pipeline, EndToEndStagesAndDeterministicRerun) {
  TempDir tmp("mqp_pipeline_e2e");
  auto c = pipeline::config_from_json(tiny_config_json(), tmp.path);
  pipeline::ensure_synthetic(c);
  auto report = pipeline::run_pipeline(c);
  pipeline::StagePaths p(c.out);
  for (const auto& f : {p.step1 / "quality_records.tsv", p.step1 / "fit.json", p.step1 / "mqpm.ckpt",
                        p.step1 / "mqpm_loss.csv", p.step2 / "candidates.csv", p.step2 / "manifest.json",
                        p.step3 / "refine.ckpt", p.step3 / "refine_loss.csv", p.step3 / "metrics.csv",
                        c.out / "report.json"}) {
    EXPECT_TRUE(fs::exists(f)) << f;
  }
  EXPECT_EQ(pipeline::read_candidates_csv(p.step2 / "candidates.csv").size(), 18u);
  auto frames = data::scan_frames(c.test.frames);
  for (const auto& f : frames) EXPECT_TRUE(fs::exists(data::map_path(p.step3 / "maps", f.frame_id)));

  auto ckpt = read_file(p.step3 / "refine.ckpt");
  auto map = read_file(p.step3 / "maps/video00/00003.png");
  pipeline::run_stage3(c);
  EXPECT_EQ(read_file(p.step3 / "refine.ckpt"), ckpt);
  EXPECT_EQ(read_file(p.step3 / "maps/video00/00003.png"), map);

  pipeline::AblationOptions opts;
  opts.variants = {"ms_baseline", "hq_lq"};
  auto abl = pipeline::ablation_report(c, opts);
  EXPECT_NE(abl.find(pipeline::kMsBaseline), nullptr);
  EXPECT_TRUE(fs::exists(c.out / "ablation" / "tables.txt"));
}

TEST(Pipeline, MissingTargetDirectoryFailsStageTwoWithPath) {
  TempDir tmp("mqp_pipeline_nosota");
  auto c = pipeline::config_from_json(tiny_config_json(), tmp.path);
  pipeline::ensure_synthetic(c);
  fs::remove_all(c.test.sota);
  try {
    pipeline::run_pipeline(c);
    FAIL();
  } catch (const pipeline::StageError& e) {
    EXPECT_EQ(e.stage(), 2);
    EXPECT_NE(std::string(e.what()).find(c.test.sota.string()), std::string::npos) << e.what();
  }
  EXPECT_TRUE(fs::exists(pipeline::StagePaths(c.out).step1 / "mqpm.ckpt"));
}
