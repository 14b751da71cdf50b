#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mqp/dataset.hpp"
#include "mqp/evaluation.hpp"
#include "mqp/nn/checkpoint.hpp"
#include "mqp/pipeline.hpp"
#include "mqp/refine_trainer.hpp"
#include "mqp/synthetic.hpp"
#include "mqp/trainset_builder.hpp"

namespace fs = std::filesystem;
using namespace mqp;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> window;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "seed for every random choice");
  cmd->add_option("--window", c.window, "keep one frame per W high-quality candidates");
  cmd->add_option("--out", c.out, "output root");
}

pipeline::PipelineConfig load(const Common& c) {
  auto cfg = pipeline::load_config(c.config);
  if (c.seed) pipeline::apply_seed(cfg, *c.seed);
  if (c.window) cfg.window = *c.window;
  if (!c.out.empty()) cfg.out = c.out;
  return cfg;
}

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-quality driven pseudo-label pipeline for video salient object detection"};
  app.require_subcommand(1);

  Common common;

  auto* gen = app.add_subcommand("gen-synth", "render a synthetic micro-dataset");
  std::string gen_config, gen_out;
  synth::SynthSpec spec;
  gen->add_option("-c,--config", gen_config, "pipeline config with a synthetic block")->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "output root for a single split");
  gen->add_option("--seed", spec.seed);
  gen->add_option("--videos", spec.videos);
  gen->add_option("--frames", spec.frames);
  gen->add_option("--height", spec.height);
  gen->add_option("--width", spec.width);
  gen->add_option("--lq-error", spec.target_lq_error, "target map corruption on low-quality frames");
  gen->add_option("--hq-error", spec.target_hq_error, "target map corruption on high-quality frames");

  auto* train_mqpm = app.add_subcommand("train-mqpm", "step 1: label motion quality and train the MQPM");
  add_common(train_mqpm, common);

  auto* score = app.add_subcommand("score", "run the trained MQPM over the test split");
  add_common(score, common);

  auto* build = app.add_subcommand("build-trainset", "step 2: select frames and write the training manifest");
  add_common(build, common);

  auto* train_refine = app.add_subcommand("train-refine", "step 3: train the refinement model and infer");
  add_common(train_refine, common);

  auto* infer = app.add_subcommand("infer", "run a refinement checkpoint over a frame directory");
  std::string ckpt_path, frames_dir, infer_out;
  infer->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  infer->add_option("--frames", frames_dir, "<sequence>/<frame> image tree")->required()->check(CLI::ExistingDirectory);
  infer->add_option("--out", infer_out)->required();

  auto* evaluate = app.add_subcommand("evaluate", "score a prediction directory against GT masks");
  std::string pred_dir, gt_dir, csv_path, json_path;
  evaluate->add_option("--pred", pred_dir)->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--gt", gt_dir)->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--csv", csv_path, "per-frame metrics");
  evaluate->add_option("--json", json_path, "aggregate metrics");

  auto* ablation = app.add_subcommand("ablation", "variant, HQ/LQ and keep-ratio tables");
  add_common(ablation, common);
  std::vector<std::string> variants;
  ablation->add_option("--variants", variants, "subset of ms_baseline ms_minus_mqpm ms_mqpm full hq_lq window_sweep");

  auto* run_all = app.add_subcommand("run-all", "all three steps");
  add_common(run_all, common);
  bool with_ablation = false;
  run_all->add_flag("--ablation", with_ablation, "also produce the ablation tables");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      if (!gen_config.empty()) {
        auto cfg = pipeline::load_config(gen_config);
        if (!cfg.synthetic) throw ConfigError("config has no synthetic block");
        for (auto [root, s] : {std::pair{cfg.synthetic->train_root, cfg.synthetic->train},
                               std::pair{cfg.synthetic->test_root, cfg.synthetic->test}}) {
          auto sum = synth::gen_synthetic(s, root);
          std::cout << root.string() << ": " << sum.frames << " frames, " << sum.flows << " flows, " << sum.hq_frames
                    << " high-quality\n";
        }
      } else {
        if (gen_out.empty()) throw ConfigError("gen-synth needs --config or --out");
        auto sum = synth::gen_synthetic(spec, gen_out);
        std::cout << gen_out << ": " << sum.frames << " frames, " << sum.flows << " flows, " << sum.hq_frames
                  << " high-quality\n";
      }
    } else if (train_mqpm->parsed()) {
      auto cfg = load(common);
      pipeline::ensure_synthetic(cfg, log_line);
      cfg.validate();
      std::cout << pipeline::run_stage1(cfg, log_line).dump(2) << '\n';
    } else if (score->parsed()) {
      auto cfg = load(common);
      auto model = mqpm::MqpmModel::from_checkpoint(nn::load_checkpoint(cfg.out / "step1" / "mqpm.ckpt"));
      auto frames = data::scan_frames(cfg.test.frames);
      auto provider = flow::DirectoryFlowProvider(cfg.test.flows);
      std::ofstream out(cfg.out / "scores.csv");
      out << "frame_id,quality_confidence,decision\n";
      for (const auto& p : data::frame_pairs(frames)) {
        auto pred = mqpm::predict_quality(flow::encode_color_wheel(provider.flow(p), cfg.flow_max_magnitude), model);
        out << p.frame_id << ',' << pred.output.quality_confidence << ',' << (pred.decision ? 1 : 0) << '\n';
      }
      std::cout << (cfg.out / "scores.csv").string() << '\n';
    } else if (build->parsed()) {
      auto cfg = load(common);
      std::cout << pipeline::run_stage2(cfg, log_line).dump(2) << '\n';
    } else if (train_refine->parsed()) {
      auto cfg = load(common);
      std::cout << pipeline::run_stage3(cfg, log_line).dump(2) << '\n';
    } else if (infer->parsed()) {
      refine::infer_to_directory(data::scan_frames(frames_dir), nn::load_checkpoint(ckpt_path), infer_out);
    } else if (evaluate->parsed()) {
      auto report = eval::evaluate(pred_dir, gt_dir);
      for (const auto& m : report.missing) std::cerr << "warning: no prediction for " << m << '\n';
      std::cout << eval::format_table({{fs::path(pred_dir).filename().string(), report}});
      if (!csv_path.empty()) eval::write_per_frame_csv(csv_path, report);
      if (!json_path.empty()) std::ofstream(json_path) << eval::summary_json(report).dump(2) << '\n';
    } else if (ablation->parsed()) {
      auto cfg = load(common);
      pipeline::AblationOptions opts;
      if (!variants.empty()) opts.variants = variants;
      auto res = pipeline::ablation_report(cfg, opts, log_line);
      std::cout << res.tables << '\n';
    } else if (run_all->parsed()) {
      auto cfg = load(common);
      auto report = pipeline::run_pipeline(cfg, log_line);
      std::cout << report.dump(2) << '\n';
      if (with_ablation) std::cout << pipeline::ablation_report(cfg, {}, log_line).tables << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
