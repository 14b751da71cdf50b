#include "mqp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include "mqp/dataset.hpp"
#include "mqp/evaluation.hpp"
#include "mqp/flow_io.hpp"
#include "mqp/image_io.hpp"
#include "mqp/motion_quality.hpp"
#include "mqp/theta.hpp"
#include "mqp/trainset_builder.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mqp::pipeline {

// ---------------------------------------------------------------- config

void PipelineConfig::validate() const {
  if (window < 1) throw ConfigError("window must be >= 1, got " + std::to_string(window));
  mqpm.validate();
  refine.validate();
  if (flow.kind != "directory" && flow.kind != "command") throw ConfigError("unknown flow provider " + flow.kind);
  if (flow.kind == "command" && flow.command.empty()) throw ConfigError("flow.command is required");
  if (theta.kind != "contrast" && theta.kind != "directory" && theta.kind != "command") {
    throw ConfigError("unknown theta backend " + theta.kind);
  }
  for (int w : ablation_windows)
    if (w < 1) throw ConfigError("ablation windows must be >= 1");
  auto need = [](const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string(what) + " is not configured");
    if (!fs::exists(p)) throw ConfigError(std::string(what) + " does not exist: " + p.string());
  };
  need(train.frames, "train.frames");
  need(train.gt, "train.gt");
  need(test.frames, "test.frames");
  // checked in stage 2, which reports the missing directory
  if (test.sota.empty()) throw ConfigError("test.sota is not configured");
  if (flow.kind == "directory") {
    need(train.flows, "train.flows");
    need(test.flows, "test.flows");
  }
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

SplitRoots split_from_json(const json& j, const fs::path& base) {
  SplitRoots s;
  if (j.contains("root")) {
    auto layout = data::CorpusLayout::under(resolve(base, j.at("root").get<std::string>()));
    s = {layout.frames, layout.gt, layout.flows, layout.sota};
  }
  if (j.contains("frames")) s.frames = resolve(base, j.at("frames").get<std::string>());
  if (j.contains("gt")) s.gt = resolve(base, j.at("gt").get<std::string>());
  if (j.contains("flows")) s.flows = resolve(base, j.at("flows").get<std::string>());
  if (j.contains("sota")) s.sota = resolve(base, j.at("sota").get<std::string>());
  return s;
}

json split_to_json(const SplitRoots& s) {
  return {{"frames", s.frames.string()}, {"gt", s.gt.string()}, {"flows", s.flows.string()}, {"sota", s.sota.string()}};
}

}  // namespace

PipelineConfig config_from_json(const json& j, const fs::path& base) {
  PipelineConfig c;
  try {
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      SyntheticSetup setup;
      setup.train_root = resolve(base, s.value("train_root", "data/train"));
      setup.test_root = resolve(base, s.value("test_root", "data/test"));
      setup.train = s.value("train", synth::SynthSpec{});
      setup.test = s.value("test", synth::SynthSpec{});
      auto tl = data::CorpusLayout::under(setup.train_root);
      auto sl = data::CorpusLayout::under(setup.test_root);
      c.train = {tl.frames, tl.gt, tl.flows, tl.sota};
      c.test = {sl.frames, sl.gt, sl.flows, sl.sota};
      c.synthetic = setup;
    }
    if (j.contains("train")) {
      auto s = split_from_json(j.at("train"), base);
      for (auto [dst, src] : {std::pair{&c.train.frames, &s.frames}, {&c.train.gt, &s.gt},
                              {&c.train.flows, &s.flows}, {&c.train.sota, &s.sota}})
        if (!src->empty()) *dst = *src;
    }
    if (j.contains("test")) {
      auto s = split_from_json(j.at("test"), base);
      for (auto [dst, src] : {std::pair{&c.test.frames, &s.frames}, {&c.test.gt, &s.gt},
                              {&c.test.flows, &s.flows}, {&c.test.sota, &s.sota}})
        if (!src->empty()) *dst = *src;
    }
    if (j.contains("flow")) {
      c.flow.kind = j["flow"].value("kind", c.flow.kind);
      c.flow.command = j["flow"].value("command", c.flow.command);
    }
    if (j.contains("theta")) {
      c.theta.kind = j["theta"].value("kind", c.theta.kind);
      c.theta.arg = j["theta"].value("arg", c.theta.arg);
      if (c.theta.kind == "directory") c.theta.arg = resolve(base, c.theta.arg).string();
    }
    c.target_method = j.value("target_method", c.target_method);
    if (j.contains("mqpm")) c.mqpm = j.at("mqpm").get<mqpm::MqpmConfig>();
    if (j.contains("refine")) c.refine = j.at("refine").get<refine::RefineConfig>();
    c.window = j.value("window", c.window);
    c.out = resolve(base, j.value("out", std::string("out")));
    if (j.contains("flow_max_magnitude") && !j["flow_max_magnitude"].is_null()) {
      c.flow_max_magnitude = j["flow_max_magnitude"].get<double>();
    }
    c.ablation_windows = j.value("ablation_windows", c.ablation_windows);
    if (j.contains("seed")) apply_seed(c, j.at("seed").get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid pipeline config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path());
}

json config_to_json(const PipelineConfig& c) {
  json j = {{"train", split_to_json(c.train)},
            {"test", split_to_json(c.test)},
            {"flow", {{"kind", c.flow.kind}, {"command", c.flow.command}}},
            {"theta", {{"kind", c.theta.kind}, {"arg", c.theta.arg}}},
            {"target_method", c.target_method},
            {"mqpm", c.mqpm},
            {"refine", c.refine},
            {"window", c.window},
            {"out", c.out.string()},
            {"seed", c.seed},
            {"flow_max_magnitude", c.flow_max_magnitude ? json(*c.flow_max_magnitude) : json(nullptr)},
            {"ablation_windows", c.ablation_windows}};
  if (c.synthetic) {
    j["synthetic"] = {{"train_root", c.synthetic->train_root.string()},
                      {"test_root", c.synthetic->test_root.string()},
                      {"train", c.synthetic->train},
                      {"test", c.synthetic->test}};
  }
  return j;
}

void apply_seed(PipelineConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.mqpm.seed = seed;
  c.refine.seed = seed;
}

// ---------------------------------------------------------------- helpers

namespace {

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IntegrationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::unique_ptr<flow::FlowProvider> make_flow_provider(const PipelineConfig& c, const SplitRoots& split,
                                                       const std::string& split_name) {
  if (c.flow.kind == "command") {
    return std::make_unique<flow::CommandFlowProvider>(c.flow.command, c.out / "cache" / "flows" / split_name);
  }
  return std::make_unique<flow::DirectoryFlowProvider>(split.flows);
}

std::unique_ptr<theta::SaliencyBackend> make_theta(const PipelineConfig& c) {
  return theta::make_backend(c.theta.kind, c.theta.arg, c.out / "cache" / "theta");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json loss_json(const std::vector<mqpm::EpochLoss>& log) {
  json arr = json::array();
  for (const auto& e : log) arr.push_back({{"epoch", e.epoch}, {"bce", e.bce}, {"cls", e.cls}, {"total", e.total}});
  return arr;
}

template <typename Fn>
auto stage_guard(int stage, const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, name, e.what());
  }
}

}  // namespace

void ensure_synthetic(const PipelineConfig& c, const Logger& log) {
  if (!c.synthetic) return;
  for (auto [root, spec] : {std::pair{&c.synthetic->train_root, &c.synthetic->train},
                            std::pair{&c.synthetic->test_root, &c.synthetic->test}}) {
    if (fs::exists(*root / "spec.json")) continue;
    auto s = synth::gen_synthetic(*spec, *root);
    say(log, "generated " + std::to_string(s.frames) + " frames and " + std::to_string(s.flows) + " flows under " +
                 root->string());
  }
}

// ---------------------------------------------------------------- stages

json run_stage1(const PipelineConfig& c, const Logger& log) {
  return stage_guard(1, "train-mqpm", [&] {
    const StagePaths paths(c.out);
    auto t0 = std::chrono::steady_clock::now();
    auto frames = data::scan_frames(c.train.frames);
    auto pairs = data::frame_pairs(frames);
    if (pairs.empty()) throw DegenerateInput("training split has no frame pairs");
    auto provider = make_flow_provider(c, c.train, "train");
    auto theta = make_theta(c);

    std::vector<quality::AnnotatedFlowFrame> annotated;
    for (const auto& p : pairs) {
      auto gt_path = data::map_path(c.train.gt, p.frame_id);
      if (!fs::exists(gt_path)) throw MissingDependency("no GT mask for training frame " + p.frame_id);
      annotated.push_back({p.frame_id, provider->flow(p), io::read_mask(gt_path)});
    }
    quality::TrainsetOptions opts;
    opts.flow_max_magnitude = c.flow_max_magnitude;
    auto ts = quality::build_mqpm_trainset(annotated, *theta, opts);
    annotated.clear();
    quality::write_records(paths.step1 / "quality_records.tsv", ts.records);
    quality::write_fit_summary(paths.step1 / "fit.json", ts.fit, ts.positives, ts.negatives);
    say(log, "stage 1: " + std::to_string(ts.positives) + " high / " + std::to_string(ts.negatives) +
                 " low quality frames, lambda = " + std::to_string(ts.fit.lam));

    auto result = mqpm::train_mqpm(ts.samples, c.mqpm);
    nn::save_checkpoint(paths.step1 / "mqpm.ckpt", result.checkpoint);
    mqpm::write_loss_csv(paths.step1 / "mqpm_loss.csv", result.log);
    auto warnings = ts.warnings;
    warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
    for (const auto& w : warnings) say(log, "stage 1 warning: " + w);
    say(log, "stage 1 finished in " + std::to_string(seconds_since(t0)) + " s");

    json summary = {{"frames", ts.samples.size()},
                    {"positives", ts.positives},
                    {"negatives", ts.negatives},
                    {"lambda", ts.fit.lam},
                    {"fallback_reason", ts.fit.fallback_reason},
                    {"checkpoint_id", result.checkpoint.id()},
                    {"loss", loss_json(result.log)},
                    {"warnings", warnings}};
    write_json(paths.step1 / "summary.json", summary);
    return summary;
  });
}

namespace {

void write_candidates_csv(const fs::path& path, const trainset::Selection& sel) {
  std::map<std::string, double> consistency;
  for (const auto& c : sel.candidates) consistency[c.frame_id] = c.consistency;
  std::ofstream out(path);
  out << "frame_id,frame,quality_confidence,decision,consistency\n" << std::setprecision(17);
  for (const auto& s : sel.scored) {
    out << s.frame_id << ',' << s.frame_path.string() << ',' << s.quality_confidence << ','
        << (s.quality_decision ? 1 : 0) << ',';
    if (auto it = consistency.find(s.frame_id); it != consistency.end()) out << it->second;
    out << '\n';
  }
}

}  // namespace

std::vector<ScoredRow> read_candidates_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDependency("candidate table not found: " + path.string());
  std::vector<ScoredRow> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 5) throw FormatError("malformed candidate row: " + line);
    ScoredRow r{cells[0], cells[1], std::stod(cells[2]), cells[3] == "1", std::nullopt};
    if (!cells[4].empty()) r.consistency = std::stod(cells[4]);
    rows.push_back(std::move(r));
  }
  return rows;
}

json run_stage2(const PipelineConfig& c, const Logger& log) {
  return stage_guard(2, "build-trainset", [&] {
    const StagePaths paths(c.out);
    auto t0 = std::chrono::steady_clock::now();
    if (!fs::is_directory(c.test.sota)) {
      throw MissingDependency("target-method map directory not found: " + c.test.sota.string());
    }
    auto ckpt = nn::load_checkpoint(paths.step1 / "mqpm.ckpt");
    auto model = mqpm::MqpmModel::from_checkpoint(ckpt);
    auto frames = data::scan_frames(c.test.frames);
    auto pairs = data::frame_pairs(frames);
    auto provider = make_flow_provider(c, c.test, "test");

    auto sel = trainset::select_candidates(pairs, *provider, model, c.test.sota, c.flow_max_magnitude);
    for (const auto& s : sel.scored) io::write_map(data::map_path(paths.step2 / "motion_maps", s.frame_id), s.motion_saliency);
    write_candidates_csv(paths.step2 / "candidates.csv", sel);
    for (const auto& w : sel.warnings) say(log, "stage 2 warning: " + w);

    auto filtered = trainset::filter_window(sel.candidates, c.window);
    trainset::ManifestInfo info;
    info.window = c.window;
    info.target_method = c.target_method;
    info.mqpm_checkpoint_id = ckpt.id();
    info.corpus_frames = static_cast<int>(pairs.size());
    for (const auto& cand : sel.candidates) info.candidate_consistency.push_back(cand.consistency);
    auto stats = trainset::selection_stats(info, filtered);
    trainset::write_selection_stats(paths.step2 / "selection_stats.csv", {{c.window, stats, {}, {}, {}}});
    auto manifest = trainset::build_manifest(filtered, c.test.sota, paths.step2, info);
    say(log, "stage 2: " + std::to_string(sel.candidates.size()) + " of " + std::to_string(pairs.size()) +
                 " frames accepted, " + std::to_string(filtered.size()) + " kept with W = " +
                 std::to_string(c.window) + " (" + std::to_string(seconds_since(t0)) + " s)");

    json summary = {{"corpus_frames", stats.corpus_frames},
                    {"accepted", stats.accepted},
                    {"acceptance_fraction", stats.acceptance_fraction},
                    {"survivors", stats.survivors},
                    {"window", c.window},
                    {"candidate_mean_consistency", stats.candidate_mean_consistency},
                    {"survivor_mean_consistency", stats.survivor_mean_consistency},
                    {"mqpm_checkpoint", ckpt.id()},
                    {"warnings", sel.warnings}};
    write_json(paths.step2 / "summary.json", summary);
    return summary;
  });
}

json run_stage3(const PipelineConfig& c, const Logger& log) {
  return stage_guard(3, "train-refine", [&] {
    const StagePaths paths(c.out);
    auto t0 = std::chrono::steady_clock::now();
    auto manifest = trainset::read_manifest(paths.step2 / "manifest.json");
    auto result = refine::train_refine(manifest, c.refine);
    nn::save_checkpoint(paths.step3 / "refine.ckpt", result.checkpoint);
    mqpm::write_loss_csv(paths.step3 / "refine_loss.csv", result.log);
    auto frames = data::scan_frames(c.test.frames);
    refine::infer_to_directory(frames, result.checkpoint, paths.step3 / "maps");
    say(log, "stage 3: trained on " + std::to_string(manifest.entries.size()) + " frames, wrote " +
                 std::to_string(frames.size()) + " maps (" + std::to_string(seconds_since(t0)) + " s)");

    json summary = {{"entries", manifest.entries.size()},
                    {"visited", result.visited.size()},
                    {"checkpoint_id", result.checkpoint.id()},
                    {"maps", frames.size()},
                    {"loss", loss_json(result.log)}};
    if (!c.test.gt.empty() && fs::is_directory(c.test.gt)) {
      auto refined = eval::evaluate(paths.step3 / "maps", c.test.gt);
      auto target = eval::evaluate(c.test.sota, c.test.gt);
      eval::write_per_frame_csv(paths.step3 / "metrics.csv", refined);
      summary["metrics"] = {{"refined", eval::summary_json(refined)}, {"target", eval::summary_json(target)}};
      say(log, "\n" + eval::format_table({{c.target_method, target}, {"refined", refined}}));
    }
    write_json(paths.step3 / "summary.json", summary);
    return summary;
  });
}

json run_pipeline(const PipelineConfig& c, const Logger& log) {
  stage_guard(0, "setup", [&] {
    ensure_synthetic(c, log);
    c.validate();
    return 0;
  });
  json report = {{"config", config_to_json(c)}};
  report["stage1"] = run_stage1(c, log);
  report["stage2"] = run_stage2(c, log);
  report["stage3"] = run_stage3(c, log);
  write_json(c.out / "report.json", report);
  return report;
}

// ---------------------------------------------------------------- ablation

const metrics::MetricsReport* AblationResult::find(const std::string& name) const {
  for (const auto& [n, r] : variants)
    if (n == name) return &r;
  return nullptr;
}

namespace {

std::vector<std::string> ids_of(const std::vector<ScoredRow>& rows) {
  std::vector<std::string> ids;
  for (const auto& r : rows) ids.push_back(r.frame_id);
  return ids;
}

trainset::CandidateFrame candidate_from(const ScoredRow& row, const fs::path& motion_dir, const fs::path& sota_dir) {
  trainset::CandidateFrame c;
  c.frame_id = row.frame_id;
  c.frame_path = row.frame;
  c.quality_decision = row.decision;
  c.motion_saliency = io::read_map(data::map_path(motion_dir, row.frame_id));
  if (row.consistency) {
    c.consistency = *row.consistency;
  } else {
    c.consistency = metrics::consistency_degree(c.motion_saliency, io::read_map(data::map_path(sota_dir, row.frame_id)));
  }
  return c;
}

metrics::MetricsReport train_and_score(const PipelineConfig& c, const trainset::TrainingManifest& manifest,
                                       const fs::path& dir, const std::vector<data::FrameEntry>& frames,
                                       const std::vector<std::string>& eval_ids) {
  auto result = refine::train_refine(manifest, c.refine);
  nn::save_checkpoint(dir / "refine.ckpt", result.checkpoint);
  mqpm::write_loss_csv(dir / "refine_loss.csv", result.log);
  refine::infer_to_directory(frames, result.checkpoint, dir / "maps");
  return eval::evaluate(dir / "maps", c.test.gt, eval_ids);
}

std::string window_table(const std::vector<WindowRow>& rows) {
  std::ostringstream s;
  s << std::setw(4) << "W" << std::setw(8) << "T" << std::setw(10) << "frames" << std::setw(9) << "maxF"
    << std::setw(9) << "S-M" << std::setw(9) << "MAE" << '\n'
    << std::string(49, '-') << '\n';
  for (const auto& r : rows) {
    std::ostringstream t;
    t << "1/" << r.window;
    s << std::setw(4) << r.window << std::setw(8) << (r.window == 1 ? std::string("1") : t.str()) << std::setw(10)
      << r.survivors << std::fixed << std::setprecision(3) << std::setw(9) << r.report.max_f << std::setw(9)
      << r.report.s_measure << std::setw(9) << r.report.mae << '\n';
    s.unsetf(std::ios::fixed);
  }
  return s.str();
}

}  // namespace

AblationResult ablation_report(const PipelineConfig& c, const AblationOptions& options, const Logger& log) {
  AblationResult res;
  const StagePaths paths(c.out);
  const fs::path dir = c.out / "ablation";
  auto want = [&](const std::string& v) {
    return std::find(options.variants.begin(), options.variants.end(), v) != options.variants.end();
  };
  auto notice = [&](const std::string& msg) {
    res.notices.push_back(msg);
    say(log, "ablation: " + msg);
  };
  if (c.test.gt.empty() || !fs::is_directory(c.test.gt)) {
    throw MissingDependency("ablation needs test GT masks; test.gt is not available");
  }

  const auto rows = read_candidates_csv(paths.step2 / "candidates.csv");
  const auto eval_ids = ids_of(rows);
  const auto frames = data::scan_frames(c.test.frames);
  const fs::path motion_dir = paths.step2 / "motion_maps";
  std::vector<ScoredRow> accepted, rejected;
  for (const auto& r : rows) (r.decision ? accepted : rejected).push_back(r);

  res.target = eval::evaluate(c.test.sota, c.test.gt, eval_ids);

  std::optional<trainset::TrainingManifest> main_manifest;
  if (fs::exists(paths.step2 / "manifest.json")) main_manifest = trainset::read_manifest(paths.step2 / "manifest.json");

  auto run_variant = [&](const std::string& key, const std::string& name, auto&& fn) {
    if (!want(key)) return;
    try {
      auto t0 = std::chrono::steady_clock::now();
      res.variants.emplace_back(name, fn());
      say(log, "ablation: " + name + " done (" + std::to_string(seconds_since(t0)) + " s)");
    } catch (const std::exception& e) {
      notice(name + " omitted: " + e.what());
    }
  };

  run_variant("ms_baseline", kMsBaseline, [&] {
    auto theta = make_theta(c);
    auto provider = make_flow_provider(c, c.test, "test");
    for (const auto& p : data::frame_pairs(frames)) {
      auto rgb = flow::encode_color_wheel(provider->flow(p), c.flow_max_magnitude);
      io::write_map(data::map_path(dir / "ms_baseline" / "maps", p.frame_id), theta->predict(rgb, p.frame_id));
    }
    return eval::evaluate(dir / "ms_baseline" / "maps", c.test.gt, eval_ids);
  });

  trainset::ManifestInfo info;
  info.target_method = c.target_method;
  info.window = c.window;
  info.corpus_frames = static_cast<int>(rows.size());
  if (main_manifest) info.mqpm_checkpoint_id = main_manifest->mqpm_checkpoint_id;
  for (const auto& r : accepted) info.candidate_consistency.push_back(r.consistency.value_or(0.0));

  run_variant("ms_minus_mqpm", kMsMinusMqpm, [&] {
    if (!main_manifest) throw MissingDependency("step 2 manifest is missing");
    std::size_t n = std::min(main_manifest->entries.size(), rows.size());
    std::vector<std::size_t> idx(rows.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(c.seed ^ 0xA5A5A5A5DEADBEEFull);
    for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng() % (idx.size() - i)]);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    std::vector<trainset::CandidateFrame> picked;
    for (auto i : idx) picked.push_back(candidate_from(rows[i], motion_dir, c.test.sota));
    auto m = trainset::build_motion_manifest(picked, dir / "ms_minus_mqpm", info);
    return train_and_score(c, m, dir / "ms_minus_mqpm", frames, eval_ids);
  });

  std::vector<trainset::CandidateFrame> candidates;
  for (const auto& r : accepted) candidates.push_back(candidate_from(r, motion_dir, c.test.sota));

  run_variant("ms_mqpm", kMsMqpm, [&] {
    auto filtered = trainset::filter_window(candidates, c.window);
    auto m = trainset::build_motion_manifest(filtered, dir / "ms_mqpm", info);
    return train_and_score(c, m, dir / "ms_mqpm", frames, eval_ids);
  });

  run_variant("full", kFull, [&] {
    if (!fs::is_directory(paths.step3 / "maps")) throw MissingDependency("step 3 maps are missing");
    return eval::evaluate(paths.step3 / "maps", c.test.gt, eval_ids);
  });

  if (want("hq_lq")) {
    if (accepted.empty() || rejected.empty()) {
      notice("HQ/LQ split omitted: one side of the split is empty");
    } else {
      res.hq = eval::evaluate(c.test.sota, c.test.gt, ids_of(accepted));
      res.lq = eval::evaluate(c.test.sota, c.test.gt, ids_of(rejected));
    }
  }

  std::vector<trainset::SelectionRow> selection_rows;
  if (want("window_sweep")) {
    for (int w : c.ablation_windows) {
      try {
        auto t0 = std::chrono::steady_clock::now();
        auto filtered = trainset::filter_window(candidates, w);
        trainset::ManifestInfo winfo = info;
        winfo.window = w;
        WindowRow row{w, static_cast<int>(filtered.size()), {}};
        const auto* full = res.find(kFull);
        if (w == c.window && full) {
          row.report = *full;
        } else {
          fs::path wdir = dir / ("window_" + std::to_string(w));
          auto m = trainset::build_manifest(filtered, c.test.sota, wdir, winfo);
          row.report = train_and_score(c, m, wdir, frames, eval_ids);
        }
        selection_rows.push_back({w, trainset::selection_stats(winfo, filtered), row.report.max_f,
                                  row.report.s_measure, row.report.mae});
        res.windows.push_back(std::move(row));
        say(log, "ablation: W = " + std::to_string(w) + " done (" + std::to_string(seconds_since(t0)) + " s)");
      } catch (const std::exception& e) {
        notice("W = " + std::to_string(w) + " omitted: " + e.what());
      }
    }
    trainset::write_selection_stats(dir / "selection_stats.csv", selection_rows);
  }

  std::ostringstream tables;
  tables << "Variants\n";
  std::vector<std::pair<std::string, metrics::MetricsReport>> vrows;
  if (res.target) vrows.emplace_back(c.target_method, *res.target);
  for (const auto& v : res.variants) vrows.push_back(v);
  tables << eval::format_table(vrows);
  if (res.hq && res.lq) {
    tables << "\n" << c.target_method << " maps split by MQPM decision\n"
           << eval::format_table({{"HQ", *res.hq}, {"LQ", *res.lq}});
  }
  if (!res.windows.empty()) tables << "\nKeep ratio sweep\n" << window_table(res.windows);
  for (const auto& n : res.notices) tables << "\nnotice: " << n;
  res.tables = tables.str();

  json j = {{"target", res.target ? eval::summary_json(*res.target) : json(nullptr)}, {"notices", res.notices}};
  for (const auto& [name, r] : res.variants) j["variants"][name] = eval::summary_json(r);
  if (res.hq) j["hq"] = eval::summary_json(*res.hq);
  if (res.lq) j["lq"] = eval::summary_json(*res.lq);
  for (const auto& w : res.windows) {
    j["windows"].push_back({{"window", w.window}, {"survivors", w.survivors}, {"metrics", eval::summary_json(w.report)}});
  }
  write_json(dir / "ablation.json", j);
  fs::create_directories(dir);
  std::ofstream(dir / "tables.txt") << res.tables << '\n';
  return res;
}

}  // namespace mqp::pipeline
