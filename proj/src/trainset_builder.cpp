#include "mqp/trainset_builder.hpp"

#include <fstream>
#include <iomanip>
#include <numeric>

#include <json.hpp>

#include "mqp/dataset.hpp"
#include "mqp/errors.hpp"
#include "mqp/image_io.hpp"
#include "mqp/parallel.hpp"
#include "mqp/saliency_metrics.hpp"

namespace fs = std::filesystem;

namespace mqp::trainset {

Selection select_candidates(const std::vector<flow::FramePair>& frames, flow::FlowProvider& flows,
                            const mqpm::MqpmModel& model, const fs::path& sota_dir,
                            std::optional<double> flow_max_magnitude) {
  if (!fs::is_directory(sota_dir)) {
    throw IntegrationError("target-method map directory not found: " + sota_dir.string());
  }
  Selection sel;
  sel.scored.resize(frames.size());
  std::vector<std::optional<CandidateFrame>> cands(frames.size());

  parallel_for(frames.size(), [&](std::size_t i) {
    const auto& pair = frames[i];
    auto rgb = flow::encode_color_wheel(flows.flow(pair), flow_max_magnitude);
    auto pred = mqpm::predict_quality(rgb, model);
    ScoredFrame& s = sel.scored[i];
    s.frame_id = pair.frame_id;
    s.frame_path = pair.frame_t;
    s.motion_saliency = std::move(pred.output.motion_saliency);
    s.quality_confidence = pred.output.quality_confidence;
    s.quality_decision = pred.decision;
    if (!s.quality_decision) return;

    auto sota_path = data::map_path(sota_dir, pair.frame_id);
    if (!fs::exists(sota_path)) {
      throw IntegrationError("missing target-method map for frame " + pair.frame_id + " (" +
                             sota_path.string() + ")");
    }
    CandidateFrame c;
    c.frame_id = pair.frame_id;
    c.frame_path = pair.frame_t;
    c.motion_saliency = s.motion_saliency;
    c.sota_map = io::read_map(sota_path);
    if (!c.sota_map.same_shape(c.motion_saliency)) {
      throw IntegrationError("target-method map and flow field differ in size for frame " + pair.frame_id);
    }
    c.consistency = metrics::consistency_degree(c.motion_saliency, c.sota_map);
    cands[i] = std::move(c);
  });

  for (auto& c : cands)
    if (c) sel.candidates.push_back(std::move(*c));
  if (sel.candidates.empty()) sel.warnings.push_back("no frame was judged to carry high-quality motion");
  return sel;
}

std::vector<std::size_t> window_indices(std::span<const std::string> sequences,
                                        std::span<const double> consistency, int window) {
  if (window < 1) throw ConfigError("window must be >= 1, got " + std::to_string(window));
  if (sequences.size() != consistency.size()) throw InvalidInput("window_indices: length mismatch");
  std::vector<std::size_t> keep;
  std::size_t i = 0;
  while (i < sequences.size()) {
    std::size_t run_end = i;
    while (run_end < sequences.size() && sequences[run_end] == sequences[i]) ++run_end;
    for (std::size_t start = i; start < run_end; start += window) {
      std::size_t end = std::min(run_end, start + static_cast<std::size_t>(window));
      std::size_t best = start;
      for (std::size_t k = start + 1; k < end; ++k)
        if (consistency[k] > consistency[best]) best = k;
      keep.push_back(best);
    }
    i = run_end;
  }
  return keep;
}

std::vector<CandidateFrame> filter_window(const std::vector<CandidateFrame>& candidates, int window) {
  std::vector<std::string> seqs;
  std::vector<double> cons;
  for (const auto& c : candidates) {
    seqs.push_back(c.sequence());
    cons.push_back(c.consistency);
  }
  std::vector<CandidateFrame> out;
  for (auto k : window_indices(seqs, cons, window)) out.push_back(candidates[k]);
  return out;
}

SelectionStats selection_stats(const ManifestInfo& info, std::span<const CandidateFrame> filtered) {
  SelectionStats s;
  s.corpus_frames = info.corpus_frames;
  s.accepted = static_cast<int>(info.candidate_consistency.size());
  s.survivors = static_cast<int>(filtered.size());
  s.acceptance_fraction = info.corpus_frames > 0 ? static_cast<double>(s.accepted) / info.corpus_frames : 0.0;
  const auto& cc = info.candidate_consistency;
  s.candidate_mean_consistency = cc.empty() ? 0.0 : std::accumulate(cc.begin(), cc.end(), 0.0) / cc.size();
  double sum = 0.0;
  for (const auto& c : filtered) sum += c.consistency;
  s.survivor_mean_consistency = filtered.empty() ? 0.0 : sum / filtered.size();
  return s;
}

namespace {

TrainingManifest manifest_header(const std::vector<CandidateFrame>& filtered, const ManifestInfo& info) {
  if (filtered.empty()) throw DegenerateInput("no frames survived selection; the training manifest would be empty");
  TrainingManifest m;
  m.window = info.window;
  m.target_method = info.target_method;
  m.mqpm_checkpoint_id = info.mqpm_checkpoint_id;
  m.stats = selection_stats(info, filtered);
  return m;
}

}  // namespace

TrainingManifest build_manifest(const std::vector<CandidateFrame>& filtered, const fs::path& sota_dir,
                                const fs::path& out_dir, const ManifestInfo& info) {
  TrainingManifest m = manifest_header(filtered, info);
  m.pseudo_gt_source = "sota";
  for (const auto& c : filtered) {
    m.entries.push_back({c.frame_id, c.frame_path, data::map_path(sota_dir, c.frame_id), c.consistency});
  }
  write_manifest(out_dir / "manifest.json", m);
  return m;
}

TrainingManifest build_motion_manifest(const std::vector<CandidateFrame>& filtered, const fs::path& out_dir,
                                       const ManifestInfo& info) {
  TrainingManifest m = manifest_header(filtered, info);
  m.pseudo_gt_source = "motion";
  for (const auto& c : filtered) {
    auto path = data::map_path(out_dir / "motion_maps", c.frame_id);
    io::write_map(path, c.motion_saliency);
    m.entries.push_back({c.frame_id, c.frame_path, path, c.consistency});
  }
  write_manifest(out_dir / "manifest.json", m);
  return m;
}

void write_manifest(const fs::path& path, const TrainingManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"frame_id", e.frame_id},
                       {"frame", e.frame.string()},
                       {"pseudo_gt", e.pseudo_gt.string()},
                       {"consistency", e.consistency}});
  }
  nlohmann::json j = {
      {"window", m.window},
      {"keep_ratio", 1.0 / m.window},
      {"target_method", m.target_method},
      {"mqpm_checkpoint", m.mqpm_checkpoint_id},
      {"pseudo_gt_source", m.pseudo_gt_source},
      {"selection",
       {{"corpus_frames", m.stats.corpus_frames},
        {"accepted", m.stats.accepted},
        {"survivors", m.stats.survivors},
        {"acceptance_fraction", m.stats.acceptance_fraction},
        {"candidate_mean_consistency", m.stats.candidate_mean_consistency},
        {"survivor_mean_consistency", m.stats.survivor_mean_consistency}}},
      {"entries", entries}};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IntegrationError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

TrainingManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingDependency("manifest not found: " + path.string());
  TrainingManifest m;
  try {
    auto j = nlohmann::json::parse(in);
    m.window = j.at("window").get<int>();
    m.target_method = j.value("target_method", "");
    m.mqpm_checkpoint_id = j.value("mqpm_checkpoint", "");
    m.pseudo_gt_source = j.value("pseudo_gt_source", "sota");
    const auto& s = j.at("selection");
    m.stats.corpus_frames = s.value("corpus_frames", 0);
    m.stats.accepted = s.value("accepted", 0);
    m.stats.survivors = s.value("survivors", 0);
    m.stats.acceptance_fraction = s.value("acceptance_fraction", 0.0);
    m.stats.candidate_mean_consistency = s.value("candidate_mean_consistency", 0.0);
    m.stats.survivor_mean_consistency = s.value("survivor_mean_consistency", 0.0);
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("frame_id").get<std::string>(), e.at("frame").get<std::string>(),
                           e.at("pseudo_gt").get<std::string>(), e.at("consistency").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void write_selection_stats(const fs::path& path, const std::vector<SelectionRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "window,keep_ratio,corpus_frames,accepted,acceptance_fraction,survivors,"
         "candidate_mean_consistency,survivor_mean_consistency,max_f,s_measure,mae\n";
  out << std::setprecision(6);
  auto opt = [&out](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (const auto& r : rows) {
    out << r.window << ',' << 1.0 / r.window << ',' << r.stats.corpus_frames << ',' << r.stats.accepted << ','
        << r.stats.acceptance_fraction << ',' << r.stats.survivors << ',' << r.stats.candidate_mean_consistency
        << ',' << r.stats.survivor_mean_consistency << ',';
    opt(r.max_f);
    out << ',';
    opt(r.s_measure);
    out << ',';
    opt(r.mae);
    out << '\n';
  }
}

}  // namespace mqp::trainset
