#include "lusview/pipeline.hpp"

#include <algorithm>

#include "lusview/rng.hpp"

namespace lusview {

void apply_params_json(PipelineConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidParams, "params must be a JSON object");
  if (j.contains("summarizer")) cfg.summarizer = summarizer_params_from_json(j["summarizer"]);
  if (j.contains("analyzer")) cfg.analyzer = analyzer_params_from_json(j["analyzer"]);
}

AnalysisBundle run_pipeline(std::span<const std::uint8_t> bytes, const std::string& filename,
                            const PipelineConfig& cfg) {
  cfg.analyzer.validate();
  cfg.style.validate();
  const FrameSequence seq = decode(bytes, filename, cfg.decoder);

  const auto summarizer = make_summarizer(cfg.summarizer_name);
  const SummaryResult summary = summarizer->summarize(seq, cfg.summarizer.resolved(seq.size()));
  validate_summary(summary, seq.size());

  const auto analyzer = make_analyzer(cfg.analyzer_name);
  std::vector<FrameAnnotation> anns;
  anns.reserve(summary.keyframe_indices.size());
  for (const auto idx : summary.keyframe_indices) {
    FrameAnnotation ann = analyzer->analyze_frame(seq[idx], cfg.analyzer);
    validate_annotation(ann, seq.width(), seq.height(), cfg.analyzer.flag_confidence_theta);
    ann.frame_index = idx;
    anns.push_back(std::move(ann));
  }
  return build_bundle(seq, summary, anns, cfg.style);
}

BundleInfo BundleInfo::of(const AnalysisBundle& b) {
  BundleInfo info{b.video_name(), b.fps(), b.source_frames(), b.summary(), {}};
  for (const auto& a : b.annotations()) {
    if (a.abnormal) info.abnormal_frames.push_back(a.frame_index);
  }
  return info;
}

bool BundleInfo::abnormal(std::uint32_t frame_index) const {
  return std::binary_search(abnormal_frames.begin(), abnormal_frames.end(), frame_index);
}

void to_json(nlohmann::json& j, const BundleInfo& info) {
  j = {{"video_name", info.video_name},
       {"fps", {info.fps.num, info.fps.den}},
       {"source_frames", info.source_frames},
       {"summary", info.summary},
       {"abnormal_frames", info.abnormal_frames}};
}

BundleInfo bundle_info_from_json(const nlohmann::json& j) {
  try {
    BundleInfo info;
    info.video_name = j.at("video_name").get<std::string>();
    info.fps = make_rational(j.at("fps").at(0).get<std::int64_t>(), j.at("fps").at(1).get<std::int64_t>());
    info.source_frames = j.at("source_frames").get<std::size_t>();
    info.summary = summary_from_json(j.at("summary"));
    info.abnormal_frames = j.at("abnormal_frames").get<std::vector<std::uint32_t>>();
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("bundle record: ") + e.what());
  }
}

std::uint64_t keyframe_seed(const std::string& key, std::uint32_t video_id) {
  std::string id_bytes(4, '\0');
  for (int i = 0; i < 4; ++i) id_bytes[i] = static_cast<char>((video_id >> (8 * i)) & 0xFF);
  return fnv1a64(id_bytes, fnv1a64(key));
}

std::string sanitize_name(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '_' || c == '-';
    out += ok ? c : '_';
  }
  while (!out.empty() && out.front() == '.') out.erase(out.begin());
  if (out.size() > 64) out.resize(64);
  if (out.empty()) out = "video";
  return out;
}

std::string video_dir_name(std::uint32_t video_id, const std::string& source_name) {
  return "video_" + std::to_string(video_id) + "_" + sanitize_name(source_name);
}

UrlScheme UrlScheme::api(const std::string& key) {
  return {[key](std::uint32_t vid, const std::string& artifact) {
            return "/api/media/" + key + "/" + std::to_string(vid) + "/" + artifact;
          },
          "/api/download/" + key};
}

UrlScheme UrlScheme::relative(const std::vector<std::string>& video_dirs) {
  return {[video_dirs](std::uint32_t vid, const std::string& artifact) { return video_dirs.at(vid) + "/" + artifact; },
          ""};
}

nlohmann::json keyframe_entries(const VideoRef& v, std::span<const std::uint32_t> indices, const UrlScheme& urls) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto idx : indices) {
    nlohmann::json images = nlohmann::json::object();
    for (const char* variant : kVariants) images[variant] = urls.media(v.video_id, keyframe_artifact(idx, variant));
    out.push_back({{"index", idx}, {"abnormal", v.info->abnormal(idx)}, {"images", images}});
  }
  return out;
}

nlohmann::json results_manifest(const std::string& key, std::span<const VideoRef> videos, const UrlScheme& urls) {
  nlohmann::json list = nlohmann::json::array();
  for (const VideoRef& v : videos) {
    const std::uint64_t seed = keyframe_seed(key, v.video_id);
    const auto picks = sample_keyframes(v.info->summary, kDefaultKeyframeSamples, seed);
    list.push_back({{"video_id", v.video_id},
                    {"source_name", v.source_name},
                    {"fps", v.info->fps.value()},
                    {"frame_count", v.info->source_frames},
                    {"keyframe_count", v.info->summary.keyframe_indices.size()},
                    {"abnormal_count", v.info->abnormal_frames.size()},
                    {"videos",
                     {{"summarized", urls.media(v.video_id, "summarized.avi")},
                      {"segmented", urls.media(v.video_id, "segmented.avi")},
                      {"tagged", urls.media(v.video_id, "tagged.avi")}}},
                    {"annotations", urls.media(v.video_id, "annotations.json")},
                    {"keyframe_seed", seed},
                    {"keyframes", keyframe_entries(v, picks, urls)}});
  }
  return {{"key", key}, {"videos", list}, {"zip", urls.zip}};
}

std::vector<zip::Entry> export_layout(const std::string& key, std::span<const VideoRef> videos,
                                      const nlohmann::json& manifest, const ArtifactReader& read) {
  std::vector<zip::Entry> entries;
  for (const VideoRef& v : videos) {
    const std::string dir = video_dir_name(v.video_id, v.source_name) + "/";
    for (const char* name : {"summarized.avi", "segmented.avi", "tagged.avi", "annotations.json"}) {
      entries.push_back({dir + name, read(v.video_id, name)});
    }
    for (const auto idx : sample_keyframes(v.info->summary, kDefaultKeyframeSamples, keyframe_seed(key, v.video_id))) {
      for (const char* variant : kVariants) {
        const std::string artifact = keyframe_artifact(idx, variant);
        entries.push_back({dir + artifact, read(v.video_id, artifact)});
      }
    }
  }
  const std::string m = manifest.dump(2) + "\n";
  entries.push_back({"manifest.json", std::vector<std::uint8_t>(m.begin(), m.end())});
  return entries;
}

std::size_t default_worker_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return std::clamp<std::size_t>(hw == 0 ? 1 : hw, 1, 4);
}

WorkerPool::WorkerPool(std::size_t threads) {
  threads = std::max<std::size_t>(1, threads);
  threads_.reserve(threads);
  for (std::size_t i = 0; i < threads; ++i) threads_.emplace_back([this] { run(); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::submit(std::function<void()> task) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back(std::move(task));
  }
  cv_.notify_one();
}

void WorkerPool::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && active_ == 0; });
}

void WorkerPool::discard_pending() {
  {
    std::lock_guard lock(mu_);
    queue_.clear();
  }
  idle_cv_.notify_all();
}

void WorkerPool::run() {
  while (true) {
    std::function<void()> task;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;  // stopping and drained
      task = std::move(queue_.front());
      queue_.pop_front();
      ++active_;
    }
    try {
      task();
    } catch (...) {
      // tasks report their own failures
    }
    {
      std::lock_guard lock(mu_);
      --active_;
    }
    idle_cv_.notify_all();
  }
}

}  // namespace lusview
