#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lusview/analyzer.hpp"
#include "lusview/render.hpp"
#include "lusview/summarizer.hpp"
#include "lusview/video_io.hpp"
#include "lusview/zip.hpp"

namespace lusview {

struct PipelineConfig {
  DecoderConfig decoder;
  SummarizerParams summarizer;
  AnalyzerParams analyzer;
  OverlayStyle style;
  std::string summarizer_name = kDefaultSummarizer;
  std::string analyzer_name = kDefaultAnalyzer;
};

/// Reads {"summarizer": {...}, "analyzer": {...}} parameter overrides.
void apply_params_json(PipelineConfig& cfg, const nlohmann::json& j);

/// decode -> summarize -> analyze keyframes -> build bundle. Plugin outputs are
/// validated at the boundary (ValidationError).
AnalysisBundle run_pipeline(std::span<const std::uint8_t> bytes, const std::string& filename,
                            const PipelineConfig& cfg);

/// What the manifest needs from a bundle, persisted next to the artifacts.
struct BundleInfo {
  std::string video_name;
  Rational fps;
  std::size_t source_frames = 0;
  SummaryResult summary;
  std::vector<std::uint32_t> abnormal_frames;  // ascending

  static BundleInfo of(const AnalysisBundle& b);
  bool abnormal(std::uint32_t frame_index) const;
};

void to_json(nlohmann::json& j, const BundleInfo& info);
BundleInfo bundle_info_from_json(const nlohmann::json& j);

inline constexpr std::uint32_t kDefaultKeyframeSamples = 8;

/// Stable seed for the default keyframe view: FNV-1a over key, then video id.
std::uint64_t keyframe_seed(const std::string& key, std::uint32_t video_id);

std::string sanitize_name(const std::string& name);
/// "video_{id}_{sanitized source name}"
std::string video_dir_name(std::uint32_t video_id, const std::string& source_name);

/// Maps artifacts to the URLs placed in manifests.
struct UrlScheme {
  std::function<std::string(std::uint32_t video_id, const std::string& artifact)> media;
  std::string zip;

  static UrlScheme api(const std::string& key);
  static UrlScheme relative(const std::vector<std::string>& video_dirs);
};

struct VideoRef {
  std::uint32_t video_id;
  std::string source_name;
  const BundleInfo* info;
};

nlohmann::json keyframe_entries(const VideoRef& v, std::span<const std::uint32_t> indices, const UrlScheme& urls);
nlohmann::json results_manifest(const std::string& key, std::span<const VideoRef> videos, const UrlScheme& urls);

using ArtifactReader = std::function<std::vector<std::uint8_t>(std::uint32_t video_id, const std::string& artifact)>;

/// Download layout: per-video directory with the three videos, annotations and
/// the default keyframe PNGs in every variant, then manifest.json.
std::vector<zip::Entry> export_layout(const std::string& key, std::span<const VideoRef> videos,
                                      const nlohmann::json& manifest, const ArtifactReader& read);

std::size_t default_worker_count();

/// Fixed-size FIFO thread pool.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t threads);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  void submit(std::function<void()> task);
  void wait_idle();
  /// Drops queued tasks that have not started.
  void discard_pending();
  std::size_t size() const { return threads_.size(); }

 private:
  void run();

  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<std::function<void()>> queue_;
  std::size_t active_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

}  // namespace lusview
