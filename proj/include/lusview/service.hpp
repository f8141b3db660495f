#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lusview/pipeline.hpp"

namespace lusview {

inline constexpr const char* kVersion = "1.0.0";

struct ServiceConfig {
  std::filesystem::path data_root = "lusview-data";
  std::string host = "127.0.0.1";
  int port = 8000;
  std::size_t workers = default_worker_count();
  std::size_t max_videos = 16;
  std::size_t max_upload_bytes = std::size_t{256} << 20;
  std::chrono::seconds ttl{7 * 24 * 3600};
  std::optional<std::filesystem::path> ui_dir;
  PipelineConfig pipeline;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Applies a JSON config object over cfg. Throws BadConfig.
void apply_config_json(ServiceConfig& cfg, const nlohmann::json& j);

/// LUSVIEW_DATA_ROOT, LUSVIEW_HOST, LUSVIEW_PORT, LUSVIEW_WORKERS, LUSVIEW_MAX_VIDEOS,
/// LUSVIEW_MAX_UPLOAD_BYTES, LUSVIEW_TTL_SECONDS, LUSVIEW_UI_DIR,
/// LUSVIEW_EXTERNAL_DECODER, LUSVIEW_SUMMARIZER, LUSVIEW_ANALYZER.
void apply_env_overrides(ServiceConfig& cfg, const EnvLookup& env);

/// Defaults, then the optional file, then the environment.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env);

EnvLookup process_env();

enum class JobState { Uploaded, Queued, Processing, Complete, Failed };

std::string_view to_string(JobState s);
std::optional<JobState> parse_job_state(std::string_view s);
bool is_terminal(JobState s);
/// Uploaded->Queued->Processing->{Complete|Failed}; Queued->Failed is allowed for
/// decode errors surfacing before processing starts.
bool legal_transition(JobState from, JobState to);

/// 128 random bits as 22-character unpadded URL-safe base64.
std::string generate_job_key();
bool is_well_formed_key(const std::string& key);

struct UploadFile {
  std::string filename;
  std::vector<std::uint8_t> bytes;
};

struct Media {
  std::vector<std::uint8_t> bytes;
  std::string content_type;
};

/// Back end: job lifecycle, processing orchestration, results and exports.
/// Jobs live under data_root/jobs/{key}/ (job.json, uploads/, videos/{id}/).
class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  std::string upload(std::vector<UploadFile> files);
  /// Idempotent: only an Uploaded job is queued; otherwise returns the current state.
  JobState process(const std::string& key);
  nlohmann::json status(const std::string& key) const;
  nlohmann::json results(const std::string& key) const;
  nlohmann::json keyframes(const std::string& key, std::uint32_t video_id, std::uint32_t n, std::uint64_t seed) const;
  Media media(const std::string& key, std::uint32_t video_id, const std::string& artifact) const;
  std::vector<std::uint8_t> download_zip(const std::string& key) const;

  /// Deletes jobs older than the TTL that are not in flight. Returns the number removed.
  std::size_t sweep_expired(std::chrono::system_clock::time_point now);

  /// Blocks until the worker queue drains (tests and offline use).
  void wait_idle();

  JobState state(const std::string& key) const;
  std::size_t job_count() const;
  const ServiceConfig& config() const { return cfg_; }

  /// Replaces the key source (default generate_job_key). Keys already in the
  /// store are rejected and regenerated.
  void set_key_generator(std::function<std::string()> gen);

 private:
  struct VideoRecord {
    std::uint32_t video_id = 0;
    std::string source_name;
    std::size_t size = 0;
    bool done = false;
  };
  struct Job {
    std::string key;
    JobState state = JobState::Uploaded;
    std::vector<VideoRecord> videos;
    std::optional<std::string> error;
    std::int64_t created_at = 0;
    std::optional<std::int64_t> completed_at;
    std::vector<std::optional<BundleInfo>> bundles;
  };

  std::filesystem::path job_dir(const std::string& key) const;
  void persist(const Job& job) const;
  void load_jobs();
  void enqueue(const std::string& key, std::uint32_t video_id);
  void run_task(const std::string& key, std::uint32_t video_id);
  void transition(Job& job, JobState to);
  const Job& require_job(const std::string& key) const;
  const Job& require_complete(const std::string& key) const;
  std::vector<VideoRef> video_refs(const Job& job) const;
  std::vector<std::uint8_t> read_artifact(const std::string& key, std::uint32_t video_id,
                                          const std::string& artifact) const;
  void sweeper_loop();

  ServiceConfig cfg_;
  std::function<std::string()> key_gen_ = generate_job_key;
  mutable std::mutex mu_;
  std::map<std::string, Job> jobs_;
  std::unique_ptr<WorkerPool> pool_;
  std::mutex sweeper_mu_;
  std::condition_variable sweeper_cv_;
  bool stopping_ = false;
  std::thread sweeper_;
};

/// HTTP front of a Service. Error bodies are {"error": code, "detail": message}.
class HttpServer {
 public:
  explicit HttpServer(ServiceConfig cfg);
  ~HttpServer();

  /// Binds host:port (port 0 picks a free port). Throws IoError naming the port.
  void bind();
  /// Serves on a background thread; bind() first.
  void start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }
  Service& service() { return *service_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::unique_ptr<Service> service_;
  int port_ = 0;
  std::thread thread_;
};

int http_status_for(ErrorCode code);

}  // namespace lusview
