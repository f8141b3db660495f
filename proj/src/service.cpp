#include "lusview/service.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>

namespace fs = std::filesystem;

namespace lusview {

// ------------------------------------------------------------------ config

void apply_config_json(ServiceConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "config must be a JSON object");
  try {
    if (j.contains("data_root")) cfg.data_root = j["data_root"].get<std::string>();
    if (j.contains("host")) cfg.host = j["host"].get<std::string>();
    if (j.contains("port")) cfg.port = j["port"].get<int>();
    if (j.contains("workers")) cfg.workers = j["workers"].get<std::size_t>();
    if (j.contains("max_videos")) cfg.max_videos = j["max_videos"].get<std::size_t>();
    if (j.contains("max_upload_bytes")) cfg.max_upload_bytes = j["max_upload_bytes"].get<std::size_t>();
    if (j.contains("ttl_seconds")) cfg.ttl = std::chrono::seconds(j["ttl_seconds"].get<std::int64_t>());
    if (j.contains("ui_dir")) {
      if (j["ui_dir"].is_null()) cfg.ui_dir.reset();
      else cfg.ui_dir = fs::path(j["ui_dir"].get<std::string>());
    }
    if (j.contains("external_decoder_cmd")) {
      if (j["external_decoder_cmd"].is_null()) cfg.pipeline.decoder.external_decoder_cmd.reset();
      else cfg.pipeline.decoder.external_decoder_cmd = j["external_decoder_cmd"].get<std::string>();
    }
    if (j.contains("max_frames")) cfg.pipeline.decoder.max_frames = j["max_frames"].get<std::size_t>();
    if (j.contains("max_pixels_per_frame")) {
      cfg.pipeline.decoder.max_pixels_per_frame = j["max_pixels_per_frame"].get<std::size_t>();
    }
    if (j.contains("summarizer")) cfg.pipeline.summarizer_name = j["summarizer"].get<std::string>();
    if (j.contains("analyzer")) cfg.pipeline.analyzer_name = j["analyzer"].get<std::string>();
    if (j.contains("summarizer_params")) cfg.pipeline.summarizer = summarizer_params_from_json(j["summarizer_params"]);
    if (j.contains("analyzer_params")) cfg.pipeline.analyzer = analyzer_params_from_json(j["analyzer_params"]);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("config: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::BadConfig, std::string("config: ") + e.what());
  }
}

namespace {

std::int64_t parse_env_int(const std::string& name, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadConfig, name + " must be an integer, got '" + v + "'");
  }
}

void check_config(const ServiceConfig& cfg) {
  if (cfg.port < 0 || cfg.port > 65535) throw Error(ErrorCode::BadConfig, "port out of range");
  if (cfg.workers < 1) throw Error(ErrorCode::BadConfig, "workers must be >= 1");
  if (cfg.max_videos < 1) throw Error(ErrorCode::BadConfig, "max_videos must be >= 1");
  if (cfg.max_upload_bytes < 1) throw Error(ErrorCode::BadConfig, "max_upload_bytes must be >= 1");
  if (cfg.ttl.count() <= 0) throw Error(ErrorCode::BadConfig, "ttl_seconds must be positive");
  if (cfg.pipeline.decoder.max_frames < 1 || cfg.pipeline.decoder.max_pixels_per_frame < 1) {
    throw Error(ErrorCode::BadConfig, "decoder caps must be positive");
  }
  make_summarizer(cfg.pipeline.summarizer_name);
  make_analyzer(cfg.pipeline.analyzer_name);
}

}  // namespace

void apply_env_overrides(ServiceConfig& cfg, const EnvLookup& env) {
  auto get = [&](const char* name) { return env(name); };
  if (auto v = get("LUSVIEW_DATA_ROOT")) cfg.data_root = *v;
  if (auto v = get("LUSVIEW_HOST")) cfg.host = *v;
  if (auto v = get("LUSVIEW_PORT")) cfg.port = static_cast<int>(parse_env_int("LUSVIEW_PORT", *v));
  if (auto v = get("LUSVIEW_WORKERS")) cfg.workers = static_cast<std::size_t>(parse_env_int("LUSVIEW_WORKERS", *v));
  if (auto v = get("LUSVIEW_MAX_VIDEOS")) {
    cfg.max_videos = static_cast<std::size_t>(parse_env_int("LUSVIEW_MAX_VIDEOS", *v));
  }
  if (auto v = get("LUSVIEW_MAX_UPLOAD_BYTES")) {
    cfg.max_upload_bytes = static_cast<std::size_t>(parse_env_int("LUSVIEW_MAX_UPLOAD_BYTES", *v));
  }
  if (auto v = get("LUSVIEW_TTL_SECONDS")) cfg.ttl = std::chrono::seconds(parse_env_int("LUSVIEW_TTL_SECONDS", *v));
  if (auto v = get("LUSVIEW_UI_DIR")) cfg.ui_dir = fs::path(*v);
  if (auto v = get("LUSVIEW_EXTERNAL_DECODER")) cfg.pipeline.decoder.external_decoder_cmd = *v;
  if (auto v = get("LUSVIEW_SUMMARIZER")) cfg.pipeline.summarizer_name = *v;
  if (auto v = get("LUSVIEW_ANALYZER")) cfg.pipeline.analyzer_name = *v;
}

ServiceConfig load_service_config(const std::optional<fs::path>& file, const EnvLookup& env) {
  ServiceConfig cfg;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(ErrorCode::BadConfig, "cannot read config file " + file->string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::BadConfig, "config file " + file->string() + ": " + e.what());
    }
    apply_config_json(cfg, j);
  }
  apply_env_overrides(cfg, env);
  check_config(cfg);
  return cfg;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

// ------------------------------------------------------------------ states and keys

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Uploaded: return "uploaded";
    case JobState::Queued: return "queued";
    case JobState::Processing: return "processing";
    case JobState::Complete: return "complete";
    case JobState::Failed: return "failed";
  }
  return "unknown";
}

std::optional<JobState> parse_job_state(std::string_view s) {
  for (JobState st : {JobState::Uploaded, JobState::Queued, JobState::Processing, JobState::Complete,
                      JobState::Failed}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

bool is_terminal(JobState s) { return s == JobState::Complete || s == JobState::Failed; }

bool legal_transition(JobState from, JobState to) {
  switch (from) {
    case JobState::Uploaded: return to == JobState::Queued;
    case JobState::Queued: return to == JobState::Processing || to == JobState::Failed;
    case JobState::Processing: return to == JobState::Complete || to == JobState::Failed;
    case JobState::Complete:
    case JobState::Failed: return false;
  }
  return false;
}

std::string generate_job_key() {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
  thread_local std::random_device rd;
  std::uint8_t raw[16];
  for (int i = 0; i < 16; i += 4) {
    const std::uint32_t v = rd();
    for (int k = 0; k < 4; ++k) raw[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
  std::string out;
  out.reserve(22);
  std::uint32_t acc = 0;
  int bits = 0;
  for (std::uint8_t b : raw) {
    acc = (acc << 8) | b;
    bits += 8;
    while (bits >= 6) {
      bits -= 6;
      out += kAlphabet[(acc >> bits) & 0x3F];
    }
  }
  if (bits > 0) out += kAlphabet[(acc << (6 - bits)) & 0x3F];
  return out;
}

bool is_well_formed_key(const std::string& key) {
  return key.size() == 22 && std::all_of(key.begin(), key.end(), [](char c) {
           return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
         });
}

// ------------------------------------------------------------------ filesystem helpers

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> data) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "missing file " + path.filename().string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string content_type_for(const std::string& artifact) {
  auto ends = [&](std::string_view s) {
    return artifact.size() >= s.size() && artifact.compare(artifact.size() - s.size(), s.size(), s) == 0;
  };
  if (ends(".avi")) return "video/x-msvideo";
  if (ends(".png")) return "image/png";
  if (ends(".json")) return "application/json";
  return "application/octet-stream";
}

}  // namespace

// ------------------------------------------------------------------ service

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  check_config(cfg_);
  std::error_code ec;
  if (!cfg_.data_root.parent_path().empty() && !fs::is_directory(cfg_.data_root.parent_path())) {
    throw Error(ErrorCode::BadConfig, "data root parent " + cfg_.data_root.parent_path().string() + " does not exist");
  }
  fs::create_directories(cfg_.data_root / "jobs", ec);
  if (ec) throw Error(ErrorCode::BadConfig, "cannot create data root " + cfg_.data_root.string() + ": " + ec.message());
  pool_ = std::make_unique<WorkerPool>(cfg_.workers);
  load_jobs();
  sweeper_ = std::thread([this] { sweeper_loop(); });
}

Service::~Service() {
  {
    std::lock_guard lock(sweeper_mu_);
    stopping_ = true;
  }
  sweeper_cv_.notify_all();
  if (sweeper_.joinable()) sweeper_.join();
  pool_->discard_pending();
  pool_.reset();
}

void Service::set_key_generator(std::function<std::string()> gen) {
  std::lock_guard lock(mu_);
  key_gen_ = std::move(gen);
}

fs::path Service::job_dir(const std::string& key) const { return cfg_.data_root / "jobs" / key; }

void Service::persist(const Job& job) const {
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : job.videos) {
    videos.push_back({{"video_id", v.video_id}, {"source_name", v.source_name}, {"size", v.size}, {"done", v.done}});
  }
  nlohmann::json j = {{"key", job.key},
                      {"state", std::string(to_string(job.state))},
                      {"videos", videos},
                      {"created_at", job.created_at}};
  j["error"] = job.error ? nlohmann::json(*job.error) : nlohmann::json(nullptr);
  j["completed_at"] = job.completed_at ? nlohmann::json(*job.completed_at) : nlohmann::json(nullptr);
  write_text_atomic(job_dir(job.key) / "job.json", j.dump(2));
}

void Service::load_jobs() {
  std::vector<std::pair<std::string, std::uint32_t>> resume;
  for (const auto& entry : fs::directory_iterator(cfg_.data_root / "jobs")) {
    if (!entry.is_directory()) continue;
    const std::string key = entry.path().filename().string();
    if (!is_well_formed_key(key)) continue;
    try {
      std::ifstream in(entry.path() / "job.json");
      if (!in) continue;
      nlohmann::json j;
      in >> j;
      Job job;
      job.key = key;
      job.state = parse_job_state(j.at("state").get<std::string>()).value_or(JobState::Failed);
      job.created_at = j.at("created_at").get<std::int64_t>();
      if (!j["error"].is_null()) job.error = j["error"].get<std::string>();
      if (!j["completed_at"].is_null()) job.completed_at = j["completed_at"].get<std::int64_t>();
      for (const auto& v : j.at("videos")) {
        job.videos.push_back({v.at("video_id").get<std::uint32_t>(), v.at("source_name").get<std::string>(),
                              v.at("size").get<std::size_t>(), v.at("done").get<bool>()});
      }
      job.bundles.resize(job.videos.size());
      for (const auto& v : job.videos) {
        if (!v.done) continue;
        std::ifstream bin(entry.path() / "videos" / std::to_string(v.video_id) / "bundle.json");
        nlohmann::json bj;
        bin >> bj;
        job.bundles[v.video_id] = bundle_info_from_json(bj);
      }
      if (job.state == JobState::Processing || job.state == JobState::Queued) {
        // in-flight work restarts from the queue
        job.state = JobState::Queued;
        for (const auto& v : job.videos) {
          if (!v.done) resume.emplace_back(key, v.video_id);
        }
        persist(job);
      }
      jobs_.emplace(key, std::move(job));
    } catch (const std::exception&) {
      // unreadable record: leave it for the sweeper
    }
  }
  for (const auto& [key, vid] : resume) enqueue(key, vid);
}

void Service::transition(Job& job, JobState to) {
  if (!legal_transition(job.state, to)) {
    throw Error(ErrorCode::ValidationError, "illegal transition " + std::string(to_string(job.state)) + " -> " +
                                                std::string(to_string(to)));
  }
  job.state = to;
  if (is_terminal(to)) job.completed_at = now_ms();
}

std::string Service::upload(std::vector<UploadFile> files) {
  if (files.empty()) throw Error(ErrorCode::EmptyUpload, "no files in upload");
  if (files.size() > cfg_.max_videos) {
    throw Error(ErrorCode::TooManyFiles, std::to_string(files.size()) + " files exceed the limit of " +
                                             std::to_string(cfg_.max_videos));
  }
  for (const auto& f : files) {
    if (f.bytes.size() > cfg_.max_upload_bytes) {
      throw Error(ErrorCode::FileTooLarge, "'" + f.filename + "' exceeds " + std::to_string(cfg_.max_upload_bytes) +
                                               " bytes");
    }
    if (f.bytes.empty()) throw Error(ErrorCode::EmptyUpload, "'" + f.filename + "' is empty");
  }

  std::lock_guard lock(mu_);
  std::string key;
  for (int attempt = 0;; ++attempt) {
    key = key_gen_();
    if (is_well_formed_key(key) && !jobs_.count(key) && !fs::exists(job_dir(key))) break;
    if (attempt > 64) throw Error(ErrorCode::IoError, "cannot allocate a unique job key");
  }
  Job job;
  job.key = key;
  job.created_at = now_ms();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto id = static_cast<std::uint32_t>(i);
    write_file_atomic(job_dir(key) / "uploads" / std::to_string(id), files[i].bytes);
    job.videos.push_back({id, files[i].filename, files[i].bytes.size(), false});
  }
  job.bundles.resize(job.videos.size());
  persist(job);
  jobs_.emplace(key, std::move(job));
  return key;
}

JobState Service::process(const std::string& key) {
  std::vector<std::uint32_t> to_enqueue;
  JobState out;
  {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(key);
    if (it == jobs_.end()) throw Error(ErrorCode::UnknownKey, "unknown job key");
    Job& job = it->second;
    if (job.state == JobState::Uploaded) {
      transition(job, JobState::Queued);
      persist(job);
      for (const auto& v : job.videos) to_enqueue.push_back(v.video_id);
    }
    out = job.state;
  }
  for (auto vid : to_enqueue) enqueue(key, vid);
  return out;
}

void Service::enqueue(const std::string& key, std::uint32_t video_id) {
  pool_->submit([this, key, video_id] { run_task(key, video_id); });
}

void Service::run_task(const std::string& key, std::uint32_t video_id) {
  std::string source_name;
  {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(key);
    if (it == jobs_.end()) return;
    Job& job = it->second;
    if (is_terminal(job.state) || job.videos.at(video_id).done) return;
    if (job.state == JobState::Queued) {
      transition(job, JobState::Processing);
      persist(job);
    }
    source_name = job.videos[video_id].source_name;
  }

  const fs::path vdir = job_dir(key) / "videos" / std::to_string(video_id);
  std::optional<BundleInfo> info;
  std::string failure;
  try {
    const auto bytes = read_file(job_dir(key) / "uploads" / std::to_string(video_id));
    const AnalysisBundle bundle = run_pipeline(bytes, source_name, cfg_.pipeline);
    fs::remove_all(vdir);
    for (const auto& [name, data] : bundle.artifacts()) write_file_atomic(vdir / name, data);
    info = BundleInfo::of(bundle);
    nlohmann::json bj = *info;
    write_text_atomic(vdir / "bundle.json", bj.dump());
  } catch (const std::exception& e) {
    failure = "video " + std::to_string(video_id) + " (" + source_name + "): " + e.what();
  }

  std::lock_guard lock(mu_);
  auto it = jobs_.find(key);
  if (it == jobs_.end()) return;
  Job& job = it->second;
  if (is_terminal(job.state)) return;
  if (!info) {
    transition(job, JobState::Failed);
    job.error = failure;
    for (auto& b : job.bundles) b.reset();
    persist(job);
    std::error_code ec;
    fs::remove_all(job_dir(key) / "videos", ec);
    return;
  }
  job.videos[video_id].done = true;
  job.bundles[video_id] = std::move(info);
  if (std::all_of(job.videos.begin(), job.videos.end(), [](const VideoRecord& v) { return v.done; })) {
    transition(job, JobState::Complete);
  }
  persist(job);
}

const Service::Job& Service::require_job(const std::string& key) const {
  auto it = jobs_.find(key);
  if (it == jobs_.end()) throw Error(ErrorCode::UnknownKey, "unknown job key");
  return it->second;
}

const Service::Job& Service::require_complete(const std::string& key) const {
  const Job& job = require_job(key);
  if (job.state != JobState::Complete) {
    throw Error(ErrorCode::NotReady, "job is " + std::string(to_string(job.state)) + ", not complete");
  }
  return job;
}

JobState Service::state(const std::string& key) const {
  std::lock_guard lock(mu_);
  return require_job(key).state;
}

std::size_t Service::job_count() const {
  std::lock_guard lock(mu_);
  return jobs_.size();
}

nlohmann::json Service::status(const std::string& key) const {
  std::lock_guard lock(mu_);
  const Job& job = require_job(key);
  const auto done = static_cast<double>(
      std::count_if(job.videos.begin(), job.videos.end(), [](const VideoRecord& v) { return v.done; }));
  double progress = job.videos.empty() ? 0.0 : done / static_cast<double>(job.videos.size());
  if (job.state == JobState::Complete) progress = 1.0;
  if (job.state == JobState::Uploaded) progress = 0.0;
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : job.videos) videos.push_back({{"video_id", v.video_id}, {"source_name", v.source_name}});
  nlohmann::json j = {{"key", key},
                      {"state", std::string(to_string(job.state))},
                      {"progress", progress},
                      {"video_count", job.videos.size()},
                      {"videos", videos}};
  if (job.error) j["error"] = *job.error;
  return j;
}

std::vector<VideoRef> Service::video_refs(const Job& job) const {
  std::vector<VideoRef> refs;
  for (const auto& v : job.videos) refs.push_back({v.video_id, v.source_name, &*job.bundles.at(v.video_id)});
  return refs;
}

nlohmann::json Service::results(const std::string& key) const {
  std::lock_guard lock(mu_);
  const Job& job = require_complete(key);
  const auto refs = video_refs(job);
  nlohmann::json m = results_manifest(key, refs, UrlScheme::api(key));
  m["state"] = "complete";
  return m;
}

nlohmann::json Service::keyframes(const std::string& key, std::uint32_t video_id, std::uint32_t n,
                                  std::uint64_t seed) const {
  std::lock_guard lock(mu_);
  const Job& job = require_complete(key);
  if (video_id >= job.videos.size()) throw Error(ErrorCode::UnknownVideo, "unknown video id");
  if (n < 1) throw Error(ErrorCode::InvalidParams, "n must be >= 1");
  const BundleInfo& info = *job.bundles[video_id];
  const VideoRef ref{video_id, job.videos[video_id].source_name, &info};
  return keyframe_entries(ref, sample_keyframes(info.summary, n, seed), UrlScheme::api(key));
}

std::vector<std::uint8_t> Service::read_artifact(const std::string& key, std::uint32_t video_id,
                                                 const std::string& artifact) const {
  return read_file(job_dir(key) / "videos" / std::to_string(video_id) / artifact);
}

Media Service::media(const std::string& key, std::uint32_t video_id, const std::string& artifact) const {
  std::unique_lock lock(mu_);
  const Job& job = require_complete(key);
  if (video_id >= job.videos.size()) throw Error(ErrorCode::UnknownVideo, "unknown video id");
  const BundleInfo& info = *job.bundles[video_id];
  bool known = artifact == "summarized.avi" || artifact == "segmented.avi" || artifact == "tagged.avi" ||
               artifact == "annotations.json";
  for (std::size_t i = 0; !known && i < info.summary.keyframe_indices.size(); ++i) {
    for (const char* variant : kVariants) {
      if (artifact == keyframe_artifact(info.summary.keyframe_indices[i], variant)) known = true;
    }
  }
  if (!known) throw Error(ErrorCode::NotFound, "no artifact named '" + artifact + "'");
  lock.unlock();
  return {read_artifact(key, video_id, artifact), content_type_for(artifact)};
}

std::vector<std::uint8_t> Service::download_zip(const std::string& key) const {
  std::vector<BundleInfo> infos;
  std::vector<VideoRef> refs;
  nlohmann::json manifest;
  {
    std::lock_guard lock(mu_);
    const Job& job = require_complete(key);
    manifest = results_manifest(key, video_refs(job), UrlScheme::api(key));
    manifest["state"] = "complete";
    infos.reserve(job.videos.size());
    for (const auto& v : job.videos) infos.push_back(*job.bundles.at(v.video_id));
    for (const auto& v : job.videos) refs.push_back({v.video_id, v.source_name, &infos[v.video_id]});
  }
  const auto entries = export_layout(key, refs, manifest, [&](std::uint32_t vid, const std::string& artifact) {
    return read_artifact(key, vid, artifact);
  });
  return zip::write(entries);
}

std::size_t Service::sweep_expired(std::chrono::system_clock::time_point now) {
  const std::int64_t now_ms_v =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  const std::int64_t ttl_ms = std::chrono::duration_cast<std::chrono::milliseconds>(cfg_.ttl).count();
  std::lock_guard lock(mu_);
  std::size_t removed = 0;
  for (auto it = jobs_.begin(); it != jobs_.end();) {
    const Job& job = it->second;
    const bool idle = job.state == JobState::Uploaded || is_terminal(job.state);
    if (idle && job.created_at + ttl_ms < now_ms_v) {
      std::error_code ec;
      fs::remove_all(job_dir(it->first), ec);
      it = jobs_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

void Service::sweeper_loop() {
  const auto period = std::min<std::chrono::seconds>(cfg_.ttl, std::chrono::seconds(60));
  std::unique_lock lock(sweeper_mu_);
  while (!stopping_) {
    if (sweeper_cv_.wait_for(lock, period, [this] { return stopping_; })) break;
    lock.unlock();
    sweep_expired(std::chrono::system_clock::now());
    lock.lock();
  }
}

void Service::wait_idle() { pool_->wait_idle(); }

}  // namespace lusview
