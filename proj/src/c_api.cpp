#include "lusview/lusview.h"

#include <cstring>
#include <fstream>
#include <mutex>

#include "lusview/phantom.hpp"
#include "lusview/service.hpp"
#include "lusview/video_io.hpp"

namespace fs = std::filesystem;
using namespace lusview;

struct lusv_server {
  std::unique_ptr<HttpServer> http;
};

namespace {

thread_local std::string g_last_error;

lusv_status status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadConfig: return LUSV_ERR_BAD_CONFIG;
    case ErrorCode::IoError:
    case ErrorCode::NotFound: return LUSV_ERR_IO;
    case ErrorCode::UnsupportedFormat: return LUSV_ERR_UNSUPPORTED_FORMAT;
    case ErrorCode::CorruptStream: return LUSV_ERR_CORRUPT_STREAM;
    case ErrorCode::LimitExceeded: return LUSV_ERR_LIMIT_EXCEEDED;
    case ErrorCode::SpecOutOfBounds: return LUSV_ERR_SPEC_OUT_OF_BOUNDS;
    case ErrorCode::InvalidParams: return LUSV_ERR_INVALID_ARGUMENT;
    case ErrorCode::ValidationError: return LUSV_ERR_VALIDATION;
    default: return LUSV_ERR_INTERNAL;
  }
}

lusv_status fail(lusv_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
lusv_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const Error& e) {
    return fail(status_for(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(LUSV_ERR_INVALID_ARGUMENT, std::string("invalid JSON: ") + e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(LUSV_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(LUSV_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return data;
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

nlohmann::json parse_json_arg(const char* text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParams, std::string(what) + " is not valid JSON: " + e.what());
  }
}

nlohmann::json config_echo(const ServiceConfig& c) {
  nlohmann::json j = {{"data_root", c.data_root.string()},
                      {"host", c.host},
                      {"port", c.port},
                      {"workers", c.workers},
                      {"max_videos", c.max_videos},
                      {"max_upload_bytes", c.max_upload_bytes},
                      {"ttl_seconds", c.ttl.count()},
                      {"summarizer", c.pipeline.summarizer_name},
                      {"analyzer", c.pipeline.analyzer_name},
                      {"max_frames", c.pipeline.decoder.max_frames},
                      {"max_pixels_per_frame", c.pipeline.decoder.max_pixels_per_frame}};
  j["ui_dir"] = c.ui_dir ? nlohmann::json(c.ui_dir->string()) : nlohmann::json(nullptr);
  j["external_decoder_cmd"] = c.pipeline.decoder.external_decoder_cmd
                                  ? nlohmann::json(*c.pipeline.decoder.external_decoder_cmd)
                                  : nlohmann::json(nullptr);
  return j;
}

std::optional<fs::path> opt_path(const char* p) {
  if (!p || !*p) return std::nullopt;
  return fs::path(p);
}

}  // namespace

extern "C" {

const char* lusv_version(void) { return kVersion; }

const char* lusv_last_error(void) { return g_last_error.c_str(); }

void lusv_string_free(char* s) { std::free(s); }

lusv_status lusv_server_create(const char* config_path, const char* overrides_json, lusv_server** out) {
  if (!out) return fail(LUSV_ERR_INVALID_ARGUMENT, "out is NULL");
  *out = nullptr;
  return guarded([&] {
    ServiceConfig cfg = load_service_config(opt_path(config_path), process_env());
    if (overrides_json && *overrides_json) {
      apply_config_json(cfg, parse_json_arg(overrides_json, "overrides"));
    }
    auto server = std::make_unique<lusv_server>();
    server->http = std::make_unique<HttpServer>(cfg);
    server->http->bind();
    *out = server.release();
    return LUSV_OK;
  });
}

lusv_status lusv_server_start(lusv_server* server) {
  if (!server) return fail(LUSV_ERR_INVALID_ARGUMENT, "server is NULL");
  return guarded([&] {
    server->http->start();
    return LUSV_OK;
  });
}

lusv_status lusv_server_run(lusv_server* server) {
  if (!server) return fail(LUSV_ERR_INVALID_ARGUMENT, "server is NULL");
  return guarded([&] {
    server->http->run();
    return LUSV_OK;
  });
}

int lusv_server_port(const lusv_server* server) { return server ? server->http->port() : -1; }

lusv_status lusv_server_config_json(const lusv_server* server, char** out_json) {
  if (!server || !out_json) return fail(LUSV_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    nlohmann::json j = config_echo(server->http->service().config());
    j["port"] = server->http->port();
    *out_json = dup_string(j.dump());
    return LUSV_OK;
  });
}

void lusv_server_stop(lusv_server* server) {
  if (server) server->http->stop();
}

void lusv_server_destroy(lusv_server* server) { delete server; }

lusv_status lusv_analyze(const char* const* inputs, size_t n_inputs, const char* out_dir, const char* params_json,
                         const char* config_path, char** report_json) {
  if (report_json) *report_json = nullptr;
  if ((!inputs && n_inputs > 0) || !out_dir) return fail(LUSV_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    ServiceConfig cfg = load_service_config(opt_path(config_path), process_env());
    PipelineConfig pcfg = cfg.pipeline;
    if (params_json && *params_json) apply_params_json(pcfg, parse_json_arg(params_json, "params"));
    pcfg.summarizer.resolved(1000);  // parameter sanity before any work
    pcfg.analyzer.validate();

    struct Outcome {
      std::optional<BundleInfo> info;
      std::map<std::string, std::vector<std::uint8_t>> artifacts;
      std::string error;
    };
    std::vector<Outcome> results(n_inputs);
    std::vector<std::string> names(n_inputs), dirs(n_inputs);
    for (std::size_t i = 0; i < n_inputs; ++i) {
      names[i] = fs::path(inputs[i]).filename().string();
      dirs[i] = video_dir_name(static_cast<std::uint32_t>(i), names[i]);
    }
    {
      WorkerPool pool(cfg.workers);
      for (std::size_t i = 0; i < n_inputs; ++i) {
        pool.submit([&, i] {
          try {
            const auto bytes = read_bytes(inputs[i]);
            AnalysisBundle bundle = run_pipeline(bytes, names[i], pcfg);
            results[i].info = BundleInfo::of(bundle);
            results[i].artifacts = bundle.artifacts();
          } catch (const std::exception& e) {
            results[i].error = e.what();
          }
        });
      }
      pool.wait_idle();
    }

    std::vector<VideoRef> refs;
    for (std::size_t i = 0; i < n_inputs; ++i) {
      if (results[i].info) refs.push_back({static_cast<std::uint32_t>(i), names[i], &*results[i].info});
    }
    const nlohmann::json manifest = results_manifest("", refs, UrlScheme::relative(dirs));
    const auto entries = export_layout("", refs, manifest, [&](std::uint32_t vid, const std::string& artifact) {
      const auto& a = results[vid].artifacts;
      auto it = a.find(artifact);
      if (it == a.end()) throw Error(ErrorCode::NotFound, "missing artifact " + artifact);
      return it->second;
    });
    const fs::path root(out_dir);
    fs::create_directories(root);
    for (const auto& e : entries) write_bytes(root / e.name, e.data);

    nlohmann::json report = {{"videos", nlohmann::json::array()}};
    bool any_failed = false;
    for (std::size_t i = 0; i < n_inputs; ++i) {
      nlohmann::json v = {{"input", inputs[i]}, {"ok", results[i].info.has_value()}};
      if (results[i].info) {
        v["keyframe_count"] = results[i].info->summary.keyframe_indices.size();
        v["abnormal_count"] = results[i].info->abnormal_frames.size();
        v["frame_count"] = results[i].info->source_frames;
        v["directory"] = dirs[i];
      } else {
        any_failed = true;
        v["error"] = results[i].error;
      }
      report["videos"].push_back(v);
    }
    if (report_json) *report_json = dup_string(report.dump());
    if (any_failed) return fail(LUSV_ERR_PARTIAL_FAILURE, "one or more inputs failed");
    return LUSV_OK;
  });
}

lusv_status lusv_phantom(const char* spec_json, const char* y4m_path, const char* truth_path) {
  if (!spec_json || !y4m_path) return fail(LUSV_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    const PhantomSpec spec = phantom_spec_from_json(parse_json_arg(spec_json, "spec"));
    const PhantomClip clip = generate(spec, fs::path(y4m_path).filename().string());
    write_bytes(y4m_path, encode_y4m(clip.sequence));
    if (truth_path && *truth_path) {
      const std::string t = phantom_truth_json(spec, clip.truth).dump(2) + "\n";
      write_bytes(truth_path, std::span(reinterpret_cast<const std::uint8_t*>(t.data()), t.size()));
    }
    return LUSV_OK;
  });
}

}  // extern "C"
