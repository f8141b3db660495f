#include <httplib.h>

#include <fstream>

#include "lusview/service.hpp"

namespace fs = std::filesystem;

namespace lusview {

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownKey:
    case ErrorCode::UnknownVideo:
    case ErrorCode::NotFound: return 404;
    case ErrorCode::NotReady: return 409;
    case ErrorCode::FileTooLarge: return 413;
    case ErrorCode::TooManyFiles:
    case ErrorCode::EmptyUpload:
    case ErrorCode::InvalidParams:
    case ErrorCode::ValidationError: return 400;
    default: return 500;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& j) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& detail) {
  send_json(res, status, {{"error", code}, {"detail", detail}});
}

std::string status_error_code(int status) {
  switch (status) {
    case 400: return "bad_request";
    case 404: return "not_found";
    case 405: return "method_not_allowed";
    case 413: return "payload_too_large";
    default: return "http_" + std::to_string(status);
  }
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    send_error(res, http_status_for(e.code()), std::string(error_code_name(e.code())), e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

std::uint32_t parse_u32(const std::string& text, const char* what) {
  if (text.empty() || text.size() > 10 || text.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(ErrorCode::InvalidParams, std::string(what) + " must be a non-negative integer");
  }
  const unsigned long long v = std::stoull(text);
  if (v > 0xFFFFFFFFull) throw Error(ErrorCode::InvalidParams, std::string(what) + " out of range");
  return static_cast<std::uint32_t>(v);
}

std::uint64_t parse_u64(const std::string& text, const char* what) {
  if (text.empty() || text.size() > 20 || text.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(ErrorCode::InvalidParams, std::string(what) + " must be a non-negative integer");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidParams, std::string(what) + " out of range");
  }
}

/// Video ids in paths are matched as digits; a non-numeric segment is an unknown video.
std::uint32_t path_video_id(const std::string& text) {
  try {
    return parse_u32(text, "video id");
  } catch (const Error&) {
    throw Error(ErrorCode::UnknownVideo, "unknown video id");
  }
}

}  // namespace

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(ServiceConfig cfg) : impl_(std::make_unique<Impl>()) {
  service_ = std::make_unique<Service>(std::move(cfg));
  Service& svc = *service_;
  const ServiceConfig& c = svc.config();
  auto& s = impl_->server;

  // Whole-request cap: every file at its limit plus multipart framing.
  const std::size_t framing = std::size_t{1} << 20;
  const std::size_t cap = c.max_upload_bytes > (SIZE_MAX - framing) / c.max_videos
                              ? SIZE_MAX
                              : c.max_videos * c.max_upload_bytes + framing;
  s.set_payload_max_length(cap);
  // SO_REUSEADDR only: the library default also sets SO_REUSEPORT, which would
  // let a second instance silently share an occupied port.
  s.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });

  s.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"version", kVersion}});
  });

  s.Post("/api/upload", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.is_multipart_form_data()) throw Error(ErrorCode::EmptyUpload, "expected multipart form field 'videos'");
      std::vector<UploadFile> files;
      for (const auto& f : req.get_file_values("videos")) {
        files.push_back({f.filename, std::vector<std::uint8_t>(f.content.begin(), f.content.end())});
      }
      const std::size_t count = files.size();
      const std::string key = svc.upload(std::move(files));
      send_json(res, 200, {{"key", key}, {"videos", count}});
    });
  });

  s.Post(R"(/api/process/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const JobState st = svc.process(req.matches[1]);
      send_json(res, is_terminal(st) ? 200 : 202, {{"state", std::string(to_string(st))}});
    });
  });

  s.Get(R"(/api/status/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc.status(req.matches[1])); });
  });

  s.Get(R"(/api/results/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc.results(req.matches[1])); });
  });

  s.Get(R"(/api/keyframes/([^/]+)/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string key = req.matches[1];
      const std::uint32_t vid = path_video_id(req.matches[2]);
      const std::uint32_t n = req.has_param("n") ? parse_u32(req.get_param_value("n"), "n") : kDefaultKeyframeSamples;
      const std::uint64_t seed =
          req.has_param("seed") ? parse_u64(req.get_param_value("seed"), "seed") : keyframe_seed(key, vid);
      send_json(res, 200, svc.keyframes(key, vid, n, seed));
    });
  });

  s.Get(R"(/api/media/([^/]+)/([^/]+)/(.+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      Media m = svc.media(req.matches[1], path_video_id(req.matches[2]), req.matches[3]);
      res.status = 200;
      res.set_content(std::string(m.bytes.begin(), m.bytes.end()), m.content_type);
    });
  });

  s.Get(R"(/api/download/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string key = req.matches[1];
      const auto bytes = svc.download_zip(key);
      res.status = 200;
      res.set_header("Content-Disposition", "attachment; filename=\"lusview_" + key + ".zip\"");
      res.set_content(std::string(bytes.begin(), bytes.end()), "application/zip");
    });
  });

  std::optional<fs::path> index;
  if (c.ui_dir) {
    if (!s.set_mount_point("/", c.ui_dir->string())) {
      throw Error(ErrorCode::BadConfig, "ui_dir " + c.ui_dir->string() + " is not a directory");
    }
    if (fs::is_regular_file(*c.ui_dir / "index.html")) index = *c.ui_dir / "index.html";
  }

  s.set_error_handler([index](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    const bool api = req.path.rfind("/api/", 0) == 0 || req.path == "/api";
    if (!api && index && req.method == "GET" && res.status == 404) {
      // client-side routes fall back to the single-page app
      std::ifstream in(*index, std::ios::binary);
      std::string html((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      res.status = 200;
      res.set_content(html, "text/html");
      return httplib::Server::HandlerResponse::Handled;
    }
    const int status = res.status;
    send_error(res, status, status_error_code(status), "request failed with HTTP " + std::to_string(status));
    return httplib::Server::HandlerResponse::Handled;
  });
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::bind() {
  const ServiceConfig& c = service_->config();
  if (c.port == 0) {
    port_ = impl_->server.bind_to_any_port(c.host);
    if (port_ <= 0) throw Error(ErrorCode::IoError, "cannot bind " + c.host + " on any port");
  } else {
    if (!impl_->server.bind_to_port(c.host, c.port)) {
      throw Error(ErrorCode::IoError, "cannot bind " + c.host + ":" + std::to_string(c.port) + " (port " +
                                          std::to_string(c.port) + " in use or not permitted)");
    }
    port_ = c.port;
  }
}

void HttpServer::start() {
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace lusview
