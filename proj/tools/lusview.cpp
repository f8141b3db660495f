#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "lusview/lusview.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::optional<std::string> read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* c_str_or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

struct ServeOptions {
  std::string config;
  std::optional<std::string> host, data_root, ui_dir;
  std::optional<int> port;
  std::optional<std::size_t> workers;
};

int cmd_serve(const ServeOptions& o) {
  nlohmann::json overrides = nlohmann::json::object();
  if (o.host) overrides["host"] = *o.host;
  if (o.data_root) overrides["data_root"] = *o.data_root;
  if (o.ui_dir) overrides["ui_dir"] = *o.ui_dir;
  if (o.port) overrides["port"] = *o.port;
  if (o.workers) overrides["workers"] = *o.workers;

  // Block termination signals before any threads start so sigwait sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  lusv_server* server = nullptr;
  const std::string ov = overrides.dump();
  if (lusv_server_create(c_str_or_null(o.config), ov.c_str(), &server) != LUSV_OK) {
    std::cerr << "lusview serve: " << lusv_last_error() << "\n";
    return kExitFailure;
  }
  char* echo = nullptr;
  if (lusv_server_config_json(server, &echo) == LUSV_OK) {
    std::cerr << "lusview " << lusv_version() << " config " << echo << "\n";
    lusv_string_free(echo);
  }
  if (lusv_server_start(server) != LUSV_OK) {
    std::cerr << "lusview serve: " << lusv_last_error() << "\n";
    lusv_server_destroy(server);
    return kExitFailure;
  }
  std::cerr << "listening on port " << lusv_server_port(server) << std::endl;

  int sig = 0;
  sigwait(&set, &sig);
  std::cerr << "shutting down (signal " << sig << ")\n";
  lusv_server_stop(server);
  lusv_server_destroy(server);
  return kExitOk;
}

int cmd_analyze(const std::vector<std::string>& inputs, const std::string& out, const std::string& params_path,
                const std::string& config, bool json_out) {
  std::string params;
  if (!params_path.empty()) {
    auto text = read_text(params_path);
    if (!text) {
      std::cerr << "lusview analyze: cannot read params file " << params_path << "\n";
      return kExitFailure;
    }
    params = *text;
  }
  std::vector<const char*> argv;
  for (const auto& s : inputs) argv.push_back(s.c_str());
  char* report = nullptr;
  const lusv_status st =
      lusv_analyze(argv.data(), argv.size(), out.c_str(), c_str_or_null(params), c_str_or_null(config), &report);
  if (!report) {
    std::cerr << "lusview analyze: " << lusv_last_error() << "\n";
    return kExitFailure;
  }
  const nlohmann::json r = nlohmann::json::parse(report);
  lusv_string_free(report);
  if (json_out) {
    std::cout << r.dump(2) << "\n";
  } else {
    for (const auto& v : r["videos"]) {
      if (v["ok"].get<bool>()) {
        std::cout << v["input"].get<std::string>() << ": " << v["keyframe_count"] << " keyframes, "
                  << v["abnormal_count"] << " abnormal -> " << v["directory"].get<std::string>() << "\n";
      } else {
        std::cerr << v["input"].get<std::string>() << ": FAILED: " << v["error"].get<std::string>() << "\n";
      }
    }
  }
  return st == LUSV_OK ? kExitOk : kExitFailure;
}

int cmd_phantom(const std::string& spec_path, const std::string& out, std::string truth) {
  auto spec = read_text(spec_path);
  if (!spec) {
    std::cerr << "lusview phantom: cannot read spec " << spec_path << "\n";
    return kExitFailure;
  }
  if (truth.empty()) {
    const auto dot = out.rfind('.');
    const auto slash = out.rfind('/');
    const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
    truth = (has_ext ? out.substr(0, dot) : out) + ".truth.json";
  }
  if (lusv_phantom(spec->c_str(), out.c_str(), truth.c_str()) != LUSV_OK) {
    std::cerr << "lusview phantom: " << lusv_last_error() << "\n";
    return kExitFailure;
  }
  std::cout << "wrote " << out << " and " << truth << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lung ultrasound video summarization and artefact analysis"};
  app.set_version_flag("--version", std::string(lusv_version()));
  app.require_subcommand(1);

  ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API (and static UI if configured)");
  serve_cmd->add_option("--config", serve.config, "JSON config file")->check(CLI::ExistingFile);
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--port", serve.port, "Port (0 picks a free port)");
  serve_cmd->add_option("--data-root", serve.data_root, "Job store directory");
  serve_cmd->add_option("--workers", serve.workers, "Worker threads");
  serve_cmd->add_option("--ui-dir", serve.ui_dir, "Directory of the built web UI");

  std::vector<std::string> inputs;
  std::string out_dir, params, config;
  bool json_out = false;
  auto* analyze_cmd = app.add_subcommand("analyze", "Process videos offline into an export directory");
  analyze_cmd->add_option("inputs", inputs, "Video files (Y4M, PNG zip, MJPEG AVI)")->required();
  analyze_cmd->add_option("-o,--out", out_dir, "Output directory")->required();
  analyze_cmd->add_option("--params", params, "JSON file with summarizer/analyzer parameters");
  analyze_cmd->add_option("--config", config, "JSON config file (decoder, plugins)")->check(CLI::ExistingFile);
  analyze_cmd->add_flag("--json", json_out, "Print the report as JSON");

  std::string spec_path, phantom_out, truth_out;
  auto* phantom_cmd = app.add_subcommand("phantom", "Render a synthetic clip with ground truth");
  phantom_cmd->add_option("spec", spec_path, "Phantom spec JSON")->required();
  phantom_cmd->add_option("-o,--out", phantom_out, "Output Y4M path")->required();
  phantom_cmd->add_option("--truth", truth_out, "Ground-truth JSON path (default: <out>.truth.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*serve_cmd) return cmd_serve(serve);
  if (*analyze_cmd) return cmd_analyze(inputs, out_dir, params, config, json_out);
  if (*phantom_cmd) return cmd_phantom(spec_path, phantom_out, truth_out);
  return kExitUsage;
}
