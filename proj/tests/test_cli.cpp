#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <map>
#include <set>
#include <thread>

#include "lusview/service.hpp"
#include "lusview/zip.hpp"
#include "test_util.hpp"

using namespace lusview;
using namespace lusview::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run run_cli(const TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("'") + LUSVIEW_CLI + "' " + args + " >'" + out.string() + "' 2>'" +
                          err.string() + "'";
  const int raw = std::system(cmd.c_str());
  Run r{WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, "", ""};
  const auto o = read_file(out), e = read_file(err);
  r.out.assign(o.begin(), o.end());
  r.err.assign(e.begin(), e.end());
  return r;
}

std::map<std::string, std::vector<std::uint8_t>> tree(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return files;
}

const char* kBlineSpec = R"({"width": 96, "height": 80, "pleura_row": 16, "aline_count": 1,
  "bline_cols": [40], "n_frames": 16, "noise_seed": 9})";

}  // namespace

TEST_CASE("phantom subcommand writes a clip and its truth deterministically") {
  TempDir dir;
  write_text(dir / "spec.json", kBlineSpec);
  auto r = run_cli(dir, "phantom '" + (dir / "spec.json").string() + "' -o '" + (dir / "p.y4m").string() + "'");
  REQUIRE(r.status == 0);
  const auto clip = read_file(dir / "p.y4m");
  const auto truth = nlohmann::json::parse(read_text(dir / "p.truth.json"));
  CHECK(truth["frames"].size() == 16);
  CHECK(truth["spec"]["bline_cols"] == nlohmann::json::array({40}));
  r = run_cli(dir, "phantom '" + (dir / "spec.json").string() + "' -o '" + (dir / "q.y4m").string() + "' --truth '" +
                       (dir / "q.json").string() + "'");
  REQUIRE(r.status == 0);
  CHECK(read_file(dir / "q.y4m") == clip);
  CHECK(fs::exists(dir / "q.json"));
}

TEST_CASE("phantom subcommand rejects an out-of-bounds spec") {
  TempDir dir;
  write_text(dir / "spec.json", R"({"width": 64, "height": 64, "pleura_row": 60})");
  const auto r = run_cli(dir, "phantom '" + (dir / "spec.json").string() + "' -o '" + (dir / "p.y4m").string() + "'");
  CHECK(r.status == 1);
  CHECK(r.err.find("pleura_row") != std::string::npos);
  CHECK(!fs::exists(dir / "p.y4m"));
}

TEST_CASE("analyze writes the export layout and flags the B-line clip") {
  TempDir dir;
  write_text(dir / "spec.json", kBlineSpec);
  REQUIRE(run_cli(dir, "phantom '" + (dir / "spec.json").string() + "' -o '" + (dir / "b.y4m").string() + "'").status ==
          0);
  auto r = run_cli(dir, "analyze '" + (dir / "b.y4m").string() + "' -o '" + (dir / "out").string() + "' --json");
  REQUIRE(r.status == 0);
  const auto report = nlohmann::json::parse(r.out);
  REQUIRE(report["videos"].size() == 1);
  CHECK(report["videos"][0]["ok"] == true);
  CHECK(report["videos"][0]["abnormal_count"].get<int>() >= 1);
  const auto first = tree(dir / "out");
  CHECK(first.count("manifest.json") == 1);
  CHECK(first.count("video_0_b.y4m/annotations.json") == 1);

  // a second run reproduces the tree byte for byte
  REQUIRE(run_cli(dir, "analyze '" + (dir / "b.y4m").string() + "' -o '" + (dir / "out2").string() + "'").status == 0);
  CHECK(tree(dir / "out2") == first);

  // the directory mirrors the zip the service exports
  ServiceConfig cfg;
  cfg.data_root = dir / "data";
  Service svc(cfg);
  const auto key = svc.upload({{"b.y4m", read_file(dir / "b.y4m")}});
  svc.process(key);
  svc.wait_idle();
  REQUIRE(svc.state(key) == JobState::Complete);
  std::set<std::string> zip_names, dir_names;
  for (const auto& e : zip::read(svc.download_zip(key), std::size_t{1} << 30)) {
    zip_names.insert(e.name);
    if (e.name != "manifest.json") CHECK(e.data == first.at(e.name));
  }
  for (const auto& [name, bytes] : first) dir_names.insert(name);
  CHECK(zip_names == dir_names);
}

TEST_CASE("analyze keeps going past an unreadable input") {
  TempDir dir;
  write_text(dir / "spec.json", kBlineSpec);
  REQUIRE(run_cli(dir, "phantom '" + (dir / "spec.json").string() + "' -o '" + (dir / "b.y4m").string() + "'").status ==
          0);
  write_text(dir / "junk.y4m", "this is not a video");
  const auto r = run_cli(dir, "analyze '" + (dir / "junk.y4m").string() + "' '" + (dir / "missing.y4m").string() +
                                  "' '" + (dir / "b.y4m").string() + "' -o '" + (dir / "out").string() + "' --json");
  CHECK(r.status == 1);
  const auto report = nlohmann::json::parse(r.out);
  REQUIRE(report["videos"].size() == 3);
  CHECK(report["videos"][0]["ok"] == false);
  CHECK(report["videos"][1]["ok"] == false);
  CHECK(report["videos"][2]["ok"] == true);
  CHECK(fs::exists(dir / "out/video_2_b.y4m/tagged.avi"));
}

TEST_CASE("usage errors exit with status 2") {
  TempDir dir;
  CHECK(run_cli(dir, "").status == 2);
  CHECK(run_cli(dir, "frobnicate").status == 2);
  CHECK(run_cli(dir, "analyze").status == 2);
  CHECK(run_cli(dir, "serve --port notaport").status == 2);
  CHECK(run_cli(dir, "--help").status == 0);
}

TEST_CASE("serve fails fast on an occupied port or a missing data root parent") {
  TempDir dir;
  ServiceConfig cfg;
  cfg.data_root = dir / "data";
  cfg.port = 0;
  HttpServer holder(cfg);
  holder.bind();
  auto r = run_cli(dir, "serve --port " + std::to_string(holder.port()) + " --data-root '" + (dir / "d2").string() + "'");
  CHECK(r.status == 1);
  CHECK(r.err.find(std::to_string(holder.port())) != std::string::npos);
  r = run_cli(dir, "serve --port 0 --data-root '" + (dir / "no/such/root").string() + "'");
  CHECK(r.status == 1);
  CHECK(r.err.find("data root") != std::string::npos);
}
