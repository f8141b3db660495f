#include <doctest.h>

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <set>
#include <thread>

#include "lusview/phantom.hpp"
#include "lusview/service.hpp"
#include "lusview/video_io.hpp"
#include "lusview/zip.hpp"
#include "test_util.hpp"

using namespace lusview;
using namespace lusview::testing;
using namespace std::chrono_literals;

namespace {

std::vector<std::uint8_t> clip(std::uint64_t seed, std::uint32_t width = 64, std::uint32_t frames = 12) {
  PhantomSpec spec;
  spec.width = width;
  spec.height = 64;
  spec.pleura_row = 14;
  spec.aline_count = 1;
  spec.bline_cols = {width / 3};
  spec.n_frames = frames;
  spec.noise_seed = seed;
  return encode_y4m(generate(spec).sequence);
}

ServiceConfig config_in(const TempDir& dir, std::size_t workers = 2) {
  ServiceConfig cfg;
  cfg.data_root = dir / "data";
  cfg.workers = workers;
  return cfg;
}

std::vector<UploadFile> two_clips() { return {{"a.y4m", clip(1)}, {"b.y4m", clip(2)}}; }

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const std::string& k) -> std::optional<std::string> {
    auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

// Analyzer that holds frames of width 80 until released, so a job can be observed mid-run.
struct Gate {
  std::mutex mu;
  std::condition_variable cv;
  bool open = false;
  std::atomic<bool> reached{false};
  void release() {
    std::lock_guard lock(mu);
    open = true;
    cv.notify_all();
  }
};
Gate gate;

struct GatedAnalyzer final : Analyzer {
  std::unique_ptr<Analyzer> inner = make_analyzer(kDefaultAnalyzer);
  std::string name() const override { return "gated"; }
  FrameAnnotation analyze_frame(const Frame& f, const AnalyzerParams& p) const override {
    if (f.width() == 80) {
      gate.reached = true;
      std::unique_lock lock(gate.mu);
      gate.cv.wait(lock, [] { return gate.open; });
    }
    return inner->analyze_frame(f, p);
  }
};

}  // namespace

TEST_CASE("upload validation") {
  TempDir dir;
  ServiceConfig cfg = config_in(dir);
  cfg.max_upload_bytes = 100000;
  Service svc(cfg);
  const auto key = svc.upload(two_clips());
  CHECK(is_well_formed_key(key));
  CHECK(svc.state(key) == JobState::Uploaded);
  CHECK(svc.status(key)["video_count"] == 2);
  CHECK(code_of([&] { svc.upload({}); }) == ErrorCode::EmptyUpload);
  std::vector<UploadFile> many(17, UploadFile{"x.y4m", {1}});
  CHECK(code_of([&] { svc.upload(many); }) == ErrorCode::TooManyFiles);
  CHECK(code_of([&] { svc.upload({{"big.y4m", std::vector<std::uint8_t>(100001, 0)}}); }) == ErrorCode::FileTooLarge);
  CHECK(code_of([&] { svc.upload({{"empty.y4m", {}}}); }) == ErrorCode::EmptyUpload);
  CHECK(svc.job_count() == 1);
  CHECK(code_of([&] { svc.status("nope"); }) == ErrorCode::UnknownKey);
}

TEST_CASE("job lifecycle, results and idempotent processing") {
  TempDir dir;
  Service svc(config_in(dir));
  const auto key = svc.upload(two_clips());
  CHECK(code_of([&] { svc.results(key); }) == ErrorCode::NotReady);
  CHECK(code_of([&] { svc.download_zip(key); }) == ErrorCode::NotReady);
  const auto s = svc.process(key);
  CHECK((s == JobState::Queued || s == JobState::Processing || s == JobState::Complete));
  svc.wait_idle();
  REQUIRE(svc.state(key) == JobState::Complete);
  CHECK(svc.status(key)["progress"] == 1.0);

  const auto results = svc.results(key);
  CHECK(results["state"] == "complete");
  REQUIRE(results["videos"].size() == 2);
  const auto summarized = svc.media(key, 0, "summarized.avi");
  CHECK(summarized.content_type == "video/x-msvideo");
  CHECK(decode(summarized.bytes, "s.avi", {}).size() >= 1);
  const auto ann = svc.media(key, 1, "annotations.json");
  CHECK(ann.content_type == "application/json");
  CHECK(nlohmann::json::parse(ann.bytes.begin(), ann.bytes.end()).is_object());

  // processing again is a no-op
  CHECK(svc.process(key) == JobState::Complete);
  svc.wait_idle();
  CHECK(svc.media(key, 0, "summarized.avi").bytes == summarized.bytes);
  CHECK(svc.results(key) == results);
}

TEST_CASE("keyframe sampling through the service") {
  TempDir dir;
  Service svc(config_in(dir));
  const auto key = svc.upload({{"long.y4m", clip(5, 64, 40)}});
  svc.process(key);
  svc.wait_idle();
  REQUIRE(svc.state(key) == JobState::Complete);
  const auto results = svc.results(key);
  const auto& v = results["videos"][0];
  const auto total = v["keyframe_count"].get<std::size_t>();
  CHECK(v["keyframes"].size() == std::min<std::size_t>(8, total));
  const auto seed = v["keyframe_seed"].get<std::uint64_t>();
  CHECK(svc.keyframes(key, 0, 8, seed) == v["keyframes"]);
  CHECK(svc.keyframes(key, 0, 3, 77) == svc.keyframes(key, 0, 3, 77));
  CHECK(svc.keyframes(key, 0, 3, 77).size() == std::min<std::size_t>(3, total));
  CHECK(svc.keyframes(key, 0, 1000, 1).size() == total);
  CHECK(code_of([&] { svc.keyframes(key, 0, 0, 1); }) == ErrorCode::InvalidParams);
  CHECK(code_of([&] { svc.keyframes(key, 1, 3, 1); }) == ErrorCode::UnknownVideo);
  for (const auto& k : svc.keyframes(key, 0, 1000, 1)) {
    const auto idx = std::to_string(k["index"].get<std::uint32_t>());
    const auto png = svc.media(key, 0, "keyframes/frame_" + idx + "_tagged.png");
    CHECK(png.content_type == "image/png");
  }
}

TEST_CASE("media is confined to known artifacts of the job") {
  TempDir dir;
  Service svc(config_in(dir));
  const auto a = svc.upload({{"a.y4m", clip(1)}});
  const auto b = svc.upload({{"b.y4m", clip(2)}});
  svc.process(a);
  svc.process(b);
  svc.wait_idle();
  const auto bytes = read_file(dir / ("data/jobs/" + a + "/videos/0/tagged.avi"));
  CHECK(svc.media(a, 0, "tagged.avi").bytes == bytes);
  CHECK(svc.media(b, 0, "tagged.avi").bytes != bytes);
  CHECK(code_of([&] { svc.media(a, 0, "../../" + b + "/videos/0/tagged.avi"); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { svc.media(a, 0, "job.json"); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { svc.media(a, 0, "keyframes/frame_9999_tagged.png"); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { svc.media(a, 1, "tagged.avi"); }) == ErrorCode::UnknownVideo);
  CHECK(code_of([&] { svc.media("x", 0, "tagged.avi"); }) == ErrorCode::UnknownKey);
}

TEST_CASE("zip export is reproducible and mirrors the results") {
  TempDir dir;
  Service svc(config_in(dir));
  const auto key = svc.upload(two_clips());
  svc.process(key);
  svc.wait_idle();
  const auto z1 = svc.download_zip(key);
  const auto z2 = svc.download_zip(key);
  CHECK(z1 == z2);
  const auto entries = zip::read(z1, std::size_t{1} << 30);
  std::set<std::string> names;
  for (const auto& e : entries) names.insert(e.name);
  CHECK(names.count("manifest.json") == 1);
  CHECK(names.count("video_0_a.y4m/summarized.avi") == 1);
  CHECK(names.count("video_1_b.y4m/annotations.json") == 1);
  for (const auto& e : entries) {
    if (e.name == "video_0_a.y4m/segmented.avi") CHECK(e.data == svc.media(key, 0, "segmented.avi").bytes);
  }
}

TEST_CASE("a corrupt video fails the job with a message naming it") {
  TempDir dir;
  Service svc(config_in(dir));
  auto bad = clip(3);
  bad.resize(bad.size() / 2);
  const auto key = svc.upload({{"good.y4m", clip(1)}, {"bad.y4m", bad}});
  svc.process(key);
  svc.wait_idle();
  REQUIRE(svc.state(key) == JobState::Failed);
  const auto st = svc.status(key);
  CHECK(st["error"].get<std::string>().find("video 1 (bad.y4m)") != std::string::npos);
  CHECK(code_of([&] { svc.results(key); }) == ErrorCode::NotReady);
  CHECK(code_of([&] { svc.download_zip(key); }) == ErrorCode::NotReady);
  CHECK(code_of([&] { svc.media(key, 0, "tagged.avi"); }) == ErrorCode::NotReady);
  CHECK(svc.process(key) == JobState::Failed);
}

TEST_CASE("progress is reported per finished video") {
  register_analyzer("gated", [] { return std::make_unique<GatedAnalyzer>(); });
  TempDir dir;
  ServiceConfig cfg = config_in(dir, 1);
  cfg.pipeline.analyzer_name = "gated";
  Service svc(cfg);
  const auto key = svc.upload({{"first.y4m", clip(1)}, {"second.y4m", clip(2, 80)}});
  svc.process(key);
  const auto deadline = std::chrono::steady_clock::now() + 30s;
  while (!gate.reached && std::chrono::steady_clock::now() < deadline) std::this_thread::sleep_for(5ms);
  REQUIRE(gate.reached);
  const auto st = svc.status(key);
  CHECK(st["state"] == "processing");
  CHECK(st["progress"] == 0.5);
  CHECK(code_of([&] { svc.results(key); }) == ErrorCode::NotReady);
  gate.release();
  svc.wait_idle();
  CHECK(svc.state(key) == JobState::Complete);
}

TEST_CASE("jobs survive a restart") {
  TempDir dir;
  std::string done_key, pending_key;
  nlohmann::json results;
  {
    Service svc(config_in(dir));
    done_key = svc.upload(two_clips());
    pending_key = svc.upload({{"p.y4m", clip(4)}});
    svc.process(done_key);
    svc.wait_idle();
    results = svc.results(done_key);
  }
  Service again(config_in(dir));
  CHECK(again.job_count() == 2);
  CHECK(again.state(done_key) == JobState::Complete);
  CHECK(again.results(done_key) == results);
  CHECK(again.state(pending_key) == JobState::Uploaded);
  again.process(pending_key);
  again.wait_idle();
  CHECK(again.state(pending_key) == JobState::Complete);
}

TEST_CASE("expired jobs are swept") {
  TempDir dir;
  ServiceConfig cfg = config_in(dir);
  cfg.ttl = 3600s;
  Service svc(cfg);
  const auto key = svc.upload({{"a.y4m", clip(1)}});
  svc.process(key);
  svc.wait_idle();
  CHECK(svc.sweep_expired(std::chrono::system_clock::now()) == 0);
  CHECK(svc.sweep_expired(std::chrono::system_clock::now() + 3601s) == 1);
  CHECK(svc.job_count() == 0);
  CHECK(code_of([&] { svc.status(key); }) == ErrorCode::UnknownKey);
  CHECK(!std::filesystem::exists(dir / ("data/jobs/" + key)));
}

TEST_CASE("job keys") {
  std::set<std::string> keys;
  for (int i = 0; i < 10000; ++i) {
    const auto k = generate_job_key();
    CHECK(k.size() == 22);
    CHECK(is_well_formed_key(k));
    keys.insert(k);
  }
  CHECK(keys.size() == 10000);
  CHECK(!is_well_formed_key("short"));
  CHECK(!is_well_formed_key("../aaaaaaaaaaaaaaaaaaa"));

  TempDir dir;
  Service svc(config_in(dir));
  int calls = 0;
  svc.set_key_generator([&] { return ++calls <= 3 ? std::string(22, 'A') : generate_job_key(); });
  const auto first = svc.upload({{"a.y4m", clip(1)}});
  CHECK(first == std::string(22, 'A'));
  const auto second = svc.upload({{"b.y4m", clip(1)}});
  CHECK(second != first);
  CHECK(svc.job_count() == 2);
}

TEST_CASE("configuration layering") {
  TempDir dir;
  write_text(dir / "cfg.json", R"({"port": 9001, "workers": 3, "summarizer_params": {"tau": 0.2}})");
  auto cfg = load_service_config(dir / "cfg.json", env_of({{"LUSVIEW_PORT", "9100"}, {"LUSVIEW_TTL_SECONDS", "60"}}));
  CHECK(cfg.port == 9100);
  CHECK(cfg.workers == 3);
  CHECK(cfg.ttl == 60s);
  CHECK(cfg.pipeline.summarizer.tau == 0.2);
  CHECK(code_of([&] { load_service_config(std::nullopt, env_of({{"LUSVIEW_PORT", "abc"}})); }) ==
        ErrorCode::BadConfig);
  CHECK(code_of([&] { load_service_config(std::nullopt, env_of({{"LUSVIEW_WORKERS", "0"}})); }) ==
        ErrorCode::BadConfig);
  CHECK(code_of([&] { load_service_config(dir / "missing.json", env_of({})); }) == ErrorCode::BadConfig);
  write_text(dir / "bad.json", "{not json");
  CHECK(code_of([&] { load_service_config(dir / "bad.json", env_of({})); }) == ErrorCode::BadConfig);
  ServiceConfig orphan;
  orphan.data_root = dir / "no/such/parent";
  CHECK(code_of([&] { Service s(orphan); }) == ErrorCode::BadConfig);
}

TEST_CASE("state machine") {
  CHECK(legal_transition(JobState::Uploaded, JobState::Queued));
  CHECK(legal_transition(JobState::Processing, JobState::Complete));
  CHECK(!legal_transition(JobState::Complete, JobState::Processing));
  CHECK(!legal_transition(JobState::Failed, JobState::Queued));
  CHECK(!legal_transition(JobState::Uploaded, JobState::Complete));
  for (auto s : {JobState::Uploaded, JobState::Queued, JobState::Processing, JobState::Complete, JobState::Failed}) {
    CHECK(parse_job_state(to_string(s)) == s);
  }
}
