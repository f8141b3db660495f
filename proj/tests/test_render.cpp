#include <doctest.h>

#include "lusview/analyzer.hpp"
#include "lusview/codec.hpp"
#include "lusview/phantom.hpp"
#include "lusview/render.hpp"
#include "lusview/video_io.hpp"
#include "test_util.hpp"

using namespace lusview;
using namespace lusview::testing;

namespace {

Rgb grey(std::uint8_t v) { return {v, v, v}; }

struct Clip {
  FrameSequence seq;
  SummaryResult summary;
  std::vector<FrameAnnotation> anns;
};

Clip analysed_clip(std::uint32_t n_frames) {
  PhantomSpec spec;
  spec.width = 96;
  spec.height = 128;
  spec.pleura_row = 16;
  spec.aline_count = 2;
  spec.bline_cols = {30};
  spec.shadow_cols = {{60, 68}};
  spec.n_frames = n_frames;
  spec.drift_px_per_frame = 1;
  spec.noise_seed = 4;
  auto clip = generate(spec);
  auto summary = summarize(clip.sequence, {});
  std::vector<FrameAnnotation> anns;
  for (auto idx : summary.keyframe_indices) {
    auto a = analyze_frame(clip.sequence[idx], {});
    a.frame_index = idx;
    anns.push_back(std::move(a));
  }
  return {std::move(clip.sequence), std::move(summary), std::move(anns)};
}

}  // namespace

TEST_CASE("empty annotation renders an exact RGB copy") {
  Xorshift64Star rng(1);
  const Frame f = random_frame(40, 36, rng);
  const ColorFrame expect = to_color(f);
  CHECK(render_segmentation(f, {}, {}) == expect);
  CHECK(render_tagging(f, {}, {}) == expect);
  for (std::uint32_t y = 0; y < 36; ++y) CHECK(expect.at(3, y) == grey(f.at(3, y)));
}

TEST_CASE("full-frame mask at alpha 1 replaces every pixel with the class colour") {
  OverlayStyle style;
  style.alpha = 1.0;
  FrameAnnotation ann;
  SegMask m(ArtefactClass::Consolidation, 32, 32);
  for (std::uint32_t y = 0; y < 32; ++y) {
    for (std::uint32_t x = 0; x < 32; ++x) m.mark(x, y);
  }
  ann.masks.push_back(m);
  const auto out = render_segmentation(filled_frame(32, 32, 77), ann, style);
  for (std::uint32_t y = 0; y < 32; ++y) {
    for (std::uint32_t x = 0; x < 32; ++x) CHECK(out.at(x, y) == style.color(ArtefactClass::Consolidation));
  }
}

TEST_CASE("single-pixel blend at alpha 0.45 on base 100 with red gives (170, 55, 55)") {
  OverlayStyle style;
  style.colors[static_cast<std::size_t>(ArtefactClass::BLine)] = {255, 0, 0};
  FrameAnnotation ann;
  SegMask m(ArtefactClass::BLine, 32, 32);
  m.mark(5, 6);
  ann.masks.push_back(m);
  const auto out = render_segmentation(filled_frame(32, 32, 100), ann, style);
  CHECK(out.at(5, 6) == Rgb{170, 55, 55});
  CHECK(out.at(6, 6) == grey(100));
}

TEST_CASE("blend order is pleura, shadow, consolidation, B-line") {
  OverlayStyle style;
  style.alpha = 1.0;
  FrameAnnotation ann;
  for (ArtefactClass c : {ArtefactClass::BLine, ArtefactClass::Consolidation, ArtefactClass::Shadow,
                          ArtefactClass::Pleura}) {
    SegMask m(c, 32, 32);
    m.mark(1, 1);
    ann.masks.push_back(m);
  }
  CHECK(render_segmentation(filled_frame(32, 32, 0), ann, style).at(1, 1) == style.color(ArtefactClass::BLine));
  ann.masks.erase(ann.masks.begin());
  CHECK(render_segmentation(filled_frame(32, 32, 0), ann, style).at(1, 1) ==
        style.color(ArtefactClass::Consolidation));
}

TEST_CASE("mismatched masks and out-of-frame boxes are GeometryMismatch") {
  FrameAnnotation ann;
  ann.masks.push_back(SegMask(ArtefactClass::Pleura, 40, 32));
  CHECK(code_of([&] { render_segmentation(filled_frame(32, 32, 0), ann, {}); }) == ErrorCode::GeometryMismatch);
  FrameAnnotation boxes;
  boxes.detections.push_back({ArtefactClass::Rib, {30, 30, 5, 5}, 0.5});
  CHECK(code_of([&] { render_tagging(filled_frame(32, 32, 0), boxes, {}); }) == ErrorCode::GeometryMismatch);
}

TEST_CASE("box (10,10,20,20) outline covers exactly the 2 px perimeter") {
  const OverlayStyle style;
  FrameAnnotation ann;
  ann.detections.push_back({ArtefactClass::Shadow, {10, 10, 20, 20}, 0.75});
  const auto out = render_tagging(filled_frame(64, 64, 0), ann, style);
  const Rgb c = style.color(ArtefactClass::Shadow);
  for (int y = 9; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const bool inside = x >= 10 && x < 30 && y >= 10 && y < 30;
      const bool ring = inside && (x < 12 || x >= 28 || y < 12 || y >= 28);
      CHECK(out.at(x, y) == (ring ? c : grey(0)));
    }
  }
  // label drawn above the box: some class-coloured pixels in rows 2..8
  int label_px = 0;
  for (int y = 2; y <= 8; ++y) {
    for (int x = 10; x < 64; ++x) label_px += out.at(x, y) == c;
  }
  CHECK(label_px > 10);
  for (int x = 0; x < 64; ++x) {
    CHECK(out.at(x, 0) == grey(0));
    CHECK(out.at(x, 1) == grey(0));
  }
}

TEST_CASE("labels move below a box touching the top edge") {
  const OverlayStyle style;
  FrameAnnotation ann;
  ann.detections.push_back({ArtefactClass::Pleura, {0, 0, 64, 5}, 1.0});
  const auto out = render_tagging(filled_frame(64, 64, 0), ann, style);
  int below = 0;
  for (int y = 6; y <= 12; ++y) {
    for (int x = 0; x < 64; ++x) below += out.at(x, y) == style.color(ArtefactClass::Pleura);
  }
  CHECK(below > 10);
}

TEST_CASE("label text format") {
  CHECK(detection_label({ArtefactClass::BLine, {}, 0.8}) == "b-line 0.80");
  CHECK(detection_label({ArtefactClass::Consolidation, {}, 1.0}) == "consolidation 1.00");
  CHECK(detection_label({ArtefactClass::ALine, {}, 0.126}) == "a-line 0.13");
}

TEST_CASE("draw_text clips at frame borders") {
  ColorFrame img(32, 32);
  CHECK_NOTHROW(draw_text(img, -3, -4, "pleura 0.99", {255, 255, 255}));
  CHECK_NOTHROW(draw_text(img, 30, 30, "x", {255, 255, 255}));
}

TEST_CASE("style validation") {
  OverlayStyle s;
  CHECK_NOTHROW(s.validate());
  s.alpha = 0.0;
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::InvalidParams);
  s = {};
  s.colors[0] = s.colors[1];
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::InvalidParams);
  s = {};
  s.line_thickness = 0;
  CHECK(code_of([&] { s.validate(); }) == ErrorCode::InvalidParams);
}

TEST_CASE("rendering leaves the input frame untouched") {
  const auto c = analysed_clip(1);
  const Frame before = c.seq[0];
  render_segmentation(c.seq[0], c.anns[0], {});
  render_tagging(c.seq[0], c.anns[0], {});
  CHECK(c.seq[0] == before);
}

TEST_CASE("single-keyframe bundle has one-frame videos") {
  const FrameSequence seq({filled_frame(64, 48, 80)}, {20, 1}, "one.y4m");
  const auto summary = summarize(seq, {});
  FrameAnnotation ann = analyze_frame(seq[0], {});
  const auto bundle = build_bundle(seq, summary, {ann}, {});
  for (const char* v : {"summarized.avi", "segmented.avi", "tagged.avi"}) {
    const auto back = decode(bundle.artifacts().at(v), v, {});
    CHECK(back.size() == 1);
    CHECK(back.width() == 64);
  }
}

TEST_CASE("bundle contents, flags and determinism") {
  const auto c = analysed_clip(24);
  const auto bundle = build_bundle(c.seq, c.summary, c.anns, {});
  const std::size_t k = c.summary.keyframe_indices.size();
  REQUIRE(k >= 2);
  CHECK(bundle.artifacts().size() == 4 + 3 * k);
  for (const char* v : {"summarized.avi", "segmented.avi", "tagged.avi"}) {
    const auto back = decode(bundle.artifacts().at(v), v, {});
    CHECK(back.size() == k);
    CHECK(back.width() == 96);
    CHECK(back.height() == 128);
    CHECK(back.fps() == Rational{20, 1});
  }
  for (auto idx : c.summary.keyframe_indices) {
    for (const char* variant : kVariants) CHECK(bundle.artifacts().count(keyframe_artifact(idx, variant)) == 1);
  }
  const auto& png = bundle.artifacts().at(keyframe_artifact(c.summary.keyframe_indices[0], "summarized"));
  CHECK(codec::decode_png(png, 1 << 20) == c.seq[c.summary.keyframe_indices[0]].with_position(0, 0));

  const auto& aj = bundle.artifacts().at("annotations.json");
  const auto j = nlohmann::json::parse(aj.begin(), aj.end());
  CHECK(j["video"] == c.seq.source_name());
  CHECK(j["fps"] == 20.0);
  REQUIRE(j["keyframes"].size() == k);
  for (std::size_t i = 0; i < k; ++i) {
    CHECK(j["keyframes"][i]["index"] == c.anns[i].frame_index);
    CHECK(j["keyframes"][i]["abnormal"] == c.anns[i].abnormal);
    CHECK(j["keyframes"][i]["detections"].size() == c.anns[i].detections.size());
    CHECK(bundle.abnormal(c.anns[i].frame_index) == c.anns[i].abnormal);
  }
  for (const auto& d : j["keyframes"][0]["detections"]) {
    CHECK(d.contains("class"));
    CHECK(d["bbox"].size() == 4);
    CHECK(d["confidence"].is_number());
  }

  const auto again = build_bundle(c.seq, c.summary, c.anns, {});
  CHECK(again.artifacts() == bundle.artifacts());
}

TEST_CASE("annotation/keyframe mismatch is rejected") {
  const auto c = analysed_clip(12);
  auto anns = c.anns;
  anns.pop_back();
  CHECK(code_of([&] { build_bundle(c.seq, c.summary, anns, {}); }) == ErrorCode::AnnotationMismatch);
  anns = c.anns;
  anns[0].frame_index += 1;
  CHECK(code_of([&] { build_bundle(c.seq, c.summary, anns, {}); }) == ErrorCode::AnnotationMismatch);
}
