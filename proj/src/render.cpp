#include "lusview/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "font5x7.hpp"
#include "lusview/annotation_json.hpp"
#include "lusview/video_io.hpp"

namespace lusview {

void OverlayStyle::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidParams, "overlay alpha must lie in (0, 1]");
  if (line_thickness < 1) throw Error(ErrorCode::InvalidParams, "box thickness must be >= 1");
  std::set<std::tuple<int, int, int>> seen;
  for (const Rgb& c : colors) seen.insert({c.r, c.g, c.b});
  if (seen.size() != colors.size()) throw Error(ErrorCode::InvalidParams, "class colors must be distinct");
}

std::string detection_label(const Detection& d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, " %.2f", d.confidence);
  return std::string(to_string(d.cls)) + buf;
}

namespace {

std::uint8_t blend(std::uint8_t base, std::uint8_t color, double alpha) {
  return static_cast<std::uint8_t>(std::clamp(std::lround((1.0 - alpha) * base + alpha * color), 0L, 255L));
}

void check_masks(const Frame& frame, const FrameAnnotation& ann) {
  for (const SegMask& m : ann.masks) {
    if (m.width != frame.width() || m.height != frame.height() || m.bits.size() != frame.pixels().size()) {
      throw Error(ErrorCode::GeometryMismatch, std::string(to_string(m.cls)) + " mask geometry differs from frame");
    }
  }
}

void fill_rect(ColorFrame& img, int x0, int y0, int x1, int y1, Rgb c) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, static_cast<int>(img.width()) - 1);
  y1 = std::min(y1, static_cast<int>(img.height()) - 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) img.set(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y), c);
  }
}

}  // namespace

ColorFrame render_segmentation(const Frame& frame, const FrameAnnotation& ann, const OverlayStyle& style) {
  check_masks(frame, ann);
  ColorFrame out = to_color(frame);
  static constexpr ArtefactClass kOrder[] = {ArtefactClass::Pleura, ArtefactClass::Shadow,
                                             ArtefactClass::Consolidation, ArtefactClass::BLine};
  for (ArtefactClass cls : kOrder) {
    const SegMask* m = ann.mask_for(cls);
    if (!m) continue;
    const Rgb c = style.color(cls);
    for (std::uint32_t y = 0; y < frame.height(); ++y) {
      for (std::uint32_t x = 0; x < frame.width(); ++x) {
        if (!m->test(x, y)) continue;
        const Rgb b = out.at(x, y);
        out.set(x, y, {blend(b.r, c.r, style.alpha), blend(b.g, c.g, style.alpha), blend(b.b, c.b, style.alpha)});
      }
    }
  }
  return out;
}

void draw_text(ColorFrame& img, int x, int y, const std::string& text, Rgb color) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const font::Glyph& g = font::glyph(text[i]);
    const int gx = x + static_cast<int>(i) * (kGlyphWidth + 1);
    for (int row = 0; row < kGlyphHeight; ++row) {
      for (int col = 0; col < kGlyphWidth; ++col) {
        if (!(g.rows[row] & (0x10 >> col))) continue;
        const int px = gx + col, py = y + row;
        if (px < 0 || py < 0 || px >= static_cast<int>(img.width()) || py >= static_cast<int>(img.height())) continue;
        img.set(static_cast<std::uint32_t>(px), static_cast<std::uint32_t>(py), color);
      }
    }
  }
}

ColorFrame render_tagging(const Frame& frame, const FrameAnnotation& ann, const OverlayStyle& style) {
  check_masks(frame, ann);
  for (const Detection& d : ann.detections) {
    if (!bbox_inside(d.bbox, frame.width(), frame.height())) {
      throw Error(ErrorCode::GeometryMismatch, std::string(to_string(d.cls)) + " box lies outside the frame");
    }
  }
  ColorFrame out = to_color(frame);
  const int H = static_cast<int>(frame.height());
  for (const Detection& d : ann.detections) {
    const Rgb c = style.color(d.cls);
    const BBox& b = d.bbox;
    const int t = style.line_thickness;
    fill_rect(out, b.x, b.y, b.right() - 1, std::min(b.bottom(), b.y + t) - 1, c);
    fill_rect(out, b.x, std::max(b.y, b.bottom() - t), b.right() - 1, b.bottom() - 1, c);
    fill_rect(out, b.x, b.y, std::min(b.right(), b.x + t) - 1, b.bottom() - 1, c);
    fill_rect(out, std::max(b.x, b.right() - t), b.y, b.right() - 1, b.bottom() - 1, c);

    int ty = b.y - 1 - kGlyphHeight;
    if (ty < 0) ty = b.bottom() + 1;
    if (ty + kGlyphHeight > H) ty = b.y + t + 1;
    draw_text(out, b.x, ty, detection_label(d), c);
  }
  return out;
}

std::string keyframe_artifact(std::uint32_t index, const std::string& variant) {
  return "keyframes/frame_" + std::to_string(index) + "_" + variant + ".png";
}

AnalysisBundle::AnalysisBundle(std::string video_name, Rational fps, std::size_t source_frames, SummaryResult summary,
                               std::vector<FrameAnnotation> annotations,
                               std::map<std::string, std::vector<std::uint8_t>> artifacts)
    : video_name_(std::move(video_name)), fps_(fps), source_frames_(source_frames), summary_(std::move(summary)),
      annotations_(std::move(annotations)), artifacts_(std::move(artifacts)) {}

std::size_t AnalysisBundle::abnormal_count() const {
  return static_cast<std::size_t>(
      std::count_if(annotations_.begin(), annotations_.end(), [](const FrameAnnotation& a) { return a.abnormal; }));
}

bool AnalysisBundle::abnormal(std::uint32_t frame_index) const {
  for (const auto& a : annotations_) {
    if (a.frame_index == frame_index) return a.abnormal;
  }
  return false;
}

AnalysisBundle build_bundle(const FrameSequence& seq, const SummaryResult& summary,
                            const std::vector<FrameAnnotation>& anns, const OverlayStyle& style) {
  const auto& keys = summary.keyframe_indices;
  if (anns.size() != keys.size()) {
    throw Error(ErrorCode::AnnotationMismatch, "got " + std::to_string(anns.size()) + " annotations for " +
                                                   std::to_string(keys.size()) + " keyframes");
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (anns[i].frame_index != keys[i]) {
      throw Error(ErrorCode::AnnotationMismatch, "annotation " + std::to_string(i) + " is for frame " +
                                                     std::to_string(anns[i].frame_index) + ", expected " +
                                                     std::to_string(keys[i]));
    }
    if (keys[i] >= seq.size()) throw Error(ErrorCode::AnnotationMismatch, "keyframe index out of range");
  }

  std::map<std::string, std::vector<std::uint8_t>> artifacts;
  std::vector<Frame> plain;
  std::vector<ColorFrame> segmented, tagged;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const Frame& f = seq[keys[i]];
    plain.push_back(f);
    segmented.push_back(render_segmentation(f, anns[i], style));
    tagged.push_back(render_tagging(f, anns[i], style));
    artifacts[keyframe_artifact(keys[i], kVariants[0])] = encode_png(f);
    artifacts[keyframe_artifact(keys[i], kVariants[1])] = encode_png(segmented.back());
    artifacts[keyframe_artifact(keys[i], kVariants[2])] = encode_png(tagged.back());
  }
  artifacts["summarized.avi"] = encode_video(FrameSequence::from_images(std::move(plain), seq.fps(), seq.source_name()));
  artifacts["segmented.avi"] = encode_video(segmented, seq.fps());
  artifacts["tagged.avi"] = encode_video(tagged, seq.fps());
  const std::string json = annotations_json(seq.source_name(), seq.fps(), anns).dump(2) + "\n";
  artifacts["annotations.json"] = std::vector<std::uint8_t>(json.begin(), json.end());
  return AnalysisBundle(seq.source_name(), seq.fps(), seq.size(), summary, anns, std::move(artifacts));
}

}  // namespace lusview
