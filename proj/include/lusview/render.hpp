#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "lusview/core.hpp"
#include "lusview/summarizer.hpp"

namespace lusview {

struct OverlayStyle {
  std::array<Rgb, 6> colors = {
      Rgb{0, 200, 200},  // a-line
      Rgb{220, 0, 0},    // b-line
      Rgb{230, 140, 0},  // consolidation
      Rgb{0, 200, 0},    // pleura
      Rgb{200, 0, 200},  // rib
      Rgb{0, 90, 220},   // shadow
  };
  double alpha = 0.45;
  int line_thickness = 2;

  Rgb color(ArtefactClass c) const { return colors[static_cast<std::size_t>(c)]; }
  /// Throws InvalidParams unless alpha in (0, 1], thickness >= 1 and colors are distinct.
  void validate() const;
};

/// "{class} {confidence:.2f}"
std::string detection_label(const Detection& d);

/// Masks blended as (1 - a) * base + a * color, in order Pleura, Shadow, Consolidation, BLine.
ColorFrame render_segmentation(const Frame& frame, const FrameAnnotation& ann, const OverlayStyle& style);

/// Box outlines inside the bbox plus a 5x7 bitmap label above the box (below it at the top edge).
ColorFrame render_tagging(const Frame& frame, const FrameAnnotation& ann, const OverlayStyle& style);

/// Draws text with the built-in 5x7 font (1 px spacing), clipped to the frame.
void draw_text(ColorFrame& img, int x, int y, const std::string& text, Rgb color);
inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;

inline constexpr const char* kVariants[3] = {"summarized", "segmented", "tagged"};

std::string keyframe_artifact(std::uint32_t index, const std::string& variant);

/// Immutable per-video artifact set.
class AnalysisBundle {
 public:
  AnalysisBundle(std::string video_name, Rational fps, std::size_t source_frames, SummaryResult summary,
                 std::vector<FrameAnnotation> annotations, std::map<std::string, std::vector<std::uint8_t>> artifacts);

  const std::string& video_name() const { return video_name_; }
  Rational fps() const { return fps_; }
  std::size_t source_frames() const { return source_frames_; }
  const SummaryResult& summary() const { return summary_; }
  const std::vector<FrameAnnotation>& annotations() const { return annotations_; }
  const std::map<std::string, std::vector<std::uint8_t>>& artifacts() const { return artifacts_; }
  std::size_t abnormal_count() const;
  bool abnormal(std::uint32_t frame_index) const;

 private:
  std::string video_name_;
  Rational fps_;
  std::size_t source_frames_;
  SummaryResult summary_;
  std::vector<FrameAnnotation> annotations_;
  std::map<std::string, std::vector<std::uint8_t>> artifacts_;
};

/// Artifacts: summarized.avi, segmented.avi, tagged.avi, annotations.json and
/// keyframes/frame_{index}_{variant}.png for every keyframe.
/// Throws AnnotationMismatch unless anns cover exactly the keyframes, in order.
AnalysisBundle build_bundle(const FrameSequence& seq, const SummaryResult& summary,
                            const std::vector<FrameAnnotation>& anns, const OverlayStyle& style);

}  // namespace lusview
