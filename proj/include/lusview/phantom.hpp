#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lusview/core.hpp"

namespace lusview {

/// Synthetic lung-ultrasound clip description. Ground truth is known by construction.
///
/// Rendering (per frame t, pleura row r = pleura_row + t * drift):
///   background 60; A-line k (rows r*(k+1) +-1) at 60 + 160 * 0.6^k;
///   consolidations at 126; B-lines (3 px wide, rows r+2..bottom) at 180;
///   pleura (rows r-1..r+1) at 220; shadow columns scaled by 0.2 over the full height.
///   Each pixel is then base * (0.7 + 0.6 u), u from Xorshift64Star(noise_seed),
///   drawn in row-major order frame after frame.
struct PhantomSpec {
  std::uint32_t width = 64;
  std::uint32_t height = 64;
  /// Absent means a pleura-free clip (no A-lines, B-lines or consolidations allowed).
  std::optional<std::int32_t> pleura_row = 16;
  std::uint32_t aline_count = 0;
  std::vector<std::int32_t> bline_cols;
  std::vector<std::pair<std::int32_t, std::int32_t>> shadow_cols;  // inclusive column range
  std::vector<BBox> consolidation_rects;
  std::uint64_t noise_seed = 0;
  std::uint32_t n_frames = 1;
  std::int32_t drift_px_per_frame = 0;
};

inline constexpr double kPhantomBackground = 60.0;
inline constexpr double kPhantomPleura = 220.0;
inline constexpr double kPhantomBLine = 180.0;
inline constexpr double kPhantomConsolidation = 126.0;
inline constexpr double kPhantomShadowGain = 0.2;
inline constexpr double kPhantomALineDecay = 0.6;

/// Pleura row of frame t.
std::int32_t phantom_pleura_row(const PhantomSpec& spec, std::uint32_t t);

/// Throws SpecOutOfBounds naming the first violated constraint.
void validate(const PhantomSpec& spec);

struct PhantomClip {
  FrameSequence sequence;
  std::vector<FrameAnnotation> truth;  // one per frame
};

PhantomClip generate(const PhantomSpec& spec, const std::string& source_name = "phantom.y4m");

void to_json(nlohmann::json& j, const PhantomSpec& spec);
/// Missing fields take defaults; wrong types throw SpecOutOfBounds.
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);

/// Ground truth sidecar: {"spec": ..., "frames": [{"index", "abnormal", "detections"}]}.
nlohmann::json phantom_truth_json(const PhantomSpec& spec, const std::vector<FrameAnnotation>& truth);

}  // namespace lusview
