#include "lusview/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "lusview/analyzer.hpp"
#include "lusview/annotation_json.hpp"
#include "lusview/rng.hpp"

namespace lusview {
namespace {

[[noreturn]] void out_of_bounds(const std::string& what) {
  throw Error(ErrorCode::SpecOutOfBounds, "phantom spec: " + what);
}

double aline_level(std::uint32_t k) {
  return kPhantomBackground + (kPhantomPleura - kPhantomBackground) * std::pow(kPhantomALineDecay, k);
}

}  // namespace

std::int32_t phantom_pleura_row(const PhantomSpec& spec, std::uint32_t t) {
  return spec.pleura_row.value_or(0) + static_cast<std::int32_t>(t) * spec.drift_px_per_frame;
}

void validate(const PhantomSpec& spec) {
  const auto W = static_cast<std::int64_t>(spec.width);
  const auto H = static_cast<std::int64_t>(spec.height);
  if (spec.width < kMinFrameDim || spec.height < kMinFrameDim) out_of_bounds("geometry below 32x32");
  if (spec.width > 4096 || spec.height > 4096) out_of_bounds("geometry above 4096x4096");
  if (spec.n_frames < 1 || spec.n_frames > 2000) out_of_bounds("n_frames must be in [1, 2000]");

  if (!spec.pleura_row) {
    if (spec.aline_count || !spec.bline_cols.empty() || !spec.consolidation_rects.empty()) {
      out_of_bounds("A-lines, B-lines and consolidations require a pleura");
    }
  } else {
    std::int64_t deepest = 0;
    for (std::uint32_t t = 0; t < spec.n_frames; ++t) {
      const std::int64_t r = phantom_pleura_row(spec, t);
      if (r < H / 8 || r > H / 2) {
        out_of_bounds("pleura_row " + std::to_string(r) + " (frame " + std::to_string(t) +
                      ") outside [height/8, height/2]");
      }
      if (spec.aline_count > 0 && r * (spec.aline_count + 1) + 1 >= H) {
        out_of_bounds("A-line " + std::to_string(spec.aline_count) + " falls below the frame");
      }
      deepest = std::max(deepest, r);
    }
    for (const auto c : spec.bline_cols) {
      if (c < 2 || c > W - 3) out_of_bounds("bline column " + std::to_string(c) + " outside [2, width-3]");
    }
    for (const BBox& b : spec.consolidation_rects) {
      if (!bbox_inside(b, spec.width, spec.height)) out_of_bounds("consolidation rect outside the frame");
      if (b.y < deepest + 2) out_of_bounds("consolidation rect must lie below the pleura");
    }
  }
  for (const auto& [a, b] : spec.shadow_cols) {
    if (a < 0 || b < a || b >= W) out_of_bounds("shadow band outside the frame");
  }
}

PhantomClip generate(const PhantomSpec& spec, const std::string& source_name) {
  validate(spec);
  const std::uint32_t W = spec.width, H = spec.height;
  Xorshift64Star rng(spec.noise_seed);
  std::vector<Frame> frames;
  std::vector<FrameAnnotation> truth;
  frames.reserve(spec.n_frames);
  truth.reserve(spec.n_frames);

  std::vector<double> base(std::size_t{W} * H);
  auto row_fill = [&](std::int64_t y, std::int64_t x0, std::int64_t x1, double v) {
    if (y < 0 || y >= H) return;
    for (std::int64_t x = std::max<std::int64_t>(0, x0); x <= std::min<std::int64_t>(W - 1, x1); ++x) {
      base[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)] = v;
    }
  };

  for (std::uint32_t t = 0; t < spec.n_frames; ++t) {
    std::fill(base.begin(), base.end(), kPhantomBackground);
    FrameAnnotation ann;
    ann.frame_index = t;
    SegMask pleura_mask(ArtefactClass::Pleura, W, H);
    SegMask bline_mask(ArtefactClass::BLine, W, H);
    SegMask shadow_mask(ArtefactClass::Shadow, W, H);
    SegMask cons_mask(ArtefactClass::Consolidation, W, H);

    std::int32_t r = 0;
    if (spec.pleura_row) {
      r = phantom_pleura_row(spec, t);
      for (std::uint32_t k = 1; k <= spec.aline_count; ++k) {
        const std::int32_t c = r * static_cast<std::int32_t>(k + 1);
        for (int dy = -1; dy <= 1; ++dy) row_fill(c + dy, 0, W - 1, aline_level(k));
        ann.detections.push_back({ArtefactClass::ALine, {0, c - 1, static_cast<int>(W), 3}, 1.0});
      }
      for (const BBox& b : spec.consolidation_rects) {
        for (int y = b.y; y < b.bottom(); ++y) {
          row_fill(y, b.x, b.right() - 1, kPhantomConsolidation);
          for (int x = b.x; x < b.right(); ++x) cons_mask.mark(x, y);
        }
        ann.detections.push_back({ArtefactClass::Consolidation, b, 1.0});
      }
      for (const auto c : spec.bline_cols) {
        for (std::int64_t y = r + 2; y < H; ++y) {
          row_fill(y, c - 1, c + 1, kPhantomBLine);
          for (int x = c - 1; x <= c + 1; ++x) bline_mask.mark(x, static_cast<std::uint32_t>(y));
        }
        ann.detections.push_back(
            {ArtefactClass::BLine, {c - 2, r, 5, static_cast<int>(H) - r}, 1.0});
      }
      for (int dy = -1; dy <= 1; ++dy) {
        row_fill(r + dy, 0, W - 1, kPhantomPleura);
        for (std::uint32_t x = 0; x < W; ++x) pleura_mask.mark(x, static_cast<std::uint32_t>(r + dy));
      }
      ann.detections.push_back({ArtefactClass::Pleura, {0, r - 1, static_cast<int>(W), 3}, 1.0});
    }
    for (const auto& [a, b] : spec.shadow_cols) {
      for (std::uint32_t y = 0; y < H; ++y) {
        for (std::int32_t x = a; x <= b; ++x) {
          base[std::size_t{y} * W + static_cast<std::size_t>(x)] *= kPhantomShadowGain;
          shadow_mask.mark(static_cast<std::uint32_t>(x), y);
          pleura_mask.bits[std::size_t{y} * W + static_cast<std::size_t>(x)] = 0;
        }
      }
      ann.detections.push_back({ArtefactClass::Shadow, {a, 0, b - a + 1, static_cast<int>(H)}, 1.0});
    }

    std::vector<std::uint8_t> px(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double v = base[i] * (0.7 + 0.6 * rng.uniform());
      px[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    frames.emplace_back(W, H, std::move(px), t, timestamp_for(t, {20, 1}));

    if (spec.pleura_row) ann.masks.push_back(std::move(pleura_mask));
    if (!spec.bline_cols.empty()) ann.masks.push_back(std::move(bline_mask));
    if (!spec.consolidation_rects.empty()) ann.masks.push_back(std::move(cons_mask));
    if (!spec.shadow_cols.empty()) ann.masks.push_back(std::move(shadow_mask));
    ann.abnormal = flag_frame(ann.detections, AnalyzerParams{}.flag_confidence_theta);
    truth.push_back(std::move(ann));
  }
  return {FrameSequence(std::move(frames), {20, 1}, source_name), std::move(truth)};
}

void to_json(nlohmann::json& j, const PhantomSpec& spec) {
  j = nlohmann::json::object();
  j["width"] = spec.width;
  j["height"] = spec.height;
  j["pleura_row"] = spec.pleura_row ? nlohmann::json(*spec.pleura_row) : nlohmann::json(nullptr);
  j["aline_count"] = spec.aline_count;
  j["bline_cols"] = spec.bline_cols;
  auto shadows = nlohmann::json::array();
  for (const auto& [a, b] : spec.shadow_cols) shadows.push_back({a, b});
  j["shadow_cols"] = shadows;
  auto rects = nlohmann::json::array();
  for (const BBox& b : spec.consolidation_rects) rects.push_back({b.x, b.y, b.w, b.h});
  j["consolidation_rects"] = rects;
  j["noise_seed"] = spec.noise_seed;
  j["n_frames"] = spec.n_frames;
  j["drift_px_per_frame"] = spec.drift_px_per_frame;
}

PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) out_of_bounds("spec must be a JSON object");
  PhantomSpec s;
  try {
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    if (j.contains("pleura_row")) {
      if (j["pleura_row"].is_null()) s.pleura_row.reset();
      else s.pleura_row = j["pleura_row"].get<std::int32_t>();
    }
    s.aline_count = j.value("aline_count", s.aline_count);
    s.bline_cols = j.value("bline_cols", s.bline_cols);
    if (j.contains("shadow_cols")) {
      for (const auto& band : j["shadow_cols"]) {
        if (!band.is_array() || band.size() != 2) out_of_bounds("shadow_cols entries are [start, end]");
        s.shadow_cols.emplace_back(band[0].get<std::int32_t>(), band[1].get<std::int32_t>());
      }
    }
    if (j.contains("consolidation_rects")) {
      for (const auto& r : j["consolidation_rects"]) {
        if (!r.is_array() || r.size() != 4) out_of_bounds("consolidation_rects entries are [x, y, w, h]");
        s.consolidation_rects.push_back(
            {r[0].get<int>(), r[1].get<int>(), r[2].get<int>(), r[3].get<int>()});
      }
    }
    s.noise_seed = j.value("noise_seed", s.noise_seed);
    s.n_frames = j.value("n_frames", s.n_frames);
    s.drift_px_per_frame = j.value("drift_px_per_frame", s.drift_px_per_frame);
  } catch (const nlohmann::json::exception& e) {
    out_of_bounds(std::string("malformed field: ") + e.what());
  }
  return s;
}

nlohmann::json phantom_truth_json(const PhantomSpec& spec, const std::vector<FrameAnnotation>& truth) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& ann : truth) frames.push_back(annotation_entry_json(ann));
  return {{"spec", spec}, {"frames", frames}};
}

}  // namespace lusview
