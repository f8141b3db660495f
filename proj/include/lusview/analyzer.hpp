#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lusview/core.hpp"

namespace lusview {

struct AnalyzerParams {
  double pleura_min_contrast = 1.6;  // pleural band mean / global mean
  double aline_spacing_tol = 0.15;   // relative window around k * pleura depth
  double aline_min_contrast = 1.25;  // A-line row median / sub-pleural median
  double bline_col_contrast = 1.4;   // column mean / region reference
  double shadow_max_ratio = 0.35;    // column mean / region reference
  double flag_confidence_theta = 0.5;

  /// Throws InvalidParams.
  void validate() const;
};

void to_json(nlohmann::json& j, const AnalyzerParams& p);
AnalyzerParams analyzer_params_from_json(const nlohmann::json& j);

struct Finding {
  Detection detection;
  std::optional<SegMask> mask;
};

/// Shared statistic: value/threshold contrast mapped so that crossing the
/// threshold gives 0.5, clamped to [0, 1].
double contrast_confidence(double contrast, double threshold);

std::optional<Finding> detect_pleura(const Frame& frame, const AnalyzerParams& p);

/// Needs the pleura detection; depth is the pleura row (bbox centre).
std::vector<Detection> detect_alines(const Frame& frame, const Detection& pleura, const AnalyzerParams& p);

/// B-lines (with one merged mask), shadows (one merged mask) and ribs (box only).
std::vector<Finding> detect_blines_and_shadows(const Frame& frame, const Detection* pleura,
                                               const AnalyzerParams& p);

/// Sub-pleural mid-grey components. Pixels inside `exclude` boxes (line
/// artefacts already explained) are skipped, and components split only by an
/// excluded band are joined across it. Without a pleura nothing is reported.
std::vector<Finding> detect_consolidation(const Frame& frame, const Detection* pleura, const AnalyzerParams& p,
                                          std::span<const BBox> exclude = {});

/// True iff some B-line or consolidation has confidence >= theta.
bool flag_frame(std::span<const Detection> detections, double theta);

FrameAnnotation analyze_frame(const Frame& frame, const AnalyzerParams& p);

/// Geometry, confidence, mask and flag checks at the plugin boundary. Throws ValidationError.
void validate_annotation(const FrameAnnotation& ann, std::uint32_t width, std::uint32_t height, double theta);

class Analyzer {
 public:
  virtual ~Analyzer() = default;
  virtual std::string name() const = 0;
  virtual FrameAnnotation analyze_frame(const Frame& frame, const AnalyzerParams& p) const = 0;
};

inline constexpr const char* kDefaultAnalyzer = "profile-heuristic";

using AnalyzerFactory = std::function<std::unique_ptr<Analyzer>()>;
void register_analyzer(const std::string& name, AnalyzerFactory factory);
/// Throws BadConfig for unknown names.
std::unique_ptr<Analyzer> make_analyzer(const std::string& name);
std::vector<std::string> analyzer_names();

}  // namespace lusview
