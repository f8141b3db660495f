#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "lusview/core.hpp"

namespace lusview {

nlohmann::json detection_json(const Detection& d);

/// {"index", "abnormal", "detections"}; masks are not serialized.
nlohmann::json annotation_entry_json(const FrameAnnotation& ann);

/// {"video", "fps", "keyframes": [...]}
nlohmann::json annotations_json(const std::string& video, Rational fps,
                                const std::vector<FrameAnnotation>& keyframes);

/// Inverse of detection_json; throws ValidationError on unknown classes or bad shapes.
Detection detection_from_json(const nlohmann::json& j);

}  // namespace lusview
