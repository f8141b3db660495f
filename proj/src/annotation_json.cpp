#include "lusview/annotation_json.hpp"

namespace lusview {

nlohmann::json detection_json(const Detection& d) {
  return {{"class", std::string(to_string(d.cls))},
          {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
          {"confidence", d.confidence}};
}

nlohmann::json annotation_entry_json(const FrameAnnotation& ann) {
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : ann.detections) dets.push_back(detection_json(d));
  return {{"index", ann.frame_index}, {"abnormal", ann.abnormal}, {"detections", dets}};
}

nlohmann::json annotations_json(const std::string& video, Rational fps,
                                const std::vector<FrameAnnotation>& keyframes) {
  nlohmann::json kfs = nlohmann::json::array();
  for (const auto& ann : keyframes) kfs.push_back(annotation_entry_json(ann));
  return {{"video", video}, {"fps", fps.value()}, {"keyframes", kfs}};
}

Detection detection_from_json(const nlohmann::json& j) {
  try {
    const auto cls = parse_artefact_class(j.at("class").get<std::string>());
    if (!cls) throw Error(ErrorCode::ValidationError, "unknown artefact class " + j.at("class").dump());
    const auto& b = j.at("bbox");
    if (!b.is_array() || b.size() != 4) throw Error(ErrorCode::ValidationError, "bbox must be [x,y,w,h]");
    return {*cls, {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()},
            j.at("confidence").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("malformed detection: ") + e.what());
  }
}

}  // namespace lusview
