#include "lusview/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lusview {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidGeometry: return "invalid_geometry";
    case ErrorCode::InvalidFrame: return "invalid_frame";
    case ErrorCode::UnsupportedFormat: return "unsupported_format";
    case ErrorCode::CorruptStream: return "corrupt_stream";
    case ErrorCode::LimitExceeded: return "limit_exceeded";
    case ErrorCode::EmptySequence: return "empty_sequence";
    case ErrorCode::SpecOutOfBounds: return "spec_out_of_bounds";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::GeometryMismatch: return "geometry_mismatch";
    case ErrorCode::AnnotationMismatch: return "annotation_mismatch";
    case ErrorCode::InvalidParams: return "invalid_params";
    case ErrorCode::ValidationError: return "validation_error";
    case ErrorCode::TooManyFiles: return "too_many_files";
    case ErrorCode::FileTooLarge: return "file_too_large";
    case ErrorCode::EmptyUpload: return "empty_upload";
    case ErrorCode::UnknownKey: return "unknown_key";
    case ErrorCode::UnknownVideo: return "unknown_video";
    case ErrorCode::NotReady: return "not_ready";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::IoError: return "io_error";
    case ErrorCode::BadConfig: return "bad_config";
  }
  return "unknown";
}

Rational make_rational(std::int64_t num, std::int64_t den) {
  if (num <= 0 || den <= 0) {
    throw Error(ErrorCode::InvalidParams, "frame rate must be a positive rational");
  }
  const std::int64_t g = std::gcd(num, den);
  return {num / g, den / g};
}

namespace {

void check_geometry(std::uint32_t width, std::uint32_t height) {
  if (width < kMinFrameDim || height < kMinFrameDim) {
    throw Error(ErrorCode::InvalidGeometry, "frame geometry " + std::to_string(width) + "x" +
                                                std::to_string(height) + " is below 32x32");
  }
}

}  // namespace

Frame::Frame(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> pixels,
             std::uint32_t index, std::int64_t timestamp_ms)
    : width_(width), height_(height), pixels_(std::move(pixels)), index_(index),
      timestamp_ms_(timestamp_ms) {
  check_geometry(width, height);
  if (pixels_.size() != std::size_t{width} * height) {
    throw Error(ErrorCode::InvalidFrame, "pixel buffer holds " + std::to_string(pixels_.size()) +
                                             " bytes, expected " +
                                             std::to_string(std::size_t{width} * height));
  }
}

Frame Frame::with_position(std::uint32_t index, std::int64_t timestamp_ms) const {
  Frame copy = *this;
  copy.index_ = index;
  copy.timestamp_ms_ = timestamp_ms;
  return copy;
}

ColorFrame::ColorFrame(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> rgb)
    : width_(width), height_(height), rgb_(std::move(rgb)) {
  if (width == 0 || height == 0) throw Error(ErrorCode::InvalidGeometry, "empty color frame");
  if (rgb_.size() != std::size_t{width} * height * 3) {
    throw Error(ErrorCode::InvalidFrame, "rgb buffer length does not match geometry");
  }
}

ColorFrame::ColorFrame(std::uint32_t width, std::uint32_t height, Rgb fill)
    : width_(width), height_(height), rgb_(std::size_t{width} * height * 3) {
  if (width == 0 || height == 0) throw Error(ErrorCode::InvalidGeometry, "empty color frame");
  for (std::size_t i = 0; i < rgb_.size(); i += 3) {
    rgb_[i] = fill.r;
    rgb_[i + 1] = fill.g;
    rgb_[i + 2] = fill.b;
  }
}

Frame to_grayscale(const ColorFrame& color, std::uint32_t index, std::int64_t timestamp_ms) {
  check_geometry(color.width(), color.height());
  const auto src = color.data();
  std::vector<std::uint8_t> gray(std::size_t{color.width()} * color.height());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const double y = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    gray[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return Frame(color.width(), color.height(), std::move(gray), index, timestamp_ms);
}

ColorFrame to_color(const Frame& frame) {
  const auto src = frame.pixels();
  std::vector<std::uint8_t> rgb(src.size() * 3);
  for (std::size_t i = 0; i < src.size(); ++i) {
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = src[i];
  }
  return ColorFrame(frame.width(), frame.height(), std::move(rgb));
}

std::int64_t timestamp_for(std::uint32_t index, Rational fps) {
  // round(index * 1000 / fps) in integer arithmetic
  const std::int64_t n = std::int64_t{index} * 1000 * fps.den;
  return (2 * n + fps.num) / (2 * fps.num);
}

FrameSequence::FrameSequence(std::vector<Frame> frames, Rational fps, std::string source_name)
    : frames_(std::move(frames)), fps_(make_rational(fps.num, fps.den)),
      source_name_(std::move(source_name)) {
  if (frames_.empty()) throw Error(ErrorCode::EmptySequence, "frame sequence is empty");
  const auto w = frames_.front().width();
  const auto h = frames_.front().height();
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    const Frame& f = frames_[i];
    if (f.width() != w || f.height() != h) {
      throw Error(ErrorCode::GeometryMismatch, "frame " + std::to_string(i) +
                                                   " geometry differs from frame 0");
    }
    if (f.index() != i) {
      throw Error(ErrorCode::InvalidFrame, "frame indices must be 0..N-1 in order");
    }
  }
}

FrameSequence FrameSequence::from_images(std::vector<Frame> frames, Rational fps,
                                         std::string source_name) {
  const Rational r = make_rational(fps.num, fps.den);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto idx = static_cast<std::uint32_t>(i);
    frames[i] = frames[i].with_position(idx, timestamp_for(idx, r));
  }
  return FrameSequence(std::move(frames), r, std::move(source_name));
}

std::string_view to_string(ArtefactClass cls) {
  switch (cls) {
    case ArtefactClass::ALine: return "a-line";
    case ArtefactClass::BLine: return "b-line";
    case ArtefactClass::Consolidation: return "consolidation";
    case ArtefactClass::Pleura: return "pleura";
    case ArtefactClass::Rib: return "rib";
    case ArtefactClass::Shadow: return "shadow";
  }
  return "unknown";
}

std::optional<ArtefactClass> parse_artefact_class(std::string_view name) {
  for (ArtefactClass c : kAllClasses) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

double iou(const BBox& a, const BBox& b) {
  const int ix = std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const int iy = std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const double inter = static_cast<double>(ix) * iy;
  const double uni = static_cast<double>(a.w) * a.h + static_cast<double>(b.w) * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

bool bbox_inside(const BBox& box, std::uint32_t width, std::uint32_t height) {
  return box.w >= 1 && box.h >= 1 && box.x >= 0 && box.y >= 0 &&
         static_cast<std::int64_t>(box.x) + box.w <= width &&
         static_cast<std::int64_t>(box.y) + box.h <= height;
}

std::size_t SegMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

const SegMask* FrameAnnotation::mask_for(ArtefactClass cls) const {
  for (const auto& m : masks) {
    if (m.cls == cls) return &m;
  }
  return nullptr;
}

void validate_detection(const Detection& d, std::uint32_t width, std::uint32_t height) {
  if (!bbox_inside(d.bbox, width, height)) {
    throw Error(ErrorCode::ValidationError,
                std::string(to_string(d.cls)) + " bbox [" + std::to_string(d.bbox.x) + "," +
                    std::to_string(d.bbox.y) + "," + std::to_string(d.bbox.w) + "," +
                    std::to_string(d.bbox.h) + "] is outside the frame");
  }
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw Error(ErrorCode::ValidationError, "confidence outside [0,1]");
  }
}

}  // namespace lusview
