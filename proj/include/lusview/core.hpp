#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lusview/error.hpp"

namespace lusview {

inline constexpr std::uint32_t kMinFrameDim = 32;

struct Rational {
  std::int64_t num = 20;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

/// Throws InvalidParams unless num > 0 and den > 0; returns the reduced form.
Rational make_rational(std::int64_t num, std::int64_t den);

/// Grayscale 8-bit frame. Immutable after construction.
class Frame {
 public:
  Frame(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> pixels,
        std::uint32_t index = 0, std::int64_t timestamp_ms = 0);

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::uint32_t index() const { return index_; }
  std::int64_t timestamp_ms() const { return timestamp_ms_; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::uint8_t at(std::uint32_t x, std::uint32_t y) const { return pixels_[std::size_t{y} * width_ + x]; }

  /// Same pixels, new position in a sequence.
  Frame with_position(std::uint32_t index, std::int64_t timestamp_ms) const;

  bool operator==(const Frame&) const = default;

 private:
  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<std::uint8_t> pixels_;
  std::uint32_t index_;
  std::int64_t timestamp_ms_;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// Interleaved RGB 8-bit image, used for color ingest and rendered output.
class ColorFrame {
 public:
  ColorFrame(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> rgb);
  ColorFrame(std::uint32_t width, std::uint32_t height, Rgb fill = {});

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::span<const std::uint8_t> data() const { return rgb_; }

  Rgb at(std::uint32_t x, std::uint32_t y) const {
    const std::size_t o = (std::size_t{y} * width_ + x) * 3;
    return {rgb_[o], rgb_[o + 1], rgb_[o + 2]};
  }
  void set(std::uint32_t x, std::uint32_t y, Rgb c) {
    const std::size_t o = (std::size_t{y} * width_ + x) * 3;
    rgb_[o] = c.r;
    rgb_[o + 1] = c.g;
    rgb_[o + 2] = c.b;
  }

  bool operator==(const ColorFrame&) const = default;

 private:
  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<std::uint8_t> rgb_;
};

/// Luma y = round(0.299 R + 0.587 G + 0.114 B). Throws InvalidGeometry below 32x32.
Frame to_grayscale(const ColorFrame& color, std::uint32_t index = 0, std::int64_t timestamp_ms = 0);

/// Gray frame promoted to RGB (r = g = b).
ColorFrame to_color(const Frame& frame);

class FrameSequence {
 public:
  FrameSequence(std::vector<Frame> frames, Rational fps, std::string source_name);

  /// Renumbers frames 0..N-1 and derives timestamps from fps.
  static FrameSequence from_images(std::vector<Frame> frames, Rational fps, std::string source_name);

  const std::vector<Frame>& frames() const { return frames_; }
  std::size_t size() const { return frames_.size(); }
  const Frame& operator[](std::size_t i) const { return frames_[i]; }
  Rational fps() const { return fps_; }
  const std::string& source_name() const { return source_name_; }
  std::uint32_t width() const { return frames_.front().width(); }
  std::uint32_t height() const { return frames_.front().height(); }

 private:
  std::vector<Frame> frames_;
  Rational fps_;
  std::string source_name_;
};

std::int64_t timestamp_for(std::uint32_t index, Rational fps);

enum class ArtefactClass { ALine, BLine, Consolidation, Pleura, Rib, Shadow };

inline constexpr std::array<ArtefactClass, 6> kAllClasses = {
    ArtefactClass::ALine, ArtefactClass::BLine, ArtefactClass::Consolidation,
    ArtefactClass::Pleura, ArtefactClass::Rib,   ArtefactClass::Shadow};

std::string_view to_string(ArtefactClass cls);
std::optional<ArtefactClass> parse_artefact_class(std::string_view name);

struct BBox {
  int x = 0, y = 0, w = 0, h = 0;

  int right() const { return x + w; }   // exclusive
  int bottom() const { return y + h; }  // exclusive
  bool operator==(const BBox&) const = default;
};

double iou(const BBox& a, const BBox& b);
bool bbox_inside(const BBox& box, std::uint32_t width, std::uint32_t height);

struct Detection {
  ArtefactClass cls = ArtefactClass::Pleura;
  BBox bbox;
  double confidence = 0.0;

  bool operator==(const Detection&) const = default;
};

/// Per-class binary mask with the frame's geometry; one byte per pixel, 0 or 1.
struct SegMask {
  ArtefactClass cls = ArtefactClass::Pleura;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> bits;

  SegMask() = default;
  SegMask(ArtefactClass c, std::uint32_t w, std::uint32_t h)
      : cls(c), width(w), height(h), bits(std::size_t{w} * h, 0) {}

  bool test(std::uint32_t x, std::uint32_t y) const { return bits[std::size_t{y} * width + x] != 0; }
  void mark(std::uint32_t x, std::uint32_t y) { bits[std::size_t{y} * width + x] = 1; }
  std::size_t count() const;

  bool operator==(const SegMask&) const = default;
};

struct FrameAnnotation {
  std::uint32_t frame_index = 0;
  std::vector<Detection> detections;
  std::vector<SegMask> masks;
  bool abnormal = false;

  const SegMask* mask_for(ArtefactClass cls) const;
  bool operator==(const FrameAnnotation&) const = default;
};

/// Checks bbox bounds, confidence range and w, h >= 1. Throws ValidationError.
void validate_detection(const Detection& d, std::uint32_t width, std::uint32_t height);

}  // namespace lusview
