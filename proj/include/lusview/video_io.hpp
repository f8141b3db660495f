#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lusview/core.hpp"

namespace lusview {

struct DecoderConfig {
  /// Shell command template with {input} and {outdir} placeholders. The command
  /// must write zero-padded PNG frames into {outdir}.
  std::optional<std::string> external_decoder_cmd;
  std::size_t max_frames = 2000;
  std::size_t max_pixels_per_frame = 4'000'000;
};

inline constexpr Rational kDefaultFps{20, 1};

enum class ContainerFormat { Y4m, PngZip, MjpegAvi, Unknown };

ContainerFormat sniff_format(std::span<const std::uint8_t> bytes);

/// Decodes Y4M, zip-of-PNG or MJPEG-AVI by content sniffing; anything else goes
/// to the external decoder when one is configured.
FrameSequence decode(std::span<const std::uint8_t> bytes, const std::string& filename,
                     const DecoderConfig& cfg);

FrameSequence decode_y4m(std::span<const std::uint8_t> bytes, const std::string& filename,
                         const DecoderConfig& cfg);
FrameSequence decode_png_zip(std::span<const std::uint8_t> bytes, const std::string& filename,
                             const DecoderConfig& cfg);
FrameSequence decode_mjpeg_avi(std::span<const std::uint8_t> bytes, const std::string& filename,
                               const DecoderConfig& cfg);

/// 4:2:0 Y4M with constant 128 chroma.
std::vector<std::uint8_t> encode_y4m(const FrameSequence& seq);

/// MJPEG-in-AVI, one baseline JPEG per frame, header rate = round(fps).
std::vector<std::uint8_t> encode_video(const FrameSequence& seq);
std::vector<std::uint8_t> encode_video(std::span<const ColorFrame> frames, Rational fps);

/// Lossless PNG of a single frame.
std::vector<std::uint8_t> encode_png(const Frame& frame);
std::vector<std::uint8_t> encode_png(const ColorFrame& frame);

}  // namespace lusview
