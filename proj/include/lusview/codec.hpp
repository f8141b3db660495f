#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lusview/core.hpp"

namespace lusview::codec {

std::vector<std::uint8_t> encode_png(const Frame& frame);
std::vector<std::uint8_t> encode_png(const ColorFrame& frame);

/// Color PNGs are converted with to_grayscale; alpha is composited on black.
Frame decode_png(std::span<const std::uint8_t> bytes, std::size_t max_pixels);
ColorFrame decode_png_rgb(std::span<const std::uint8_t> bytes, std::size_t max_pixels);

bool looks_like_png(std::span<const std::uint8_t> bytes);

inline constexpr int kJpegQuality = 90;

/// Baseline JPEG. Gray frames are written single-component.
std::vector<std::uint8_t> encode_jpeg(const Frame& frame, int quality = kJpegQuality);
std::vector<std::uint8_t> encode_jpeg(const ColorFrame& frame, int quality = kJpegQuality);

/// Decodes to the luma channel.
Frame decode_jpeg_gray(std::span<const std::uint8_t> bytes, std::size_t max_pixels);

}  // namespace lusview::codec
