#include "lusview/codec.hpp"

#include <jpeglib.h>
#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>

namespace lusview::codec {
namespace {

std::vector<std::uint8_t> write_png(std::uint32_t width, std::uint32_t height, png_uint_32 format,
                                    const std::uint8_t* pixels) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = width;
  image.height = height;
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw Error(ErrorCode::IoError, std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw Error(ErrorCode::IoError, std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

struct DecodedPng {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  bool color = false;
  std::vector<std::uint8_t> data;  // gray or rgb
};

DecodedPng read_png(std::span<const std::uint8_t> bytes, std::size_t max_pixels, bool force_rgb) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::CorruptStream, std::string("png decode: ") + image.message);
  }
  if (std::size_t{image.width} * image.height > max_pixels) {
    png_image_free(&image);
    throw Error(ErrorCode::LimitExceeded, "png decode: image exceeds pixel cap");
  }
  DecodedPng out;
  out.width = image.width;
  out.height = image.height;
  out.color = force_rgb || (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = out.color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  out.data.resize(PNG_IMAGE_SIZE(image));
  png_color black{0, 0, 0};
  if (!png_image_finish_read(&image, &black, out.data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::CorruptStream, "png decode: " + msg);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, mgr->message);
  std::longjmp(mgr->jump, 1);
}

void jpeg_silent(j_common_ptr, int) {}

// Returns false and fills err on failure. No C++ objects with destructors
// live between setjmp and the longjmp target.
bool jpeg_compress_raw(const std::uint8_t* pixels, std::uint32_t width, std::uint32_t height,
                       int components, int quality, unsigned char** out, unsigned long* out_size,
                       char* err) {
  jpeg_compress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    std::strncpy(err, jerr.message, JMSG_LENGTH_MAX);
    jpeg_destroy_compress(&cinfo);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, out, out_size);
  cinfo.image_width = width;
  cinfo.image_height = height;
  cinfo.input_components = components;
  cinfo.in_color_space = components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  cinfo.optimize_coding = FALSE;
  cinfo.dct_method = JDCT_ISLOW;
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = std::size_t{width} * components;
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(pixels + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  return true;
}

std::vector<std::uint8_t> compress(const std::uint8_t* pixels, std::uint32_t width,
                                   std::uint32_t height, int components, int quality) {
  unsigned char* buf = nullptr;
  unsigned long size = 0;
  char err[JMSG_LENGTH_MAX] = {0};
  const bool ok = jpeg_compress_raw(pixels, width, height, components, quality, &buf, &size, err);
  std::vector<std::uint8_t> out;
  if (ok) out.assign(buf, buf + size);
  std::free(buf);
  if (!ok) throw Error(ErrorCode::IoError, std::string("jpeg encode: ") + err);
  return out;
}

bool jpeg_decompress_raw(const std::uint8_t* data, std::size_t size, std::size_t max_pixels,
                         std::uint8_t** out, std::uint32_t* width, std::uint32_t* height,
                         char* err) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager jerr;
  *out = nullptr;
  cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = jpeg_error_exit;
  jerr.base.emit_message = jpeg_silent;
  if (setjmp(jerr.jump)) {
    std::strncpy(err, jerr.message, JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    std::free(*out);
    *out = nullptr;
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data, static_cast<unsigned long>(size));
  jpeg_read_header(&cinfo, TRUE);
  if (std::size_t{cinfo.image_width} * cinfo.image_height > max_pixels) {
    std::strncpy(err, "LIMIT", JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  cinfo.out_color_space = JCS_GRAYSCALE;
  cinfo.dct_method = JDCT_ISLOW;
  jpeg_start_decompress(&cinfo);
  *width = cinfo.output_width;
  *height = cinfo.output_height;
  *out = static_cast<std::uint8_t*>(std::malloc(std::size_t{*width} * *height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = *out + std::size_t{cinfo.output_scanline} * *width;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

}  // namespace

bool looks_like_png(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kSig, 8) == 0;
}

std::vector<std::uint8_t> encode_png(const Frame& frame) {
  return write_png(frame.width(), frame.height(), PNG_FORMAT_GRAY, frame.pixels().data());
}

std::vector<std::uint8_t> encode_png(const ColorFrame& frame) {
  return write_png(frame.width(), frame.height(), PNG_FORMAT_RGB, frame.data().data());
}

Frame decode_png(std::span<const std::uint8_t> bytes, std::size_t max_pixels) {
  DecodedPng png = read_png(bytes, max_pixels, false);
  if (png.color) return to_grayscale(ColorFrame(png.width, png.height, std::move(png.data)));
  return Frame(png.width, png.height, std::move(png.data));
}

ColorFrame decode_png_rgb(std::span<const std::uint8_t> bytes, std::size_t max_pixels) {
  DecodedPng png = read_png(bytes, max_pixels, true);
  return ColorFrame(png.width, png.height, std::move(png.data));
}

std::vector<std::uint8_t> encode_jpeg(const Frame& frame, int quality) {
  return compress(frame.pixels().data(), frame.width(), frame.height(), 1, quality);
}

std::vector<std::uint8_t> encode_jpeg(const ColorFrame& frame, int quality) {
  return compress(frame.data().data(), frame.width(), frame.height(), 3, quality);
}

Frame decode_jpeg_gray(std::span<const std::uint8_t> bytes, std::size_t max_pixels) {
  std::uint8_t* raw = nullptr;
  std::uint32_t w = 0, h = 0;
  char err[JMSG_LENGTH_MAX] = {0};
  if (!jpeg_decompress_raw(bytes.data(), bytes.size(), max_pixels, &raw, &w, &h, err)) {
    if (std::strcmp(err, "LIMIT") == 0) {
      throw Error(ErrorCode::LimitExceeded, "jpeg decode: image exceeds pixel cap");
    }
    throw Error(ErrorCode::CorruptStream, std::string("jpeg decode: ") + err);
  }
  std::vector<std::uint8_t> pixels(raw, raw + std::size_t{w} * h);
  std::free(raw);
  return Frame(w, h, std::move(pixels));
}

}  // namespace lusview::codec
