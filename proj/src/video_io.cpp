#include "lusview/video_io.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string_view>

#include "lusview/codec.hpp"
#include "lusview/zip.hpp"

namespace fs = std::filesystem;

namespace lusview {
namespace {

bool starts_with(std::span<const std::uint8_t> b, std::string_view magic, std::size_t at = 0) {
  return b.size() >= at + magic.size() && std::memcmp(b.data() + at, magic.data(), magic.size()) == 0;
}

void check_frame_caps(std::size_t frames, std::uint64_t pixels, const DecoderConfig& cfg) {
  if (frames > cfg.max_frames) {
    throw Error(ErrorCode::LimitExceeded,
                "video has more than " + std::to_string(cfg.max_frames) + " frames");
  }
  if (pixels > cfg.max_pixels_per_frame) {
    throw Error(ErrorCode::LimitExceeded,
                "frame size exceeds " + std::to_string(cfg.max_pixels_per_frame) + " pixels");
  }
}

// ---------------------------------------------------------------- Y4M

std::int64_t parse_int(std::string_view s, std::string_view what) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error(ErrorCode::CorruptStream, "y4m: bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

struct Y4mHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  Rational fps = kDefaultFps;
  std::size_t chroma_bytes = 0;
};

Y4mHeader parse_y4m_header(std::string_view line) {
  Y4mHeader hdr;
  bool have_w = false, have_h = false;
  std::string colorspace = "420jpeg";
  std::size_t pos = 0;
  while (pos < line.size()) {
    const std::size_t end = std::min(line.find(' ', pos), line.size());
    const std::string_view tok = line.substr(pos, end - pos);
    pos = end + 1;
    if (tok.empty()) continue;
    const std::string_view val = tok.substr(1);
    switch (tok[0]) {
      case 'W': hdr.width = static_cast<std::uint32_t>(parse_int(val, "width")); have_w = true; break;
      case 'H': hdr.height = static_cast<std::uint32_t>(parse_int(val, "height")); have_h = true; break;
      case 'F': {
        const auto colon = val.find(':');
        if (colon == std::string_view::npos) throw Error(ErrorCode::CorruptStream, "y4m: bad frame rate");
        const auto num = parse_int(val.substr(0, colon), "frame rate");
        const auto den = parse_int(val.substr(colon + 1), "frame rate");
        if (num > 0 && den > 0) hdr.fps = make_rational(num, den);
        break;
      }
      case 'C': colorspace = std::string(val); break;
      default: break;  // I, A, X carry nothing we need.
    }
  }
  if (!have_w || !have_h || hdr.width == 0 || hdr.height == 0) {
    throw Error(ErrorCode::CorruptStream, "y4m: header lacks W/H");
  }
  const std::size_t cw = (hdr.width + 1) / 2, ch = (hdr.height + 1) / 2;
  const std::size_t luma = std::size_t{hdr.width} * hdr.height;
  if (colorspace == "420" || colorspace == "420jpeg" || colorspace == "420paldv" || colorspace == "420mpeg2") {
    hdr.chroma_bytes = 2 * cw * ch;
  } else if (colorspace == "422") {
    hdr.chroma_bytes = 2 * cw * hdr.height;
  } else if (colorspace == "444") {
    hdr.chroma_bytes = 2 * luma;
  } else if (colorspace == "mono") {
    hdr.chroma_bytes = 0;
  } else {
    throw Error(ErrorCode::UnsupportedFormat, "y4m: unsupported colorspace C" + colorspace);
  }
  return hdr;
}

// ---------------------------------------------------------------- AVI

std::uint32_t rd32(std::span<const std::uint8_t> b, std::size_t off) {
  if (off + 4 > b.size()) throw Error(ErrorCode::CorruptStream, "avi: truncated chunk");
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::string_view fourcc_at(std::span<const std::uint8_t> b, std::size_t off) {
  if (off + 4 > b.size()) throw Error(ErrorCode::CorruptStream, "avi: truncated chunk");
  return {reinterpret_cast<const char*>(b.data() + off), 4};
}

struct AviState {
  Rational fps = kDefaultFps;
  bool have_video_stream = false;
  std::vector<std::span<const std::uint8_t>> frames;
};

void walk_avi(std::span<const std::uint8_t> b, std::size_t begin, std::size_t end, AviState& st,
              const DecoderConfig& cfg, int depth) {
  if (depth > 8) throw Error(ErrorCode::CorruptStream, "avi: chunk nesting too deep");
  std::size_t pos = begin;
  while (pos + 8 <= end) {
    const std::string_view id = fourcc_at(b, pos);
    const std::uint32_t size = rd32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > end) throw Error(ErrorCode::CorruptStream, "avi: chunk overruns its parent");
    if (id == "LIST") {
      if (size < 4) throw Error(ErrorCode::CorruptStream, "avi: short LIST");
      walk_avi(b, body + 4, body + size, st, cfg, depth + 1);
    } else if (id == "strh" && size >= 32 && !st.have_video_stream) {
      if (fourcc_at(b, body) == "vids") {
        st.have_video_stream = true;
        const std::uint32_t scale = rd32(b, body + 20);
        const std::uint32_t rate = rd32(b, body + 24);
        if (scale > 0 && rate > 0) st.fps = make_rational(rate, scale);
      }
    } else if (id.size() == 4 && id.substr(0, 2) == "00" && (id.substr(2) == "dc" || id.substr(2) == "db")) {
      if (size > 0) {
        st.frames.push_back(b.subspan(body, size));
        if (st.frames.size() > cfg.max_frames) check_frame_caps(st.frames.size(), 0, cfg);
      }
    }
    pos = body + size + (size & 1);
  }
}

// ---------------------------------------------------------------- AVI writer

void put16(std::vector<std::uint8_t>& o, std::uint16_t v) {
  o.push_back(static_cast<std::uint8_t>(v));
  o.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& o, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) o.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_fourcc(std::vector<std::uint8_t>& o, std::string_view cc) { o.insert(o.end(), cc.begin(), cc.end()); }
void patch32(std::vector<std::uint8_t>& o, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) o[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::vector<std::uint8_t> write_avi(const std::vector<std::vector<std::uint8_t>>& jpegs,
                                    std::uint32_t width, std::uint32_t height, Rational fps) {
  const auto rate = static_cast<std::uint32_t>(std::max<long long>(1, std::llround(fps.value())));
  std::size_t max_frame = 0;
  for (const auto& j : jpegs) max_frame = std::max(max_frame, j.size());
  const auto n = static_cast<std::uint32_t>(jpegs.size());

  std::vector<std::uint8_t> o;
  put_fourcc(o, "RIFF");
  put32(o, 0);
  put_fourcc(o, "AVI ");

  put_fourcc(o, "LIST");
  const std::size_t hdrl_size_at = o.size();
  put32(o, 0);
  put_fourcc(o, "hdrl");
  put_fourcc(o, "avih");
  put32(o, 56);
  put32(o, static_cast<std::uint32_t>(1000000 / rate));  // dwMicroSecPerFrame
  put32(o, static_cast<std::uint32_t>(max_frame * rate));  // dwMaxBytesPerSec
  put32(o, 0);                                          // dwPaddingGranularity
  put32(o, 0x10);                                       // AVIF_HASINDEX
  put32(o, n);
  put32(o, 0);
  put32(o, 1);  // streams
  put32(o, static_cast<std::uint32_t>(max_frame));
  put32(o, width);
  put32(o, height);
  for (int i = 0; i < 4; ++i) put32(o, 0);

  put_fourcc(o, "LIST");
  const std::size_t strl_size_at = o.size();
  put32(o, 0);
  put_fourcc(o, "strl");
  put_fourcc(o, "strh");
  put32(o, 56);
  put_fourcc(o, "vids");
  put_fourcc(o, "MJPG");
  put32(o, 0);  // flags
  put16(o, 0);  // priority
  put16(o, 0);  // language
  put32(o, 0);  // initial frames
  put32(o, 1);  // scale
  put32(o, rate);
  put32(o, 0);  // start
  put32(o, n);  // length
  put32(o, static_cast<std::uint32_t>(max_frame));
  put32(o, 0xFFFFFFFFu);  // quality
  put32(o, 0);            // sample size
  put16(o, 0);
  put16(o, 0);
  put16(o, static_cast<std::uint16_t>(width));
  put16(o, static_cast<std::uint16_t>(height));
  put_fourcc(o, "strf");
  put32(o, 40);
  put32(o, 40);
  put32(o, width);
  put32(o, height);
  put16(o, 1);
  put16(o, 24);
  put_fourcc(o, "MJPG");
  put32(o, width * height * 3);
  put32(o, 0);
  put32(o, 0);
  put32(o, 0);
  put32(o, 0);
  patch32(o, strl_size_at, static_cast<std::uint32_t>(o.size() - strl_size_at - 4));
  patch32(o, hdrl_size_at, static_cast<std::uint32_t>(o.size() - hdrl_size_at - 4));

  put_fourcc(o, "LIST");
  const std::size_t movi_size_at = o.size();
  put32(o, 0);
  const std::size_t movi_fourcc_at = o.size();
  put_fourcc(o, "movi");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> index;
  for (const auto& j : jpegs) {
    index.emplace_back(static_cast<std::uint32_t>(o.size() - movi_fourcc_at),
                       static_cast<std::uint32_t>(j.size()));
    put_fourcc(o, "00dc");
    put32(o, static_cast<std::uint32_t>(j.size()));
    o.insert(o.end(), j.begin(), j.end());
    if (j.size() & 1) o.push_back(0);
  }
  patch32(o, movi_size_at, static_cast<std::uint32_t>(o.size() - movi_size_at - 4));

  put_fourcc(o, "idx1");
  put32(o, static_cast<std::uint32_t>(index.size() * 16));
  for (const auto& [offset, size] : index) {
    put_fourcc(o, "00dc");
    put32(o, 0x10);  // AVIIF_KEYFRAME
    put32(o, offset);
    put32(o, size);
  }
  patch32(o, 4, static_cast<std::uint32_t>(o.size() - 8));
  return o;
}

// ---------------------------------------------------------------- external

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

std::string substitute(std::string tmpl, const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = tmpl.find(key, pos)) != std::string::npos) {
    tmpl.replace(pos, key.size(), value);
    pos += value.size();
  }
  return tmpl;
}

std::mutex& external_decoder_mutex() {
  static std::mutex m;
  return m;
}

FrameSequence frames_from_pngs(std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files,
                               const std::string& filename, const DecoderConfig& cfg) {
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (files.empty()) throw Error(ErrorCode::CorruptStream, "frame bundle holds no frames");
  check_frame_caps(files.size(), 0, cfg);
  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (const auto& [name, data] : files) {
    if (!codec::looks_like_png(data)) {
      throw Error(ErrorCode::CorruptStream, "frame bundle entry '" + name + "' is not a PNG");
    }
    Frame f = codec::decode_png(data, cfg.max_pixels_per_frame);
    if (!frames.empty() && (f.width() != frames[0].width() || f.height() != frames[0].height())) {
      throw Error(ErrorCode::CorruptStream, "frame bundle entry '" + name + "' has geometry " +
                                                std::to_string(f.width()) + "x" +
                                                std::to_string(f.height()) + ", expected " +
                                                std::to_string(frames[0].width()) + "x" +
                                                std::to_string(frames[0].height()));
    }
    frames.push_back(std::move(f));
  }
  return FrameSequence::from_images(std::move(frames), kDefaultFps, filename);
}

FrameSequence decode_external(std::span<const std::uint8_t> bytes, const std::string& filename,
                              const DecoderConfig& cfg) {
  std::lock_guard lock(external_decoder_mutex());
  std::string tmpl = (fs::temp_directory_path() / "lusview-XXXXXX").string();
  if (::mkdtemp(tmpl.data()) == nullptr) throw Error(ErrorCode::IoError, "cannot create temp directory");
  const fs::path work(tmpl);
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } cleanup{work};

  const std::string ext = fs::path(filename).extension().string();
  const fs::path input = work / ("input" + ext);
  const fs::path outdir = work / "frames";
  fs::create_directory(outdir);
  {
    std::ofstream f(input, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error(ErrorCode::IoError, "cannot stage upload for external decoder");
  }
  std::string cmd = substitute(*cfg.external_decoder_cmd, "{input}", shell_quote(input.string()));
  cmd = substitute(cmd, "{outdir}", shell_quote(outdir.string()));
  const int rc = std::system(cmd.c_str());
  if (rc != 0) {
    const int status = (rc != -1 && WIFEXITED(rc)) ? WEXITSTATUS(rc) : rc;
    throw Error(ErrorCode::CorruptStream, "external decoder exited with status " + std::to_string(status));
  }

  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files;
  for (const auto& entry : fs::directory_iterator(outdir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    if (files.size() >= cfg.max_frames) check_frame_caps(files.size() + 1, 0, cfg);
    std::ifstream f(entry.path(), std::ios::binary);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    files.emplace_back(entry.path().filename().string(), std::move(data));
  }
  return frames_from_pngs(std::move(files), filename, cfg);
}

}  // namespace

ContainerFormat sniff_format(std::span<const std::uint8_t> bytes) {
  if (starts_with(bytes, "YUV4MPEG2 ")) return ContainerFormat::Y4m;
  if (starts_with(bytes, "PK\x03\x04") || starts_with(bytes, "PK\x05\x06")) return ContainerFormat::PngZip;
  if (starts_with(bytes, "RIFF") && starts_with(bytes, "AVI ", 8)) return ContainerFormat::MjpegAvi;
  return ContainerFormat::Unknown;
}

FrameSequence decode(std::span<const std::uint8_t> bytes, const std::string& filename,
                     const DecoderConfig& cfg) {
  switch (sniff_format(bytes)) {
    case ContainerFormat::Y4m: return decode_y4m(bytes, filename, cfg);
    case ContainerFormat::PngZip: return decode_png_zip(bytes, filename, cfg);
    case ContainerFormat::MjpegAvi: return decode_mjpeg_avi(bytes, filename, cfg);
    case ContainerFormat::Unknown: break;
  }
  if (cfg.external_decoder_cmd && !cfg.external_decoder_cmd->empty()) {
    return decode_external(bytes, filename, cfg);
  }
  throw Error(ErrorCode::UnsupportedFormat,
              "'" + filename + "' is not Y4M, PNG zip or MJPEG AVI and no external decoder is configured");
}

FrameSequence decode_y4m(std::span<const std::uint8_t> bytes, const std::string& filename,
                         const DecoderConfig& cfg) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const std::size_t eol = text.find('\n');
  if (eol == std::string_view::npos || eol > 4096) throw Error(ErrorCode::CorruptStream, "y4m: no header line");
  const Y4mHeader hdr = parse_y4m_header(text.substr(10, eol - 10));
  const std::uint64_t luma = std::uint64_t{hdr.width} * hdr.height;
  check_frame_caps(0, luma, cfg);
  const std::size_t payload = luma + hdr.chroma_bytes;

  std::vector<Frame> frames;
  std::size_t pos = eol + 1;
  while (pos < bytes.size()) {
    if (text.compare(pos, 5, "FRAME") != 0) throw Error(ErrorCode::CorruptStream, "y4m: expected FRAME marker");
    const std::size_t fe = text.find('\n', pos);
    if (fe == std::string_view::npos || fe - pos > 1024) throw Error(ErrorCode::CorruptStream, "y4m: bad FRAME line");
    pos = fe + 1;
    if (bytes.size() - pos < payload) {
      throw Error(ErrorCode::CorruptStream, "y4m: frame " + std::to_string(frames.size()) + " is truncated");
    }
    check_frame_caps(frames.size() + 1, luma, cfg);
    std::vector<std::uint8_t> y(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                bytes.begin() + static_cast<std::ptrdiff_t>(pos + luma));
    const auto idx = static_cast<std::uint32_t>(frames.size());
    frames.emplace_back(hdr.width, hdr.height, std::move(y), idx, timestamp_for(idx, hdr.fps));
    pos += payload;
  }
  if (frames.empty()) throw Error(ErrorCode::CorruptStream, "y4m: no frames");
  return FrameSequence(std::move(frames), hdr.fps, filename);
}

FrameSequence decode_png_zip(std::span<const std::uint8_t> bytes, const std::string& filename,
                             const DecoderConfig& cfg) {
  const std::size_t budget = (cfg.max_frames + 1) * (cfg.max_pixels_per_frame * 4 + 4096);
  std::vector<zip::Entry> entries = zip::read(bytes, budget);
  check_frame_caps(entries.size(), 0, cfg);
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files;
  files.reserve(entries.size());
  for (auto& e : entries) files.emplace_back(std::move(e.name), std::move(e.data));
  return frames_from_pngs(std::move(files), filename, cfg);
}

FrameSequence decode_mjpeg_avi(std::span<const std::uint8_t> bytes, const std::string& filename,
                               const DecoderConfig& cfg) {
  const std::uint32_t riff_size = rd32(bytes, 4);
  const std::size_t end = std::min<std::size_t>(bytes.size(), std::size_t{riff_size} + 8);
  AviState st;
  walk_avi(bytes, 12, end, st, cfg, 0);
  if (!st.have_video_stream) throw Error(ErrorCode::CorruptStream, "avi: no video stream header");
  if (st.frames.empty()) throw Error(ErrorCode::CorruptStream, "avi: no frames");
  check_frame_caps(st.frames.size(), 0, cfg);
  std::vector<Frame> frames;
  frames.reserve(st.frames.size());
  for (const auto& chunk : st.frames) {
    if (chunk.size() < 2 || chunk[0] != 0xFF || chunk[1] != 0xD8) {
      throw Error(ErrorCode::UnsupportedFormat, "avi: video stream is not MJPEG");
    }
    Frame f = codec::decode_jpeg_gray(chunk, cfg.max_pixels_per_frame);
    if (!frames.empty() && (f.width() != frames[0].width() || f.height() != frames[0].height())) {
      throw Error(ErrorCode::CorruptStream, "avi: frame geometry changes mid-stream");
    }
    frames.push_back(std::move(f));
  }
  return FrameSequence::from_images(std::move(frames), st.fps, filename);
}

std::vector<std::uint8_t> encode_y4m(const FrameSequence& seq) {
  const std::uint32_t w = seq.width(), h = seq.height();
  const std::string header = "YUV4MPEG2 W" + std::to_string(w) + " H" + std::to_string(h) + " F" +
                             std::to_string(seq.fps().num) + ":" + std::to_string(seq.fps().den) +
                             " Ip A1:1 C420jpeg\n";
  const std::size_t chroma = 2 * std::size_t{(w + 1) / 2} * ((h + 1) / 2);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + seq.size() * (6 + std::size_t{w} * h + chroma));
  for (const Frame& f : seq.frames()) {
    static constexpr std::string_view kFrame = "FRAME\n";
    out.insert(out.end(), kFrame.begin(), kFrame.end());
    out.insert(out.end(), f.pixels().begin(), f.pixels().end());
    out.insert(out.end(), chroma, std::uint8_t{128});
  }
  return out;
}

std::vector<std::uint8_t> encode_video(const FrameSequence& seq) {
  std::vector<std::vector<std::uint8_t>> jpegs;
  jpegs.reserve(seq.size());
  for (const Frame& f : seq.frames()) jpegs.push_back(codec::encode_jpeg(f));
  return write_avi(jpegs, seq.width(), seq.height(), seq.fps());
}

std::vector<std::uint8_t> encode_video(std::span<const ColorFrame> frames, Rational fps) {
  if (frames.empty()) throw Error(ErrorCode::EmptySequence, "cannot encode an empty video");
  std::vector<std::vector<std::uint8_t>> jpegs;
  jpegs.reserve(frames.size());
  for (const ColorFrame& f : frames) {
    if (f.width() != frames[0].width() || f.height() != frames[0].height()) {
      throw Error(ErrorCode::GeometryMismatch, "video frames must share geometry");
    }
    jpegs.push_back(codec::encode_jpeg(f));
  }
  return write_avi(jpegs, frames[0].width(), frames[0].height(), fps);
}

std::vector<std::uint8_t> encode_png(const Frame& frame) { return codec::encode_png(frame); }
std::vector<std::uint8_t> encode_png(const ColorFrame& frame) { return codec::encode_png(frame); }

}  // namespace lusview
