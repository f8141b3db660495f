#include <doctest.h>

#include <algorithm>
#include <cstring>

#include "lusview/codec.hpp"
#include "lusview/video_io.hpp"
#include "lusview/zip.hpp"
#include "test_util.hpp"

using namespace lusview;
using namespace lusview::testing;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

std::vector<std::uint8_t> hand_built_y4m(std::uint32_t w, std::uint32_t h, int frames, const std::string& extra = "") {
  std::string s = "YUV4MPEG2 W" + std::to_string(w) + " H" + std::to_string(h) + " F20:1" + extra + "\n";
  const std::size_t chroma = 2 * ((w + 1) / 2) * ((h + 1) / 2);
  for (int f = 0; f < frames; ++f) {
    s += "FRAME\n";
    for (std::size_t i = 0; i < std::size_t{w} * h; ++i) s += static_cast<char>((i + 17 * f) % 256);
    s += std::string(chroma, static_cast<char>(128));
  }
  return bytes_of(s);
}

Frame gradient(std::uint32_t w, std::uint32_t h) {
  return frame_from(w, h, [&](std::uint32_t x, std::uint32_t y) { return (x * 255 / (w - 1) + y) % 256; });
}

}  // namespace

TEST_CASE("Y4M header fields are copied verbatim") {
  const auto seq = decode(hand_built_y4m(64, 48, 3), "clip.y4m", {});
  CHECK(seq.size() == 3);
  CHECK(seq.width() == 64);
  CHECK(seq.height() == 48);
  CHECK(seq.fps() == Rational{20, 1});
  CHECK(seq[2].at(1, 0) == (1 + 34) % 256);
  CHECK(seq.source_name() == "clip.y4m");
}

TEST_CASE("Y4M frame rate defaults to 20 when absent and honours other rates") {
  std::string s = "YUV4MPEG2 W32 H32 Cmono\nFRAME\n" + std::string(32 * 32, 'a');
  CHECK(decode(bytes_of(s), "m.y4m", {}).fps() == Rational{20, 1});
  s = "YUV4MPEG2 W32 H32 F30000:1001 Cmono\nFRAME\n" + std::string(32 * 32, 'a');
  CHECK(decode(bytes_of(s), "m.y4m", {}).fps() == Rational{30000, 1001});
}

TEST_CASE("Y4M accepts 4:2:2, 4:4:4 and frame parameters; rejects truncation and high bit depth") {
  std::string s = "YUV4MPEG2 W32 H32 C444\nFRAME Ixyz\n" + std::string(3 * 32 * 32, 'b');
  CHECK(decode(bytes_of(s), "a.y4m", {}).size() == 1);
  s = "YUV4MPEG2 W32 H32 C422\nFRAME\n" + std::string(2 * 32 * 32, 'b');
  CHECK(decode(bytes_of(s), "a.y4m", {}).size() == 1);
  auto y = hand_built_y4m(64, 48, 2);
  y.pop_back();
  CHECK(code_of([&] { decode(y, "t.y4m", {}); }) == ErrorCode::CorruptStream);
  s = "YUV4MPEG2 W32 H32 C420p10\nFRAME\n" + std::string(3 * 32 * 32, 'b');
  CHECK(code_of([&] { decode(bytes_of(s), "a.y4m", {}); }) == ErrorCode::UnsupportedFormat);
  CHECK(code_of([&] { decode(bytes_of("YUV4MPEG2 H32\n"), "a.y4m", {}); }) == ErrorCode::CorruptStream);
}

TEST_CASE("Y4M round trip is lossless for 8-bit grey content") {
  Xorshift64Star rng(5);
  std::vector<Frame> frames;
  for (std::uint32_t i = 0; i < 4; ++i) frames.push_back(random_frame(48, 40, rng, i));
  const FrameSequence seq(frames, {25, 1}, "r.y4m");
  const auto bytes = encode_y4m(seq);
  const auto back = decode(bytes, "r.y4m", {});
  REQUIRE(back.size() == 4);
  CHECK(back.fps() == Rational{25, 1});
  for (std::size_t i = 0; i < 4; ++i) CHECK(back[i].pixels().size() == seq[i].pixels().size());
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::equal(back[i].pixels().begin(), back[i].pixels().end(),
                                                        seq[i].pixels().begin()));
  CHECK(encode_y4m(back) == bytes);
}

TEST_CASE("PNG zip bundles decode in lexicographic order") {
  std::vector<zip::Entry> entries;
  for (int i = 9; i >= 0; --i) {
    char name[16];
    std::snprintf(name, sizeof name, "%03d.png", i);
    entries.push_back({name, encode_png(filled_frame(64, 48, static_cast<std::uint8_t>(i * 10)))});
  }
  const auto seq = decode(zip::write(entries), "frames.zip", {});
  REQUIRE(seq.size() == 10);
  CHECK(seq.width() == 64);
  CHECK(seq.height() == 48);
  for (std::uint32_t i = 0; i < 10; ++i) CHECK(seq[i].at(0, 0) == i * 10);
  CHECK(seq.fps() == Rational{20, 1});
}

TEST_CASE("PNG zip bundles reject mixed geometry and non-PNG entries") {
  const std::vector<zip::Entry> mixed = {{"000.png", encode_png(filled_frame(64, 48, 1))},
                                         {"001.png", encode_png(filled_frame(32, 32, 1))}};
  CHECK(code_of([&] { decode(zip::write(mixed), "m.zip", {}); }) == ErrorCode::CorruptStream);
  const std::vector<zip::Entry> junk = {{"000.png", encode_png(filled_frame(64, 48, 1))},
                                        {"001.txt", bytes_of("not a png")}};
  CHECK(code_of([&] { decode(zip::write(junk), "j.zip", {}); }) == ErrorCode::CorruptStream);
}

TEST_CASE("colour PNG frames are converted to grey at ingest") {
  const std::vector<zip::Entry> entries = {{"0.png", encode_png(ColorFrame(32, 32, Rgb{255, 0, 0}))}};
  const auto seq = decode(zip::write(entries), "c.zip", {});
  CHECK(seq[0].at(10, 10) == 76);
}

TEST_CASE("MJPEG AVI: one frame round trip keeps geometry") {
  const FrameSequence seq({gradient(64, 48)}, {20, 1}, "g");
  const auto avi = encode_video(seq);
  CHECK(sniff_format(avi) == ContainerFormat::MjpegAvi);
  const auto back = decode(avi, "g.avi", {});
  CHECK(back.size() == 1);
  CHECK(back.width() == 64);
  CHECK(back.height() == 48);
}

TEST_CASE("MJPEG AVI header declares the rounded frame rate") {
  std::vector<Frame> frames;
  for (std::uint32_t i = 0; i < 10; ++i) frames.push_back(filled_frame(64, 48, 100, i));
  const auto avi = encode_video(FrameSequence(frames, {20, 1}, "x"));
  const auto back = decode(avi, "x.avi", {});
  CHECK(back.size() == 10);
  CHECK(back.fps() == Rational{20, 1});
  // fourcc and the strh rate field appear in the header
  const std::string head(avi.begin(), avi.begin() + 256);
  CHECK(head.find("MJPG") != std::string::npos);

  const auto odd = decode(encode_video(FrameSequence({filled_frame(32, 32, 5)}, {30000, 1001}, "n")), "n.avi", {});
  CHECK(odd.fps() == Rational{30, 1});
}

TEST_CASE("MJPEG re-decode of uniform grey stays within 3 levels") {
  constexpr int kBound = 3;
  for (int v = 0; v < 256; v += 5) {
    const Frame f = filled_frame(64, 48, static_cast<std::uint8_t>(v));
    const auto back = decode(encode_video(FrameSequence({f}, {20, 1}, "u")), "u.avi", {});
    int worst = 0;
    for (auto p : back[0].pixels()) worst = std::max(worst, std::abs(int(p) - v));
    CHECK(worst <= kBound);
  }
}

TEST_CASE("encode_video rejects empty input") {
  CHECK(code_of([] { encode_video(std::span<const ColorFrame>{}, Rational{20, 1}); }) == ErrorCode::EmptySequence);
}

TEST_CASE("PNG round trips are byte-exact") {
  const Frame zero = filled_frame(32, 32, 0);
  CHECK(codec::decode_png(encode_png(zero), 1 << 20) == zero);
  const Frame grad = gradient(64, 48);
  CHECK(codec::decode_png(encode_png(grad), 1 << 20) == grad);
  const Frame checker = frame_from(32, 32, [](std::uint32_t x, std::uint32_t y) { return ((x + y) & 1) * 255; });
  CHECK(codec::decode_png(encode_png(checker), 1 << 20) == checker);
  ColorFrame c(40, 33);
  c.set(3, 4, {1, 2, 3});
  CHECK(codec::decode_png_rgb(encode_png(c), 1 << 20) == c);
}

TEST_CASE("decode is deterministic") {
  const auto y = hand_built_y4m(64, 48, 3);
  const auto a = decode(y, "a", {});
  const auto b = decode(y, "a", {});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("decoder caps raise LimitExceeded") {
  DecoderConfig cfg;
  cfg.max_frames = 2;
  CHECK(code_of([&] { decode(hand_built_y4m(64, 48, 3), "a", cfg); }) == ErrorCode::LimitExceeded);
  cfg = {};
  cfg.max_pixels_per_frame = 1000;
  CHECK(code_of([&] { decode(hand_built_y4m(64, 48, 1), "a", cfg); }) == ErrorCode::LimitExceeded);
}

TEST_CASE("unknown containers are unsupported without an external decoder") {
  CHECK(code_of([] { decode(bytes_of(std::string("\0\0\0\x18" "ftypmp42 junk", 17)), "a.mp4", {}); }) ==
        ErrorCode::UnsupportedFormat);
}

TEST_CASE("external decoder output is ingested through the PNG path") {
  TempDir tmp;
  write_file(tmp / "b.png", encode_png(filled_frame(40, 36, 9)));
  write_file(tmp / "a.png", encode_png(filled_frame(40, 36, 3)));
  DecoderConfig cfg;
  cfg.external_decoder_cmd = "test -s {input} && cp " + (tmp / "a.png").string() + " {outdir}/000.png && cp " +
                             (tmp / "b.png").string() + " {outdir}/001.png";
  const auto seq = decode(bytes_of(std::string("\0\0\0\x18" "ftypmp42 junk", 17)), "in's.mp4", cfg);
  REQUIRE(seq.size() == 2);
  CHECK(seq[0].at(0, 0) == 3);
  CHECK(seq[1].at(0, 0) == 9);

  cfg.external_decoder_cmd = "false";
  CHECK(code_of([&] { decode(bytes_of("????"), "x.mp4", cfg); }) == ErrorCode::CorruptStream);
}
