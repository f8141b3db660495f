#include <doctest.h>

#include <set>

#include "lusview/core.hpp"
#include "lusview/rng.hpp"
#include "lusview/zip.hpp"
#include "test_util.hpp"

using namespace lusview;
using namespace lusview::testing;

namespace {

ColorFrame solid(std::uint32_t w, std::uint32_t h, Rgb c) { return ColorFrame(w, h, c); }

}  // namespace

TEST_CASE("to_grayscale maps black, white and pure red") {
  CHECK(to_grayscale(solid(32, 32, {0, 0, 0})).at(5, 5) == 0);
  CHECK(to_grayscale(solid(32, 32, {255, 255, 255})).at(5, 5) == 255);
  CHECK(to_grayscale(solid(32, 32, {255, 0, 0})).at(5, 5) == 76);
}

TEST_CASE("to_grayscale is the identity on grey input for every level") {
  for (int v = 0; v < 256; ++v) {
    const auto c = static_cast<std::uint8_t>(v);
    CHECK(to_grayscale(solid(32, 32, {c, c, c})).at(31, 31) == c);
  }
}

TEST_CASE("to_grayscale rejects geometry below 32x32") {
  CHECK(code_of([] { to_grayscale(solid(31, 32, {1, 2, 3})); }) == ErrorCode::InvalidGeometry);
  CHECK(code_of([] { to_grayscale(solid(32, 8, {1, 2, 3})); }) == ErrorCode::InvalidGeometry);
}

TEST_CASE("Frame rejects pixel-length mismatch and small geometry") {
  CHECK(code_of([] { Frame(32, 32, std::vector<std::uint8_t>(32 * 32 - 1)); }) == ErrorCode::InvalidFrame);
  CHECK(code_of([] { Frame(32, 32, std::vector<std::uint8_t>(32 * 32 + 1)); }) == ErrorCode::InvalidFrame);
  CHECK(code_of([] { Frame(16, 64, std::vector<std::uint8_t>(16 * 64)); }) == ErrorCode::InvalidGeometry);
  CHECK_NOTHROW(Frame(32, 32, std::vector<std::uint8_t>(32 * 32)));
}

TEST_CASE("FrameSequence enforces shared geometry, ordered indices and N >= 1") {
  CHECK(code_of([] { FrameSequence({}, {20, 1}, "x"); }) == ErrorCode::EmptySequence);
  CHECK(code_of([] {
          FrameSequence({filled_frame(32, 32, 0, 0), filled_frame(40, 32, 0, 1)}, {20, 1}, "x");
        }) == ErrorCode::GeometryMismatch);
  CHECK(code_of([] {
          FrameSequence({filled_frame(32, 32, 0, 0), filled_frame(32, 32, 0, 2)}, {20, 1}, "x");
        }) == ErrorCode::InvalidFrame);
  const auto seq = FrameSequence::from_images({filled_frame(32, 32, 1, 7), filled_frame(32, 32, 2, 9)}, {25, 1}, "x");
  REQUIRE(seq.size() == 2);
  CHECK(seq[1].index() == 1);
  CHECK(seq[1].timestamp_ms() == 40);
}

TEST_CASE("frame rate must be a positive rational") {
  CHECK(code_of([] { make_rational(0, 1); }) == ErrorCode::InvalidParams);
  CHECK(code_of([] { make_rational(20, 0); }) == ErrorCode::InvalidParams);
  CHECK(make_rational(40, 2) == Rational{20, 1});
  CHECK(make_rational(30000, 1001).value() == doctest::Approx(29.97).epsilon(1e-4));
}

TEST_CASE("ArtefactClass serialization round-trips for all six values") {
  std::set<std::string> names;
  for (ArtefactClass c : kAllClasses) {
    const auto name = std::string(to_string(c));
    names.insert(name);
    REQUIRE(parse_artefact_class(name).has_value());
    CHECK(*parse_artefact_class(name) == c);
  }
  CHECK(names == std::set<std::string>{"a-line", "b-line", "consolidation", "pleura", "rib", "shadow"});
  CHECK_FALSE(parse_artefact_class("A-Line").has_value());
  CHECK_FALSE(parse_artefact_class("").has_value());
}

TEST_CASE("iou and bbox_inside") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == doctest::Approx(1.0));
  CHECK(iou({0, 0, 10, 10}, {10, 0, 10, 10}) == doctest::Approx(0.0));
  CHECK(iou({0, 0, 10, 10}, {5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0));
  CHECK(bbox_inside({0, 0, 32, 32}, 32, 32));
  CHECK_FALSE(bbox_inside({1, 0, 32, 32}, 32, 32));
  CHECK_FALSE(bbox_inside({0, 0, 0, 5}, 32, 32));
  CHECK_FALSE(bbox_inside({-1, 0, 5, 5}, 32, 32));
}

TEST_CASE("validate_detection enforces box and confidence bounds") {
  CHECK_NOTHROW(validate_detection({ArtefactClass::Rib, {0, 0, 5, 5}, 1.0}, 32, 32));
  CHECK(code_of([] { validate_detection({ArtefactClass::Rib, {30, 0, 5, 5}, 0.5}, 32, 32); }) ==
        ErrorCode::ValidationError);
  CHECK(code_of([] { validate_detection({ArtefactClass::Rib, {0, 0, 5, 5}, 1.01}, 32, 32); }) ==
        ErrorCode::ValidationError);
  CHECK(code_of([] { validate_detection({ArtefactClass::Rib, {0, 0, 5, 5}, -0.01}, 32, 32); }) ==
        ErrorCode::ValidationError);
}

TEST_CASE("SegMask bookkeeping and per-class lookup") {
  SegMask m(ArtefactClass::Shadow, 32, 32);
  CHECK(m.count() == 0);
  m.mark(3, 4);
  m.mark(3, 4);
  m.mark(31, 31);
  CHECK(m.count() == 2);
  CHECK(m.test(3, 4));
  CHECK_FALSE(m.test(4, 3));
  FrameAnnotation ann;
  ann.masks.push_back(m);
  CHECK(ann.mask_for(ArtefactClass::Shadow) != nullptr);
  CHECK(ann.mask_for(ArtefactClass::Pleura) == nullptr);
}

TEST_CASE("xorshift64* is deterministic and below() stays in range") {
  Xorshift64Star a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs |= x != c.next();
  }
  CHECK(differs);
  Xorshift64Star r(1);
  for (int i = 0; i < 1000; ++i) {
    CHECK(r.below(7) < 7);
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("zip archives round-trip and are reproducible") {
  std::vector<zip::Entry> entries = {
      {"a/one.txt", {'h', 'e', 'l', 'l', 'o'}},
      {"a/zeros.bin", std::vector<std::uint8_t>(10000, 0)},
      {"empty", {}},
  };
  Xorshift64Star rng(3);
  std::vector<std::uint8_t> noise(5000);
  for (auto& b : noise) b = static_cast<std::uint8_t>(rng.next());
  entries.push_back({"noise.bin", noise});

  const auto z1 = zip::write(entries);
  const auto z2 = zip::write(entries);
  CHECK(z1 == z2);
  CHECK(z1.size() < 10000);  // the zero run is deflated

  const auto back = zip::read(z1, 1 << 20);
  REQUIRE(back.size() == entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(back[i].name == entries[i].name);
    CHECK(back[i].data == entries[i].data);
  }
}

TEST_CASE("zip reader rejects corruption and oversized content") {
  const std::vector<zip::Entry> entries = {{"x.bin", std::vector<std::uint8_t>(4096, 7)}};
  auto z = zip::write(entries);
  CHECK(code_of([&] { zip::read(z, 100); }) == ErrorCode::LimitExceeded);
  CHECK(code_of([&] { zip::read(std::span(z).subspan(0, z.size() / 2), 1 << 20); }) == ErrorCode::CorruptStream);
  // flip a byte inside the compressed payload: CRC or inflate must fail
  z[40] ^= 0xFF;
  CHECK(code_of([&] { zip::read(z, 1 << 20); }) == ErrorCode::CorruptStream);
}

TEST_CASE("error codes have snake_case names") {
  CHECK(error_code_name(ErrorCode::SpecOutOfBounds) == "spec_out_of_bounds");
  CHECK(error_code_name(ErrorCode::UnknownKey) == "unknown_key");
  CHECK(error_code_name(ErrorCode::NotReady) == "not_ready");
}
