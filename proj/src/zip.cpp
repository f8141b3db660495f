#include "lusview/zip.hpp"

#include <zlib.h>

#include <cstring>
#include <limits>

#include "lusview/error.hpp"

namespace lusview::zip {
namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kDosDate1980 = (0 << 9) | (1 << 5) | 1;

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t off) {
  if (off + 2 > b.size()) throw Error(ErrorCode::CorruptStream, "zip: truncated record");
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

std::uint32_t get32(std::span<const std::uint8_t> b, std::size_t off) {
  if (off + 4 > b.size()) throw Error(ErrorCode::CorruptStream, "zip: truncated record");
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::vector<std::uint8_t> deflate_raw(std::span<const std::uint8_t> in) {
  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorCode::IoError, "zip: deflateInit failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::IoError, "zip: deflate failed");
  out.resize(produced);
  return out;
}

std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> in, std::size_t expected) {
  std::vector<std::uint8_t> out(expected == 0 ? 1 : expected);
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) throw Error(ErrorCode::CorruptStream, "zip: inflateInit failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) {
    throw Error(ErrorCode::CorruptStream, "zip: deflate stream does not match declared size");
  }
  out.resize(expected);
  return out;
}

}  // namespace

std::vector<std::uint8_t> write(std::span<const Entry> entries) {
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> central;
  for (const Entry& e : entries) {
    if (e.data.size() > std::numeric_limits<std::uint32_t>::max() || e.name.size() > 0xFFFF) {
      throw Error(ErrorCode::LimitExceeded, "zip: entry too large for a non-zip64 archive");
    }
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, e.data.data(), static_cast<uInt>(e.data.size())));
    std::vector<std::uint8_t> packed = deflate_raw(e.data);
    std::uint16_t method = 8;
    std::span<const std::uint8_t> payload = packed;
    if (packed.size() >= e.data.size()) {
      method = 0;
      payload = e.data;
    }
    const auto offset = static_cast<std::uint32_t>(out.size());

    put32(out, kLocalSig);
    put16(out, 20);  // version needed
    put16(out, 0x0800);  // UTF-8 names
    put16(out, method);
    put16(out, 0);  // time
    put16(out, kDosDate1980);
    put32(out, crc);
    put32(out, static_cast<std::uint32_t>(payload.size()));
    put32(out, static_cast<std::uint32_t>(e.data.size()));
    put16(out, static_cast<std::uint16_t>(e.name.size()));
    put16(out, 0);
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.insert(out.end(), payload.begin(), payload.end());

    put32(central, kCentralSig);
    put16(central, 0x031E);  // made by: unix, 3.0
    put16(central, 20);
    put16(central, 0x0800);
    put16(central, method);
    put16(central, 0);
    put16(central, kDosDate1980);
    put32(central, crc);
    put32(central, static_cast<std::uint32_t>(payload.size()));
    put32(central, static_cast<std::uint32_t>(e.data.size()));
    put16(central, static_cast<std::uint16_t>(e.name.size()));
    put16(central, 0);  // extra
    put16(central, 0);  // comment
    put16(central, 0);  // disk
    put16(central, 0);  // internal attrs
    put32(central, 0100644u << 16);  // external attrs: regular file 0644
    put32(central, offset);
    central.insert(central.end(), e.name.begin(), e.name.end());
  }
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  out.insert(out.end(), central.begin(), central.end());
  put32(out, kEndSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, cd_offset);
  put16(out, 0);
  return out;
}

std::vector<Entry> read(std::span<const std::uint8_t> archive, std::size_t max_total_bytes) {
  if (archive.size() < 22) throw Error(ErrorCode::CorruptStream, "zip: archive too short");
  // End-of-central-directory record, searching back over a possible comment.
  std::size_t eocd = std::string::npos;
  const std::size_t lowest = archive.size() >= 22 + 0xFFFF ? archive.size() - 22 - 0xFFFF : 0;
  for (std::size_t pos = archive.size() - 22 + 1; pos-- > lowest;) {
    if (get32(archive, pos) == kEndSig) {
      eocd = pos;
      break;
    }
  }
  if (eocd == std::string::npos) throw Error(ErrorCode::CorruptStream, "zip: no end of central directory");
  const std::uint16_t count = get16(archive, eocd + 10);
  const std::uint32_t cd_size = get32(archive, eocd + 12);
  const std::uint32_t cd_offset = get32(archive, eocd + 16);
  if (std::size_t{cd_offset} + cd_size > eocd) {
    throw Error(ErrorCode::CorruptStream, "zip: central directory out of range");
  }

  std::vector<Entry> entries;
  std::size_t total = 0;
  std::size_t pos = cd_offset;
  for (std::uint16_t i = 0; i < count; ++i) {
    if (get32(archive, pos) != kCentralSig) throw Error(ErrorCode::CorruptStream, "zip: bad central header");
    const std::uint16_t flags = get16(archive, pos + 8);
    const std::uint16_t method = get16(archive, pos + 10);
    const std::uint32_t crc = get32(archive, pos + 16);
    const std::uint32_t csize = get32(archive, pos + 20);
    const std::uint32_t usize = get32(archive, pos + 24);
    const std::uint16_t name_len = get16(archive, pos + 28);
    const std::uint16_t extra_len = get16(archive, pos + 30);
    const std::uint16_t comment_len = get16(archive, pos + 32);
    const std::uint32_t local = get32(archive, pos + 42);
    if (pos + 46 + name_len > archive.size()) throw Error(ErrorCode::CorruptStream, "zip: truncated name");
    std::string name(reinterpret_cast<const char*>(archive.data() + pos + 46), name_len);
    pos += 46 + std::size_t{name_len} + extra_len + comment_len;

    if (!name.empty() && name.back() == '/') continue;
    if (flags & 0x1) throw Error(ErrorCode::UnsupportedFormat, "zip: encrypted entries are not supported");
    if (usize == 0xFFFFFFFFu || csize == 0xFFFFFFFFu) {
      throw Error(ErrorCode::UnsupportedFormat, "zip: zip64 archives are not supported");
    }
    total += usize;
    if (total > max_total_bytes) throw Error(ErrorCode::LimitExceeded, "zip: uncompressed size exceeds limit");

    if (get32(archive, local) != kLocalSig) throw Error(ErrorCode::CorruptStream, "zip: bad local header");
    const std::size_t data_off =
        std::size_t{local} + 30 + get16(archive, local + 26) + get16(archive, local + 28);
    if (data_off + csize > archive.size()) throw Error(ErrorCode::CorruptStream, "zip: entry data out of range");
    const auto payload = archive.subspan(data_off, csize);

    std::vector<std::uint8_t> data;
    if (method == 0) {
      if (csize != usize) throw Error(ErrorCode::CorruptStream, "zip: stored entry size mismatch");
      data.assign(payload.begin(), payload.end());
    } else if (method == 8) {
      data = inflate_raw(payload, usize);
    } else {
      throw Error(ErrorCode::UnsupportedFormat, "zip: compression method " + std::to_string(method));
    }
    if (static_cast<std::uint32_t>(crc32(0L, data.data(), static_cast<uInt>(data.size()))) != crc) {
      throw Error(ErrorCode::CorruptStream, "zip: crc mismatch in " + name);
    }
    entries.push_back({std::move(name), std::move(data)});
  }
  return entries;
}

}  // namespace lusview::zip
