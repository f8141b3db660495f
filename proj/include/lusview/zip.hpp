#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lusview::zip {

struct Entry {
  std::string name;
  std::vector<std::uint8_t> data;
};

/// Reproducible archive: entries in the given order, DOS timestamp fixed at
/// 1980-01-01 00:00, no extra fields. Deflate is used only when it shrinks the entry.
std::vector<std::uint8_t> write(std::span<const Entry> entries);

/// Reads stored and deflated entries via the central directory. Directory
/// entries are skipped. Throws CorruptStream on malformed input and
/// LimitExceeded when the total uncompressed size would exceed max_total_bytes.
std::vector<Entry> read(std::span<const std::uint8_t> archive, std::size_t max_total_bytes);

}  // namespace lusview::zip
