#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "damagekit/image.hpp"

namespace damagekit {

// Row-major alternating run lengths. The first run counts zeros and may be 0.
struct RunLengths {
  std::vector<std::uint64_t> counts;

  friend bool operator==(const RunLengths&, const RunLengths&) = default;
};

RunLengths rle_encode(const BinaryMask& mask);

// Throws CorruptRle when the runs do not sum to width * height.
BinaryMask rle_decode(const RunLengths& runs, int width, int height);

// Space-separated decimal form, e.g. "2 3 1".
std::string to_string(const RunLengths& runs);
RunLengths parse_run_lengths(const std::string& text);

}  // namespace damagekit
