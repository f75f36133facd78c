#include "damagekit/rle.hpp"

#include <algorithm>
#include <charconv>

#include "damagekit/error.hpp"

namespace damagekit {

RunLengths rle_encode(const BinaryMask& mask) {
  RunLengths runs;
  std::uint8_t current = 0;
  std::uint64_t length = 0;
  for (const std::uint8_t bit : mask.bits()) {
    if (bit != current) {
      runs.counts.push_back(length);
      current = bit;
      length = 0;
    }
    ++length;
  }
  runs.counts.push_back(length);
  return runs;
}

BinaryMask rle_decode(const RunLengths& runs, int width, int height) {
  const std::uint64_t expected = static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height);
  std::uint64_t total = 0;
  for (const auto c : runs.counts) {
    total += c;
    if (total > expected) break;
  }
  if (total != expected) {
    throw Error(ErrorKind::CorruptRle, "run lengths sum to " + std::to_string(total) +
                                           ", expected " + std::to_string(expected));
  }
  BinaryMask mask(width, height);
  auto bits = mask.bits();
  std::uint64_t pos = 0;
  std::uint8_t value = 0;
  for (const auto c : runs.counts) {
    if (value) std::fill_n(bits.begin() + static_cast<std::ptrdiff_t>(pos), c, std::uint8_t{1});
    pos += c;
    value ^= 1;
  }
  return mask;
}

std::string to_string(const RunLengths& runs) {
  std::string out;
  for (std::size_t i = 0; i < runs.counts.size(); ++i) {
    if (i) out.push_back(' ');
    out += std::to_string(runs.counts[i]);
  }
  return out;
}

RunLengths parse_run_lengths(const std::string& text) {
  RunLengths runs;
  const char* p = text.data();
  const char* end = p + text.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == ',' || *p == '\n' || *p == '\t')) ++p;
    if (p == end) break;
    std::uint64_t value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc()) {
      throw Error(ErrorKind::CorruptRle, "bad run length at offset " + std::to_string(p - text.data()));
    }
    runs.counts.push_back(value);
    p = next;
  }
  return runs;
}

}  // namespace damagekit
