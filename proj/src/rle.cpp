#include "geoxplain/rle.hpp"

#include "geoxplain/errors.hpp"

namespace geoxplain::rle {

std::vector<std::int64_t> encode(const BitGrid& bits) {
  std::vector<std::int64_t> runs;
  std::uint8_t current = 0;  // first run counts unset pixels
  std::int64_t length = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    std::uint8_t bit = bits[i] ? 1 : 0;
    if (bit == current) {
      ++length;
    } else {
      runs.push_back(length);
      current = bit;
      length = 1;
    }
  }
  runs.push_back(length);
  return runs;
}

BitGrid decode(const std::vector<std::int64_t>& runs, int rows, int cols) {
  BitGrid bits(rows, cols);
  std::size_t i = 0;
  std::uint8_t current = 0;
  for (std::int64_t run : runs) {
    if (run < 0) throw Error(ErrorCode::SchemaError, "negative RLE run");
    for (std::int64_t k = 0; k < run; ++k) {
      if (i >= bits.size()) throw Error(ErrorCode::SchemaError, "RLE runs exceed grid size");
      bits[i++] = current;
    }
    current = current ? 0 : 1;
  }
  if (i != bits.size()) throw Error(ErrorCode::SchemaError, "RLE runs shorter than grid size");
  return bits;
}

}  // namespace geoxplain::rle
