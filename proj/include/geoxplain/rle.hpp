#pragma once

#include <cstdint>
#include <vector>

#include "geoxplain/grid.hpp"

namespace geoxplain::rle {

// Row-major run-length encoding of a bit grid: alternating run lengths
// starting with a (possibly zero) run of unset pixels. Runs always sum to
// rows * cols.
std::vector<std::int64_t> encode(const BitGrid& bits);
BitGrid decode(const std::vector<std::int64_t>& runs, int rows, int cols);

}  // namespace geoxplain::rle
