#pragma once

#include <filesystem>

#include "geoxplain/grid.hpp"

namespace geoxplain::npy {

// Minimal NPY (format version 1.0) support for the two grid payloads the
// pipeline persists: little-endian float32 and uint8, 2-D, C order.
void write_f32(const std::filesystem::path& path, const Grid<float>& grid);
Grid<float> read_f32(const std::filesystem::path& path);

void write_u8(const std::filesystem::path& path, const Grid<std::uint8_t>& grid);
Grid<std::uint8_t> read_u8(const std::filesystem::path& path);

}  // namespace geoxplain::npy
