#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "geoxplain/image.hpp"

namespace geoxplain::ingest {

// Decoded 8-bit RGB image, interleaved row-major.
struct DecodedImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;

  std::uint8_t at(int r, int c, int ch) const {
    return rgb[(static_cast<std::size_t>(r) * width + c) * 3 + ch];
  }
};

// Sniffs PNG/JPEG signatures. Palette and grayscale inputs are expanded to
// RGB; alpha is stripped. DecodeError on corrupt data, NonRGBInput when the
// color space cannot be converted.
DecodedImage load_image(const std::filesystem::path& path);

void save_png(const std::filesystem::path& path, const DecodedImage& image);

// Clamps raw_0_1 floats to [0,255] bytes. Standardized tensors are rejected.
DecodedImage to_decoded(const ImageTensor& tensor);

}  // namespace geoxplain::ingest
