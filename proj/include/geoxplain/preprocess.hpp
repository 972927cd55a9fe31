#pragma once

#include <array>
#include <cstdint>

#include "geoxplain/image.hpp"
#include "geoxplain/image_io.hpp"
#include "geoxplain/manifest.hpp"

namespace geoxplain::ingest {

struct PreprocessConfig {
  int side = 224;
  Normalization normalization = Normalization::standardized;
  // ImageNet statistics; kept in config, not code, since they are a
  // convention rather than a constant of the method.
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> stddev{0.229f, 0.224f, 0.225f};
};

struct AugmentConfig {
  float flip_probability = 0.5f;
  float brightness = 0.2f;  // factor drawn from [1-b, 1+b]
  float contrast = 0.2f;
  float saturation = 0.2f;
};

// Bilinear resize to config.side, then scale to [0,1] and optionally
// standardize per channel.
ImageTensor preprocess(const DecodedImage& image, const PreprocessConfig& config);

// (v - mean_c) / std_c on an already-resized raw_0_1 tensor. Used after
// masking, which operates in raw space.
ImageTensor standardize(const ImageTensor& raw, const PreprocessConfig& config);

// Seeded horizontal flip plus brightness/contrast/saturation jitter.
// Training split only; calling with the eval split is a programming error.
ImageTensor augment(const ImageTensor& tensor, std::uint64_t seed, const AugmentConfig& config,
                    Split split);

}  // namespace geoxplain::ingest
