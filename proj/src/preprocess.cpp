#include "geoxplain/preprocess.hpp"

#include <algorithm>
#include <stdexcept>

#include "geoxplain/errors.hpp"
#include "geoxplain/kernels.hpp"
#include "geoxplain/rng.hpp"

namespace geoxplain::ingest {

ImageTensor preprocess(const DecodedImage& image, const PreprocessConfig& config) {
  if (image.height < 1 || image.width < 1 || image.rgb.empty())
    throw Error(ErrorCode::DecodeError, "empty image");
  if (image.rgb.size() != static_cast<std::size_t>(image.height) * image.width * 3)
    throw Error(ErrorCode::NonRGBInput, "image buffer is not 3-channel interleaved RGB");

  ImageTensor raw(image.height, image.width, Normalization::raw_0_1);
  const std::size_t plane = raw.plane();
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      std::size_t px = static_cast<std::size_t>(r) * image.width + c;
      for (int ch = 0; ch < 3; ++ch)
        raw.values[ch * plane + px] = image.rgb[px * 3 + ch] / 255.0f;
    }
  }

  ImageTensor resized(config.side, config.side, Normalization::raw_0_1);
  kernels::resize_bilinear(raw.values.data(), 3, raw.height, raw.width, resized.values.data(),
                           config.side, config.side);

  if (config.normalization == Normalization::raw_0_1) return resized;
  return standardize(resized, config);
}

ImageTensor standardize(const ImageTensor& raw, const PreprocessConfig& config) {
  if (raw.normalization != Normalization::raw_0_1)
    throw Error(ErrorCode::ShapeMismatch, "standardize expects a raw_0_1 tensor");
  ImageTensor out = raw;
  out.normalization = Normalization::standardized;
  const std::size_t plane = out.plane();
  for (int ch = 0; ch < 3; ++ch) {
    const float mean = config.mean[ch];
    const float inv_std = 1.0f / config.stddev[ch];
    float* p = out.values.data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - mean) * inv_std;
  }
  return out;
}

namespace {

float luma(const ImageTensor& t, std::size_t px) {
  const std::size_t plane = t.plane();
  return 0.299f * t.values[px] + 0.587f * t.values[plane + px] + 0.114f * t.values[2 * plane + px];
}

}  // namespace

ImageTensor augment(const ImageTensor& tensor, std::uint64_t seed, const AugmentConfig& config,
                    Split split) {
  if (split != Split::train)
    throw std::logic_error("augment is restricted to the train split");
  if (tensor.normalization != Normalization::raw_0_1)
    throw Error(ErrorCode::ShapeMismatch, "augment expects a raw_0_1 tensor");

  Pcg32 rng(seed);
  const bool flip = rng.next_double() < config.flip_probability;
  const float fb = static_cast<float>(1.0 + rng.uniform(-config.brightness, config.brightness));
  const float fc = static_cast<float>(1.0 + rng.uniform(-config.contrast, config.contrast));
  const float fs = static_cast<float>(1.0 + rng.uniform(-config.saturation, config.saturation));

  ImageTensor out = tensor;
  const std::size_t plane = out.plane();

  if (flip) {
    for (int ch = 0; ch < 3; ++ch) {
      float* p = out.values.data() + ch * plane;
      for (int r = 0; r < out.height; ++r) {
        float* row = p + static_cast<std::size_t>(r) * out.width;
        std::reverse(row, row + out.width);
      }
    }
  }

  if (fb != 1.0f) {
    for (float& v : out.values) v *= fb;
  }

  if (fc != 1.0f) {
    double acc = 0.0;
    for (std::size_t px = 0; px < plane; ++px) acc += luma(out, px);
    const float gray = static_cast<float>(acc / static_cast<double>(plane));
    for (float& v : out.values) v = gray + (v - gray) * fc;
  }

  if (fs != 1.0f) {
    for (std::size_t px = 0; px < plane; ++px) {
      const float gray = luma(out, px);
      for (int ch = 0; ch < 3; ++ch) {
        float& v = out.values[ch * plane + px];
        v = gray + (v - gray) * fs;
      }
    }
  }

  if (flip || fb != 1.0f || fc != 1.0f || fs != 1.0f) {
    for (float& v : out.values) v = std::clamp(v, 0.0f, 1.0f);
  }
  return out;
}

}  // namespace geoxplain::ingest
