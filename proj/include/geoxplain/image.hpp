#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace geoxplain {

enum class Normalization { raw_0_1, standardized };

// RGB image as planar CHW floats. raw_0_1 values live in [0,1];
// standardized values are (v - mean_c) / std_c per channel.
struct ImageTensor {
  int height = 0;
  int width = 0;
  Normalization normalization = Normalization::raw_0_1;
  std::vector<float> values;  // 3 * height * width, planar CHW

  ImageTensor() = default;
  ImageTensor(int h, int w, Normalization norm = Normalization::raw_0_1)
      : height(h), width(w), normalization(norm),
        values(static_cast<std::size_t>(3) * h * w, 0.0f) {}

  static constexpr int channels = 3;

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }

  float& at(int c, int r, int col) { return values[c * plane() + static_cast<std::size_t>(r) * width + col]; }
  float at(int c, int r, int col) const {
    return values[c * plane() + static_cast<std::size_t>(r) * width + col];
  }

  // Per-channel mean, used as the default occlusion fill.
  std::array<float, 3> channel_means() const {
    std::array<float, 3> means{0.0f, 0.0f, 0.0f};
    if (values.empty()) return means;
    const std::size_t n = plane();
    for (int c = 0; c < 3; ++c) {
      double acc = 0.0;
      const float* p = values.data() + c * n;
      for (std::size_t i = 0; i < n; ++i) acc += p[i];
      means[c] = static_cast<float>(acc / static_cast<double>(n));
    }
    return means;
  }

  bool operator==(const ImageTensor& other) const = default;
};

}  // namespace geoxplain
