#include "geoxplain/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geoxplain/errors.hpp"
#include "geoxplain/external_adapter.hpp"
#include "geoxplain/kernels.hpp"
#include "geoxplain/rng.hpp"

namespace geoxplain::attribution {

std::vector<std::string> registered_methods() {
  return {"gradcam", "gradcampp", "smoothgrad", "scorecam", "stub", "refcam"};
}

bool is_native_method(const std::string& method) {
  return method == "refcam" || method == "smoothgrad" || method == "stub";
}

Grid<float> normalize_values(Grid<float> raw) {
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i]))
      throw Error(ErrorCode::NonFiniteValues, "attribution map contains non-finite values");
    lo = std::min(lo, raw[i]);
    hi = std::max(hi, raw[i]);
  }
  if (raw.empty()) return raw;
  if (hi == lo) {
    // A constant map carries no localization signal.
    std::fill(raw.data(), raw.data() + raw.size(), 0.0f);
    return raw;
  }
  const float range = hi - lo;
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = (raw[i] - lo) / range;
  return raw;
}

AttributionMap normalize_map(AttributionMap raw) {
  raw.values = normalize_values(std::move(raw.values));
  return raw;
}

namespace {

AttributionMap stub_map(const ImageTensor& x, int target) {
  // Fixed Gaussian bump at the image center.
  AttributionMap map;
  map.method = "stub";
  map.target_class = target;
  map.values = Grid<float>(x.height, x.width);
  const double cr = (x.height - 1) / 2.0;
  const double cc = (x.width - 1) / 2.0;
  const double sigma = std::max(1.0, x.height / 8.0);
  for (int r = 0; r < x.height; ++r) {
    for (int c = 0; c < x.width; ++c) {
      const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
      map.values.at(r, c) = static_cast<float>(std::exp(-d2 / (2.0 * sigma * sigma)));
    }
  }
  return map;
}

AttributionMap refcam_map(const classifier::ClassifierAdapter& model, const ImageTensor& x,
                          int target) {
  if (!model.capabilities().activation_maps)
    throw Error(ErrorCode::CapabilityMissing,
                "refcam needs activation maps; adapter '" + model.name() + "' has none");
  classifier::ActivationTap tap = model.activation_gradients(x, target);

  // Channel weights: global average pool of the gradients.
  const std::size_t plane = static_cast<std::size_t>(tap.rows) * tap.cols;
  std::vector<float> weights(tap.channels, 0.0f);
  for (int ch = 0; ch < tap.channels; ++ch) {
    double acc = 0.0;
    const float* g = tap.gradients.data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += g[i];
    weights[ch] = static_cast<float>(acc / static_cast<double>(plane));
  }

  Grid<float> coarse(tap.rows, tap.cols);
  kernels::weighted_channel_sum_relu(tap.activations.data(), tap.channels, tap.rows, tap.cols,
                                     weights.data(), coarse.data());

  AttributionMap map;
  map.method = "refcam";
  map.target_class = target;
  map.values = Grid<float>(x.height, x.width);
  kernels::resize_bilinear(coarse.data(), 1, tap.rows, tap.cols, map.values.data(), x.height,
                           x.width);
  return map;
}

AttributionMap smoothgrad_map(const classifier::ClassifierAdapter& model, const ImageTensor& x,
                              int target, const AttributionConfig& config) {
  if (!model.capabilities().input_gradients)
    throw Error(ErrorCode::CapabilityMissing,
                "smoothgrad needs input gradients; adapter '" + model.name() + "' has none");
  const int samples = std::max(1, config.smoothgrad_samples);
  const std::size_t plane = x.plane();

  AttributionMap map;
  map.method = "smoothgrad";
  map.target_class = target;
  map.values = Grid<float>(x.height, x.width);
  std::vector<double> acc(plane, 0.0);

  for (int s = 0; s < samples; ++s) {
    ImageTensor noisy = x;
    if (config.smoothgrad_noise > 0.0) {
      Pcg32 rng(splitmix64(config.smoothgrad_seed + static_cast<std::uint64_t>(s)));
      for (float& v : noisy.values)
        v += static_cast<float>(rng.normal() * config.smoothgrad_noise);
    }
    std::vector<float> grad = model.input_gradient(noisy, target);
    // Mean absolute gradient across channels.
    for (std::size_t i = 0; i < plane; ++i) {
      acc[i] += (std::fabs(grad[i]) + std::fabs(grad[plane + i]) + std::fabs(grad[2 * plane + i])) /
                3.0;
    }
  }
  for (std::size_t i = 0; i < plane; ++i)
    map.values[i] = static_cast<float>(acc[i] / samples);
  return map;
}

AttributionMap external_map(const ImageTensor& x, int target, const std::string& method,
                            const AttributionConfig& config) {
  if (config.module_path.empty())
    throw Error(ErrorCode::BackendFailure,
                "attribution method '" + method +
                    "' requires an external adapter module (attribution.module); the in-repo "
                    "reference method is 'refcam'");
  external::ExternalAttribution adapter(config.module_path, config.weights_path);
  AttributionMap map;
  map.method = method;
  map.target_class = target;
  map.values = adapter.compute(x, target);
  return map;
}

}  // namespace

AttributionMap compute_attribution(const classifier::ClassifierAdapter& model,
                                   const ImageTensor& x, int target, const std::string& method,
                                   const AttributionConfig& config) {
  if (target < 0 || target >= model.num_classes())
    throw Error(ErrorCode::ShapeMismatch, "target class out of range");

  AttributionMap map;
  if (method == "stub") {
    map = stub_map(x, target);
  } else if (method == "refcam") {
    map = refcam_map(model, x, target);
  } else if (method == "smoothgrad") {
    map = smoothgrad_map(model, x, target, config);
  } else if (method == "gradcam" || method == "gradcampp" || method == "scorecam") {
    map = external_map(x, target, method, config);
  } else {
    throw Error(ErrorCode::BackendFailure, "unknown attribution method '" + method + "'");
  }
  return normalize_map(std::move(map));
}

SaliencyMask threshold_top_p(const AttributionMap& map, double p) {
  if (!(p > 0.0) || p > 100.0)
    throw Error(ErrorCode::InvalidPercentile,
                "percentile must be in (0, 100], got " + std::to_string(p));
  const std::size_t total = map.values.size();
  const std::size_t k = static_cast<std::size_t>(
      std::ceil(p / 100.0 * static_cast<double>(total)));

  std::vector<std::int32_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  // Descending by value; stable sort keeps ties in row-major order.
  std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    return map.values[static_cast<std::size_t>(a)] > map.values[static_cast<std::size_t>(b)];
  });

  SaliencyMask mask;
  mask.percentile_p = p;
  mask.bits = BitGrid(map.values.rows(), map.values.cols());
  for (std::size_t i = 0; i < k && i < total; ++i)
    mask.bits[static_cast<std::size_t>(order[i])] = 1;
  return mask;
}

}  // namespace geoxplain::attribution
