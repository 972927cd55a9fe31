#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geoxplain/classifier.hpp"
#include "geoxplain/grid.hpp"
#include "geoxplain/image.hpp"

namespace geoxplain::attribution {

// Per-pixel relevance for one (image, class) pair, at input resolution.
// After normalize_map, values live in [0,1] with max exactly 1 unless the
// map is identically zero.
struct AttributionMap {
  Grid<float> values;
  int target_class = 0;
  std::string method;
};

struct SaliencyMask {
  BitGrid bits;
  double percentile_p = 0.0;
};

struct AttributionConfig {
  double top_p = 20.0;
  double smoothgrad_noise = 0.1;
  int smoothgrad_samples = 8;
  std::uint64_t smoothgrad_seed = 4242;
  // External attribution adapters (the published CAM variants) are shared
  // libraries resolved from these paths; empty means not configured.
  std::string module_path;
  std::string weights_path;
};

// Method names the registry accepts. "refcam" (gradient-weighted activation
// map), "smoothgrad" and "stub" are native; "gradcam", "gradcampp" and
// "scorecam" resolve to an external adapter module.
std::vector<std::string> registered_methods();
bool is_native_method(const std::string& method);

AttributionMap compute_attribution(const classifier::ClassifierAdapter& model,
                                   const ImageTensor& x, int target, const std::string& method,
                                   const AttributionConfig& config);

// Min-max rescale to [0,1]; identically-constant maps become all zeros.
AttributionMap normalize_map(AttributionMap raw);
Grid<float> normalize_values(Grid<float> raw);

// Exactly ceil(p/100 * H * W) bits, in descending value order; ties at the
// cutoff go to the lower row-major pixel index.
SaliencyMask threshold_top_p(const AttributionMap& map, double p);

}  // namespace geoxplain::attribution
