#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geoxplain/grid.hpp"
#include "geoxplain/image.hpp"

namespace geoxplain::segmentation {

// One binary candidate region. Always nonempty; grid at image resolution.
struct SegmentMask {
  int segment_id = 0;
  BitGrid bits;
  std::int64_t area = 0;  // popcount(bits)
  std::string source;
  std::optional<std::string> concept_hint;
};

struct SegmentSet {
  std::string image_id;
  std::vector<SegmentMask> segments;  // ids unique; masks may overlap
};

struct SegmentationConfig {
  // Fallback backend: per-channel color quantization levels and the minimum
  // emitted segment area (smaller components are merged into a neighbor).
  int fallback_levels = 4;
  int min_area = 4;
  std::string concepts_file;
  std::string module_path;
  std::string weights_path;
};

std::vector<std::string> registered_backends();
bool is_native_backend(const std::string& backend);
bool backend_supports_concepts(const std::string& backend);

// Runs the named backend. Concepts may only be passed to concept-capable
// backends (sam3 among the registered ones). The fallback backend is the
// deterministic in-repo reference: color quantization followed by
// 4-connected components, with sub-min-area components merged into the
// neighbor sharing the longest boundary so the set still partitions the
// image.
SegmentSet segment_image(const ImageTensor& image, const std::string& backend,
                         const std::vector<std::string>& concepts,
                         const SegmentationConfig& config, const std::string& image_id = "");

// Arithmetic mean of member pixels, rounded half toward the top-left; when
// the rounded point falls outside the mask it snaps to the nearest member
// pixel (Euclidean distance, ties by row-major order).
struct Pixel {
  int row = 0;
  int col = 0;
  bool operator==(const Pixel&) const = default;
};
Pixel mask_centroid(const SegmentMask& mask);

std::int64_t mask_area(const SegmentMask& mask);

// Constructor-style helper that enforces the nonempty invariant.
SegmentMask make_mask(int segment_id, BitGrid bits, const std::string& source,
                      std::optional<std::string> concept_hint = std::nullopt);

// One phrase per line; '#' comments and blank lines skipped.
std::vector<std::string> load_concepts(const std::string& path);

}  // namespace geoxplain::segmentation
