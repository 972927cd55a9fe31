#include "geoxplain/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "geoxplain/errors.hpp"
#include "geoxplain/external_adapter.hpp"

namespace geoxplain::segmentation {

std::vector<std::string> registered_backends() {
  return {"mobilesam", "sam2", "sam3", "fallback"};
}

bool is_native_backend(const std::string& backend) { return backend == "fallback"; }

bool backend_supports_concepts(const std::string& backend) { return backend == "sam3"; }

SegmentMask make_mask(int segment_id, BitGrid bits, const std::string& source,
                      std::optional<std::string> concept_hint) {
  SegmentMask mask;
  mask.segment_id = segment_id;
  mask.area = popcount(bits);
  if (mask.area < 1) throw Error(ErrorCode::EmptyMask, "segment masks must be nonempty");
  mask.bits = std::move(bits);
  mask.source = source;
  mask.concept_hint = std::move(concept_hint);
  return mask;
}

std::int64_t mask_area(const SegmentMask& mask) { return popcount(mask.bits); }

Pixel mask_centroid(const SegmentMask& mask) {
  std::int64_t sum_r = 0, sum_c = 0, area = 0;
  for (int r = 0; r < mask.bits.rows(); ++r) {
    for (int c = 0; c < mask.bits.cols(); ++c) {
      if (mask.bits.at(r, c)) {
        sum_r += r;
        sum_c += c;
        ++area;
      }
    }
  }
  if (area == 0) throw Error(ErrorCode::EmptyMask, "centroid of empty mask");

  // round(sum/area) with halves toward the origin, in exact integer math:
  // floor((2*sum + area - 1) / (2*area)).
  auto round_half_down = [](std::int64_t sum, std::int64_t area) {
    return (2 * sum + area - 1) / (2 * area);
  };
  Pixel centroid{static_cast<int>(round_half_down(sum_r, area)),
                 static_cast<int>(round_half_down(sum_c, area))};
  if (mask.bits.at(centroid.row, centroid.col)) return centroid;

  // Snap to the nearest member pixel; ties resolved by row-major order.
  Pixel best{0, 0};
  std::int64_t best_d2 = -1;
  for (int r = 0; r < mask.bits.rows(); ++r) {
    for (int c = 0; c < mask.bits.cols(); ++c) {
      if (!mask.bits.at(r, c)) continue;
      const std::int64_t dr = r - centroid.row;
      const std::int64_t dc = c - centroid.col;
      const std::int64_t d2 = dr * dr + dc * dc;
      if (best_d2 < 0 || d2 < best_d2) {
        best_d2 = d2;
        best = {r, c};
      }
    }
  }
  return best;
}

std::vector<std::string> load_concepts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path);
  std::vector<std::string> concepts;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    std::size_t start = line.find_first_not_of(' ');
    if (start == std::string::npos) continue;
    line = line.substr(start);
    if (line.empty() || line[0] == '#') continue;
    concepts.push_back(line);
  }
  return concepts;
}

namespace {

// Union-find over pixel indices.
struct DisjointSet {
  std::vector<std::int32_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::int32_t find(std::int32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void merge(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent[b] = a;
    else parent[a] = b;
  }
};

SegmentSet fallback_segment(const ImageTensor& image, const SegmentationConfig& config,
                            const std::string& image_id) {
  const int h = image.height;
  const int w = image.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const int levels = std::max(2, config.fallback_levels);

  // Color quantization label per pixel.
  std::vector<std::int32_t> color(n);
  const std::size_t plane = image.plane();
  for (std::size_t i = 0; i < n; ++i) {
    std::int32_t key = 0;
    for (int ch = 0; ch < 3; ++ch) {
      float v = image.values[ch * plane + i];
      if (v < 0.0f) v = 0.0f;
      if (v > 1.0f) v = 1.0f;
      int level = std::min(levels - 1, static_cast<int>(v * levels));
      key = key * levels + level;
    }
    color[i] = key;
  }

  // 4-connected components over equal quantized colors.
  DisjointSet ds(n);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      if (c + 1 < w && color[i] == color[i + 1]) ds.merge(static_cast<std::int32_t>(i), static_cast<std::int32_t>(i + 1));
      if (r + 1 < h && color[i] == color[i + w]) ds.merge(static_cast<std::int32_t>(i), static_cast<std::int32_t>(i + w));
    }
  }

  std::vector<std::int32_t> root(n);
  std::map<std::int32_t, std::int64_t> areas;  // ordered for determinism
  for (std::size_t i = 0; i < n; ++i) {
    root[i] = ds.find(static_cast<std::int32_t>(i));
    ++areas[root[i]];
  }

  // Merge sub-min-area components into the neighbor sharing the longest
  // boundary (ties toward the smaller root id) until everything is large
  // enough or a single segment remains. Keeps the partition invariant.
  const std::int64_t min_area = std::max<std::int64_t>(1, config.min_area);
  bool changed = true;
  while (changed && areas.size() > 1) {
    changed = false;
    std::int32_t victim = -1;
    for (const auto& [id, area] : areas) {
      if (area < min_area) {
        victim = id;
        break;
      }
    }
    if (victim < 0) break;

    std::map<std::int32_t, std::int64_t> boundary;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * w + c;
        if (root[i] != victim) continue;
        const std::size_t neighbors[4] = {
            c > 0 ? i - 1 : i, c + 1 < w ? i + 1 : i,
            r > 0 ? i - w : i, r + 1 < h ? i + w : i};
        for (std::size_t nb : neighbors) {
          if (nb != i && root[nb] != victim) ++boundary[root[nb]];
        }
      }
    }
    if (boundary.empty()) break;  // isolated; cannot merge further
    std::int32_t target = boundary.begin()->first;
    std::int64_t best = boundary.begin()->second;
    for (const auto& [id, len] : boundary) {
      if (len > best) {
        target = id;
        best = len;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (root[i] == victim) root[i] = target;
    }
    areas[target] += areas[victim];
    areas.erase(victim);
    changed = true;
  }

  // Emit masks ordered by first row-major occurrence.
  std::map<std::int32_t, int> id_of_root;
  SegmentSet set;
  set.image_id = image_id;
  for (std::size_t i = 0; i < n; ++i) {
    if (!id_of_root.contains(root[i])) {
      const int id = static_cast<int>(id_of_root.size());
      id_of_root[root[i]] = id;
      set.segments.push_back({});
      set.segments.back().segment_id = id;
      set.segments.back().bits = BitGrid(h, w);
      set.segments.back().source = "fallback";
    }
    set.segments[id_of_root[root[i]]].bits[i] = 1;
  }
  for (auto& segment : set.segments) segment.area = popcount(segment.bits);
  return set;
}

}  // namespace

SegmentSet segment_image(const ImageTensor& image, const std::string& backend,
                         const std::vector<std::string>& concepts,
                         const SegmentationConfig& config, const std::string& image_id) {
  if (image.height < 1 || image.width < 1)
    throw Error(ErrorCode::ShapeMismatch, "cannot segment an empty image");
  if (!concepts.empty() && !backend_supports_concepts(backend))
    throw Error(ErrorCode::ConceptsUnsupported,
                "backend '" + backend + "' does not accept concept prompts");

  if (backend == "fallback") return fallback_segment(image, config, image_id);

  if (backend == "mobilesam" || backend == "sam2" || backend == "sam3") {
    if (config.module_path.empty())
      throw Error(ErrorCode::BackendFailure,
                  "segmentation backend '" + backend +
                      "' requires an external adapter module (segmentation.module); the in-repo "
                      "reference backend is 'fallback'");
    external::ExternalSegmenter segmenter(config.module_path, config.weights_path);
    if (!concepts.empty() && !segmenter.supports_concepts())
      throw Error(ErrorCode::ConceptsUnsupported,
                  "module '" + config.module_path + "' does not accept concept prompts");
    SegmentSet set;
    set.image_id = image_id;
    int next_id = 0;
    for (auto& result : segmenter.segment(image, concepts)) {
      if (popcount(result.bits) < 1) continue;  // empty proposals are dropped
      set.segments.push_back(
          make_mask(next_id++, std::move(result.bits), backend, std::move(result.concept_hint)));
    }
    return set;
  }

  throw Error(ErrorCode::BackendFailure, "unknown segmentation backend '" + backend + "'");
}

}  // namespace geoxplain::segmentation
