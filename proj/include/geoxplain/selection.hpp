#pragma once

#include <optional>
#include <vector>

#include "geoxplain/attribution.hpp"
#include "geoxplain/segmentation.hpp"

namespace geoxplain::selection {

// Three relevance factors and their geometric-mean combination; zero as soon
// as any factor is zero.
struct ScoredSegment {
  int segment_id = 0;
  double overlap_factor = 0.0;      // |segment ∩ saliency| / |segment|
  double mean_importance = 0.0;     // mean attribution over the segment
  double central_importance = 0.0;  // attribution at the snapped centroid
  double score = 0.0;
};

// Inclusive pixel bounds; always contains the source segment's tight box.
struct CropBox {
  int row0 = 0, col0 = 0, row1 = 0, col1 = 0;
  int source_segment_id = 0;
  double score = 0.0;

  int height() const { return row1 - row0 + 1; }
  int width() const { return col1 - col0 + 1; }
  bool operator==(const CropBox&) const = default;
};

struct SelectionConfig {
  double s_min = 0.2;
  double iou_threshold = 0.7;          // tau
  double containment_threshold = 0.85; // kappa
  double area_ratio_gate = 3.0;        // rho, >= 1
  double pad_fraction = 0.1;
  std::optional<int> max_elements = 10;
};

// A kept crop with its factor breakdown, as exported per image.
struct SelectedElement {
  CropBox box;
  ScoredSegment scored;
};

double geometric_mean3(double a, double b, double c);

ScoredSegment score_segment(const segmentation::SegmentMask& segment,
                            const attribution::AttributionMap& map,
                            const attribution::SaliencyMask& saliency);

std::vector<ScoredSegment> filter_by_min_score(const std::vector<ScoredSegment>& scored,
                                               double s_min);

// Greedy keep-highest scan over segments ranked by (score desc, id asc).
// A candidate B is discarded against a kept A iff IoU(A,B) >= tau, or B lies
// mostly inside A (|A∩B|/|B| >= kappa) and A is not disproportionately
// larger (|A|/|B| <= rho). The rho gate is what keeps small details alive
// inside much larger kept segments.
std::vector<ScoredSegment> dedup_containment_iou(const std::vector<ScoredSegment>& ranked,
                                                 const segmentation::SegmentSet& segments,
                                                 const SelectionConfig& config);

// Tight bounding box expanded by ceil(pad_fraction * side) per edge in each
// dimension, clamped to the image.
CropBox to_padded_bbox(const segmentation::SegmentMask& segment, double pad_fraction,
                       int image_height, int image_width);

// Full pipeline: score -> s_min filter -> rank -> dedup -> pad -> truncate.
std::vector<SelectedElement> select_elements(const attribution::AttributionMap& map,
                                             const attribution::SaliencyMask& saliency,
                                             const segmentation::SegmentSet& segments,
                                             const SelectionConfig& config);

}  // namespace geoxplain::selection
