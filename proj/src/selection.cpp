#include "geoxplain/selection.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "geoxplain/errors.hpp"

namespace geoxplain::selection {

double geometric_mean3(double a, double b, double c) {
  if (a <= 0.0 || b <= 0.0 || c <= 0.0) return 0.0;
  // Log space avoids underflow for tiny factor products.
  return std::exp((std::log(a) + std::log(b) + std::log(c)) / 3.0);
}

ScoredSegment score_segment(const segmentation::SegmentMask& segment,
                            const attribution::AttributionMap& map,
                            const attribution::SaliencyMask& saliency) {
  if (!segment.bits.same_shape(map.values) || !segment.bits.same_shape(saliency.bits))
    throw Error(ErrorCode::DimensionMismatch,
                "segment, attribution map and saliency mask must share dimensions");
  if (segment.area < 1) throw Error(ErrorCode::EmptyMask, "cannot score an empty segment");

  std::int64_t member_count = 0;
  std::int64_t overlap_count = 0;
  double sum_importance = 0.0;
  for (std::size_t i = 0; i < segment.bits.size(); ++i) {
    if (!segment.bits[i]) continue;
    ++member_count;
    if (saliency.bits[i]) ++overlap_count;
    sum_importance += map.values[i];
  }

  ScoredSegment scored;
  scored.segment_id = segment.segment_id;
  scored.overlap_factor = static_cast<double>(overlap_count) / static_cast<double>(member_count);
  scored.mean_importance = sum_importance / static_cast<double>(member_count);
  const segmentation::Pixel center = mask_centroid(segment);
  scored.central_importance = map.values.at(center.row, center.col);
  scored.score = geometric_mean3(scored.overlap_factor, scored.mean_importance,
                                 scored.central_importance);
  return scored;
}

std::vector<ScoredSegment> filter_by_min_score(const std::vector<ScoredSegment>& scored,
                                               double s_min) {
  std::vector<ScoredSegment> kept;
  for (const auto& s : scored) {
    if (s.score >= s_min) kept.push_back(s);
  }
  return kept;
}

namespace {

struct PairStats {
  std::int64_t intersection = 0;
  std::int64_t area_a = 0;
  std::int64_t area_b = 0;
};

PairStats pair_stats(const BitGrid& a, const BitGrid& b) {
  PairStats stats;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool in_a = a[i] != 0;
    const bool in_b = b[i] != 0;
    stats.area_a += in_a;
    stats.area_b += in_b;
    stats.intersection += (in_a && in_b);
  }
  return stats;
}

bool discards(const BitGrid& kept, const BitGrid& candidate, const SelectionConfig& config) {
  const PairStats stats = pair_stats(kept, candidate);
  const std::int64_t uni = stats.area_a + stats.area_b - stats.intersection;
  const double iou = uni > 0 ? static_cast<double>(stats.intersection) / static_cast<double>(uni) : 0.0;
  if (iou >= config.iou_threshold) return true;
  const double containment =
      static_cast<double>(stats.intersection) / static_cast<double>(stats.area_b);
  const double area_ratio = static_cast<double>(stats.area_a) / static_cast<double>(stats.area_b);
  return containment >= config.containment_threshold && area_ratio <= config.area_ratio_gate;
}

}  // namespace

std::vector<ScoredSegment> dedup_containment_iou(const std::vector<ScoredSegment>& ranked,
                                                 const segmentation::SegmentSet& segments,
                                                 const SelectionConfig& config) {
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    const bool ordered = ranked[i - 1].score > ranked[i].score ||
                         (ranked[i - 1].score == ranked[i].score &&
                          ranked[i - 1].segment_id < ranked[i].segment_id);
    if (!ordered)
      throw Error(ErrorCode::UnsortedInput,
                  "dedup input must be sorted by score descending, ties by segment id");
  }

  std::unordered_map<int, const BitGrid*> mask_of;
  for (const auto& segment : segments.segments) mask_of[segment.segment_id] = &segment.bits;

  std::vector<ScoredSegment> kept;
  for (const auto& candidate : ranked) {
    auto it = mask_of.find(candidate.segment_id);
    if (it == mask_of.end())
      throw Error(ErrorCode::DimensionMismatch,
                  "scored segment id " + std::to_string(candidate.segment_id) +
                      " not present in the segment set");
    bool discard = false;
    for (const auto& winner : kept) {
      if (discards(*mask_of[winner.segment_id], *it->second, config)) {
        discard = true;
        break;
      }
    }
    if (!discard) kept.push_back(candidate);
  }
  return kept;
}

CropBox to_padded_bbox(const segmentation::SegmentMask& segment, double pad_fraction,
                       int image_height, int image_width) {
  if (segment.area < 1) throw Error(ErrorCode::EmptyMask, "cannot box an empty segment");
  int row0 = image_height, col0 = image_width, row1 = -1, col1 = -1;
  for (int r = 0; r < segment.bits.rows(); ++r) {
    for (int c = 0; c < segment.bits.cols(); ++c) {
      if (!segment.bits.at(r, c)) continue;
      row0 = std::min(row0, r);
      col0 = std::min(col0, c);
      row1 = std::max(row1, r);
      col1 = std::max(col1, c);
    }
  }

  const int box_height = row1 - row0 + 1;
  const int box_width = col1 - col0 + 1;
  const int pad_rows = static_cast<int>(std::ceil(pad_fraction * box_height));
  const int pad_cols = static_cast<int>(std::ceil(pad_fraction * box_width));

  CropBox box;
  box.source_segment_id = segment.segment_id;
  box.row0 = std::max(0, row0 - pad_rows);
  box.col0 = std::max(0, col0 - pad_cols);
  box.row1 = std::min(image_height - 1, row1 + pad_rows);
  box.col1 = std::min(image_width - 1, col1 + pad_cols);
  return box;
}

std::vector<SelectedElement> select_elements(const attribution::AttributionMap& map,
                                             const attribution::SaliencyMask& saliency,
                                             const segmentation::SegmentSet& segments,
                                             const SelectionConfig& config) {
  std::vector<ScoredSegment> scored;
  scored.reserve(segments.segments.size());
  for (const auto& segment : segments.segments)
    scored.push_back(score_segment(segment, map, saliency));

  std::vector<ScoredSegment> surviving = filter_by_min_score(scored, config.s_min);
  std::sort(surviving.begin(), surviving.end(), [](const ScoredSegment& a, const ScoredSegment& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.segment_id < b.segment_id;
  });

  std::vector<ScoredSegment> kept = dedup_containment_iou(surviving, segments, config);
  if (config.max_elements && static_cast<int>(kept.size()) > *config.max_elements)
    kept.resize(*config.max_elements);

  std::unordered_map<int, const segmentation::SegmentMask*> by_id;
  for (const auto& segment : segments.segments) by_id[segment.segment_id] = &segment;

  std::vector<SelectedElement> elements;
  elements.reserve(kept.size());
  for (const auto& scored_segment : kept) {
    SelectedElement element;
    element.scored = scored_segment;
    element.box = to_padded_bbox(*by_id[scored_segment.segment_id], config.pad_fraction,
                                 map.values.rows(), map.values.cols());
    element.box.score = scored_segment.score;
    elements.push_back(element);
  }
  return elements;
}

}  // namespace geoxplain::selection
