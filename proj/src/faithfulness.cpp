#include "geoxplain/faithfulness.hpp"

#include <algorithm>
#include <map>

#include "geoxplain/errors.hpp"
#include "geoxplain/kernels.hpp"
#include "geoxplain/rng.hpp"

namespace geoxplain::faithfulness {

const char* condition_name(Condition c) { return c == Condition::guided ? "guided" : "random"; }

Condition condition_from_string(const std::string& s) {
  if (s == "guided") return Condition::guided;
  if (s == "random") return Condition::random;
  throw Error(ErrorCode::SchemaError, "condition must be 'guided' or 'random', got '" + s + "'");
}

const char* mask_mode_name(MaskMode m) { return m == MaskMode::deletion ? "deletion" : "insertion"; }

BitGrid boxes_union(const std::vector<selection::CropBox>& boxes, int height, int width) {
  BitGrid region(height, width);
  for (const auto& box : boxes) {
    if (box.row0 < 0 || box.col0 < 0 || box.row1 >= height || box.col1 >= width ||
        box.row0 > box.row1 || box.col0 > box.col1)
      throw Error(ErrorCode::BoxOutOfBounds,
                  "box [" + std::to_string(box.row0) + "," + std::to_string(box.col0) + "," +
                      std::to_string(box.row1) + "," + std::to_string(box.col1) +
                      "] outside " + std::to_string(height) + "x" + std::to_string(width));
    for (int r = box.row0; r <= box.row1; ++r) {
      for (int c = box.col0; c <= box.col1; ++c) region.at(r, c) = 1;
    }
  }
  return region;
}

double coverage_fraction(const std::vector<selection::CropBox>& boxes, int height, int width) {
  if (height < 1 || width < 1) return 0.0;
  return static_cast<double>(popcount(boxes_union(boxes, height, width))) /
         (static_cast<double>(height) * width);
}

ImageTensor apply_masking(const ImageTensor& image, const MaskingSpec& spec) {
  if (image.normalization != Normalization::raw_0_1)
    throw Error(ErrorCode::ShapeMismatch, "apply_masking expects a raw_0_1 tensor");
  BitGrid region = boxes_union(spec.boxes, image.height, image.width);
  ImageTensor out = image;
  // Deletion fills inside the union; insertion fills outside it. An empty
  // box list therefore leaves deletion untouched and blanks insertion fully.
  const bool fill_where_set = spec.mode == MaskMode::deletion;
  kernels::fill_region(out.values.data(), 3, image.height, image.width, region.data(),
                       fill_where_set, spec.fill.data());
  return out;
}

std::vector<selection::CropBox> random_crops_matched(const std::vector<selection::CropBox>& guided,
                                                     int height, int width, std::uint64_t seed) {
  Pcg32 rng(seed);
  std::vector<selection::CropBox> random_boxes;
  random_boxes.reserve(guided.size());
  for (const auto& box : guided) {
    const int box_height = box.height();
    const int box_width = box.width();
    if (box_height > height || box_width > width)
      throw Error(ErrorCode::BoxLargerThanImage,
                  "box " + std::to_string(box_height) + "x" + std::to_string(box_width) +
                      " cannot fit in " + std::to_string(height) + "x" + std::to_string(width));
    const int row0 = static_cast<int>(rng.bounded(static_cast<std::uint32_t>(height - box_height + 1)));
    const int col0 = static_cast<int>(rng.bounded(static_cast<std::uint32_t>(width - box_width + 1)));
    selection::CropBox placed;
    placed.row0 = row0;
    placed.col0 = col0;
    placed.row1 = row0 + box_height - 1;
    placed.col1 = col0 + box_width - 1;
    placed.source_segment_id = box.source_segment_id;
    placed.score = box.score;
    random_boxes.push_back(placed);
  }
  return random_boxes;
}

std::array<float, 3> resolve_fill(const ImageTensor& raw, const FaithfulnessConfig& config) {
  if (config.fill == "image_mean") return raw.channel_means();
  if (config.fill == "mid_gray") return {0.5f, 0.5f, 0.5f};
  if (config.fill == "custom") return config.fill_color;
  throw Error(ErrorCode::ConfigError,
              "faithfulness.fill must be image_mean, mid_gray or custom, got '" + config.fill + "'");
}

namespace {

// Both conditions run through this one helper, so guided and random receive
// exactly the same masking and prediction treatment.
FaithfulnessResult condition_result(const classifier::ClassifierAdapter& model,
                                    const ImageTensor& raw_image, const std::string& image_id,
                                    int label, int pred_original,
                                    const std::vector<selection::CropBox>& boxes,
                                    const std::array<float, 3>& fill,
                                    const ingest::PreprocessConfig& preprocess_config,
                                    Condition condition, int repeat_index) {
  FaithfulnessResult result;
  result.image_id = image_id;
  result.label = label;
  result.condition = condition;
  result.repeat_index = repeat_index;
  result.pred_original = pred_original;
  result.coverage_fraction = coverage_fraction(boxes, raw_image.height, raw_image.width);

  MaskingSpec deletion{boxes, MaskMode::deletion, fill};
  MaskingSpec insertion{boxes, MaskMode::insertion, fill};
  ImageTensor deleted = ingest::standardize(apply_masking(raw_image, deletion), preprocess_config);
  ImageTensor inserted = ingest::standardize(apply_masking(raw_image, insertion), preprocess_config);
  result.pred_deletion = classifier::predict_top1(model, deleted).first;
  result.pred_insertion = classifier::predict_top1(model, inserted).first;
  return result;
}

}  // namespace

std::vector<FaithfulnessResult> evaluate_image(const classifier::ClassifierAdapter& model,
                                               const ImageTensor& raw_image,
                                               const std::string& image_id, int label,
                                               const std::vector<selection::CropBox>& guided,
                                               const FaithfulnessConfig& config,
                                               const ingest::PreprocessConfig& preprocess_config,
                                               std::uint64_t run_seed) {
  const std::array<float, 3> fill = resolve_fill(raw_image, config);
  const int pred_original =
      classifier::predict_top1(model, ingest::standardize(raw_image, preprocess_config)).first;

  std::vector<FaithfulnessResult> results;
  results.push_back(condition_result(model, raw_image, image_id, label, pred_original, guided,
                                     fill, preprocess_config, Condition::guided, 0));
  for (int rep = 0; rep < config.random_repeats; ++rep) {
    const std::uint64_t seed = derive_seed(run_seed, image_id, static_cast<std::uint64_t>(rep));
    const auto random_boxes =
        random_crops_matched(guided, raw_image.height, raw_image.width, seed);
    results.push_back(condition_result(model, raw_image, image_id, label, pred_original,
                                       random_boxes, fill, preprocess_config, Condition::random,
                                       rep));
  }
  return results;
}

AggregateReport aggregate(const std::vector<FaithfulnessResult>& results) {
  if (results.empty()) throw Error(ErrorCode::EmptyResults, "no faithfulness results to aggregate");

  struct PerImage {
    double original = 0, deletion = 0, insertion = 0, coverage = 0;
    double agree_del = 0, agree_ins = 0;
    int count = 0;
  };

  auto build = [&](Condition condition) {
    std::map<std::string, PerImage> by_image;
    for (const auto& r : results) {
      if (r.condition != condition) continue;
      auto& acc = by_image[r.image_id];
      acc.original += r.pred_original == r.label ? 1.0 : 0.0;
      acc.deletion += r.pred_deletion == r.label ? 1.0 : 0.0;
      acc.insertion += r.pred_insertion == r.label ? 1.0 : 0.0;
      acc.agree_del += r.pred_deletion == r.pred_original ? 1.0 : 0.0;
      acc.agree_ins += r.pred_insertion == r.pred_original ? 1.0 : 0.0;
      acc.coverage += r.coverage_fraction;
      ++acc.count;
    }
    ConditionAggregate agg;
    agg.n_images = static_cast<int>(by_image.size());
    if (by_image.empty()) return agg;
    for (const auto& [id, acc] : by_image) {
      // Average over repeats within the image first.
      agg.accuracy_original += acc.original / acc.count;
      agg.accuracy_deletion += acc.deletion / acc.count;
      agg.accuracy_insertion += acc.insertion / acc.count;
      agg.agreement_deletion += acc.agree_del / acc.count;
      agg.agreement_insertion += acc.agree_ins / acc.count;
      agg.mean_coverage += acc.coverage / acc.count;
    }
    const double n = static_cast<double>(by_image.size());
    agg.accuracy_original /= n;
    agg.accuracy_deletion /= n;
    agg.accuracy_insertion /= n;
    agg.agreement_deletion /= n;
    agg.agreement_insertion /= n;
    agg.mean_coverage /= n;
    agg.deletion_drop = agg.accuracy_original - agg.accuracy_deletion;
    return agg;
  };

  AggregateReport report;
  report.guided = build(Condition::guided);
  report.random = build(Condition::random);
  return report;
}

}  // namespace geoxplain::faithfulness
