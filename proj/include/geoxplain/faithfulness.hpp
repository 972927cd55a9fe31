#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "geoxplain/classifier.hpp"
#include "geoxplain/preprocess.hpp"
#include "geoxplain/selection.hpp"

namespace geoxplain::faithfulness {

enum class MaskMode { deletion, insertion };
enum class Condition { guided, random };

struct MaskingSpec {
  std::vector<selection::CropBox> boxes;
  MaskMode mode = MaskMode::deletion;
  std::array<float, 3> fill{0.5f, 0.5f, 0.5f};  // raw 0-1 space
};

// Per-image predictions for one condition/repeat.
struct FaithfulnessResult {
  std::string image_id;
  int label = 0;
  int pred_original = -1;
  int pred_deletion = -1;
  int pred_insertion = -1;
  Condition condition = Condition::guided;
  int repeat_index = 0;            // 0 for guided; 0..R-1 for random
  double coverage_fraction = 0.0;  // |union of boxes| / (H*W)
};

struct ConditionAggregate {
  double accuracy_original = 0.0;
  double accuracy_deletion = 0.0;
  double accuracy_insertion = 0.0;
  double deletion_drop = 0.0;  // accuracy_original - accuracy_deletion
  double mean_coverage = 0.0;
  // Secondary metric: agreement with the image's original prediction.
  double agreement_deletion = 0.0;
  double agreement_insertion = 0.0;
  int n_images = 0;
};

struct AggregateReport {
  ConditionAggregate guided;
  ConditionAggregate random;
};

struct FaithfulnessConfig {
  int random_repeats = 10;
  std::string fill = "image_mean";  // image_mean | mid_gray | custom
  std::array<float, 3> fill_color{0.5f, 0.5f, 0.5f};
};

// Deletion: pixels inside the union of boxes become fill. Insertion: pixels
// outside the union become fill. Operates on raw 0-1 tensors only.
ImageTensor apply_masking(const ImageTensor& image, const MaskingSpec& spec);

BitGrid boxes_union(const std::vector<selection::CropBox>& boxes, int height, int width);
double coverage_fraction(const std::vector<selection::CropBox>& boxes, int height, int width);

// Size-matched random baseline: the i-th box keeps the i-th guided box's
// height and width with a uniformly random in-bounds top-left corner.
std::vector<selection::CropBox> random_crops_matched(const std::vector<selection::CropBox>& guided,
                                                     int height, int width, std::uint64_t seed);

std::array<float, 3> resolve_fill(const ImageTensor& raw, const FaithfulnessConfig& config);

// Emits 1 guided result + random_repeats random results. Random seeds derive
// from (run_seed, image_id, repeat). The image must be raw 0-1 at model
// resolution; standardization happens after masking.
std::vector<FaithfulnessResult> evaluate_image(const classifier::ClassifierAdapter& model,
                                               const ImageTensor& raw_image,
                                               const std::string& image_id, int label,
                                               const std::vector<selection::CropBox>& guided,
                                               const FaithfulnessConfig& config,
                                               const ingest::PreprocessConfig& preprocess_config,
                                               std::uint64_t run_seed);

// Random-condition numbers are averaged over repeats within an image first,
// then over images.
AggregateReport aggregate(const std::vector<FaithfulnessResult>& results);

const char* condition_name(Condition c);
Condition condition_from_string(const std::string& s);
const char* mask_mode_name(MaskMode m);

}  // namespace geoxplain::faithfulness
