#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoxplain/attribution.hpp"
#include "geoxplain/faithfulness.hpp"
#include "geoxplain/preprocess.hpp"
#include "geoxplain/segmentation.hpp"
#include "geoxplain/selection.hpp"
#include "geoxplain/train.hpp"

namespace geoxplain::config {

// Whole-run configuration: one section per module. Every default in the
// shipped configs/default.json appears here explicitly.
struct RunConfig {
  // run
  std::uint64_t seed = 1234;
  int workers = 0;  // 0 = hardware default; not part of the run identity
  int limit = 0;    // process only the first N eval images when > 0
  std::string output_dir = "runs";  // overridden by $GEOXPLAIN_CACHE

  // ingest
  std::string manifest_path;
  ingest::PreprocessConfig preprocess;
  ingest::AugmentConfig augment;

  // classifier
  std::string classifier_backend = "toy-cnn";  // toy-cnn | stub | external
  std::string classifier_weights;
  std::string classifier_module;
  std::vector<float> stub_logits;
  classifier::TrainConfig train;
  int toy_c1 = 8, toy_c2 = 16, toy_c3 = 16;

  // attribution: one or more methods to compare
  std::vector<std::string> attribution_methods{"refcam"};
  attribution::AttributionConfig attribution;

  // segmentation: one or more backends to compare
  std::vector<std::string> segmentation_backends{"fallback"};
  segmentation::SegmentationConfig segmentation;

  selection::SelectionConfig selection;
  faithfulness::FaithfulnessConfig faithfulness;

  // report
  int gallery_top_k = 4;
  int gallery_max_images = 24;
  bool export_crop_images = true;

  // sweep
  int max_grid_points = 64;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
void write_config(const RunConfig& config, const std::filesystem::path& path);

// FNV-1a of the canonical serialization. Execution details that cannot
// change results (workers, output_dir) are excluded, so re-running the same
// experiment lands in the same run directory.
std::string config_hash(const RunConfig& config);

// output_dir, unless $GEOXPLAIN_CACHE is set.
std::filesystem::path run_root(const RunConfig& config);
std::filesystem::path run_dir(const RunConfig& config);

}  // namespace geoxplain::config
