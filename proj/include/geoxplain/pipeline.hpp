#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "geoxplain/classifier.hpp"
#include "geoxplain/config.hpp"
#include "geoxplain/selection.hpp"

namespace geoxplain::pipeline {

// One (attribution method, segmentation backend) comparison axis.
struct PairKey {
  std::string method;
  std::string backend;
  std::string dir_name() const { return method + "__" + backend; }
};

struct StageCounts {
  int images = 0;
  int ok = 0;
  int failed = 0;
  int zero_crop = 0;
  std::int64_t segments = 0;
  std::int64_t crops = 0;
  double mean_segment_coverage = 0.0;  // union of segment masks / image area
};

// crops.jsonl line: one eval image with its ranked elements.
struct CropRecord {
  std::string image_id;
  std::string uri;
  int label = 0;
  int target_class = 0;
  std::vector<selection::SelectedElement> elements;
};

struct ExtractOutcome {
  std::filesystem::path run_directory;
  std::vector<PairKey> pairs;
  std::map<std::string, StageCounts> counts;  // keyed by pair dir name
};

struct EvaluateOutcome {
  std::filesystem::path run_directory;
  int pairs_evaluated = 0;
};

struct TrainOutcome {
  std::filesystem::path weights_path;
  std::filesystem::path report_path;
  classifier::TrainReport report;
};

struct SweepRow {
  std::map<std::string, double> params;
  std::string method;
  std::string backend;
  double coverage = 0.0;
  double deletion_drop = 0.0;
  double insertion_accuracy = 0.0;
};

// For every eval image and pair: attribution map, saliency mask, segment
// set and ranked crops, persisted under <run dir>/pairs/<method>__<backend>.
// Per-image failures are isolated, logged and counted; the run continues.
ExtractOutcome cmd_extract(const config::RunConfig& config);

// Guided + coverage-matched random conditions over the persisted crops;
// writes results.jsonl and summary.json per pair.
EvaluateOutcome cmd_evaluate(const config::RunConfig& config);

// Static plots + crop gallery, computed purely from persisted files.
std::filesystem::path cmd_report(const std::filesystem::path& run_directory, int gallery_top_k = 4,
                                 int gallery_max_images = 24);

// Grid file: JSON object mapping parameter names (subset of p, s_min,
// iou_threshold, containment_threshold, area_ratio_gate, pad_fraction) to
// value lists; the cross product is swept.
std::vector<SweepRow> cmd_sweep(const config::RunConfig& config,
                                const std::filesystem::path& grid_path,
                                std::filesystem::path* table_dir = nullptr);

// Desk-scale trainer; saves weights + TrainReport into the run directory
// (or to classifier.weights when set).
TrainOutcome cmd_train(const config::RunConfig& config);

std::unique_ptr<classifier::ClassifierAdapter> make_classifier(const config::RunConfig& config,
                                                               int manifest_num_classes);

// Artifact helpers shared with the test suites.
std::vector<CropRecord> read_crop_records(const std::filesystem::path& crops_file);
std::string sanitize_id(const std::string& id);

}  // namespace geoxplain::pipeline
