// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fails. The end-to-end criteria build a planted-cue dataset, train the toy
// classifier and drive the public pipeline commands.

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "geoxplain/attribution.hpp"
#include "geoxplain/config.hpp"
#include "geoxplain/errors.hpp"
#include "geoxplain/faithfulness.hpp"
#include "geoxplain/pipeline.hpp"
#include "geoxplain/rng.hpp"
#include "geoxplain/selection.hpp"
#include "geoxplain/synth.hpp"
#include "geoxplain/train.hpp"

using namespace geoxplain;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string name;
  std::function<void()> body;  // throws on failure
};

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw Failure(message);
}

fs::path g_work;
fs::path g_source;

// Shared state across the end-to-end criteria.
struct E2EState {
  fs::path dataset_dir;
  fs::path weights_path;
  double eval_accuracy = 0.0;
  bool ready = false;
};
E2EState g_e2e;

Grid<float> random_grid(int rows, int cols, Pcg32& rng) {
  Grid<float> grid(rows, cols);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = rng.next_float();
  return grid;
}

BitGrid random_bits(int rows, int cols, Pcg32& rng, double density) {
  BitGrid bits(rows, cols);
  bool any = false;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bits[i] = rng.next_double() < density ? 1 : 0;
    any |= bits[i] != 0;
  }
  if (!any) bits[rng.bounded(static_cast<std::uint32_t>(bits.size()))] = 1;
  return bits;
}

// --- criterion 1: scoring oracle equivalence -------------------------------

void criterion_scoring_oracle() {
  const double t0 = omp_get_wtime();
  Pcg32 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    Grid<float> values = random_grid(8, 8, rng);
    attribution::AttributionMap map;
    map.values = values;
    attribution::SaliencyMask saliency;
    saliency.bits = random_bits(8, 8, rng, 0.4);
    saliency.percentile_p = 20.0;
    auto segment = segmentation::make_mask(trial, random_bits(8, 8, rng, 0.35), "accept");

    auto scored = selection::score_segment(segment, map, saliency);

    // Direct enumeration over the 64 pixels, written independently.
    double members = 0, inside = 0, sum = 0;
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        if (!segment.bits.at(r, c)) continue;
        members += 1;
        inside += saliency.bits.at(r, c) ? 1 : 0;
        sum += values.at(r, c);
      }
    }
    const double overlap = inside / members;
    const double mean = sum / members;
    auto center = segmentation::mask_centroid(segment);
    const double central = values.at(center.row, center.col);
    const double expected =
        (overlap <= 0 || mean <= 0 || central <= 0) ? 0.0 : std::cbrt(overlap * mean * central);

    require(std::fabs(scored.overlap_factor - overlap) <= 1e-9, "overlap factor mismatch");
    require(std::fabs(scored.mean_importance - mean) <= 1e-9, "mean importance mismatch");
    require(std::fabs(scored.central_importance - central) <= 1e-9, "central importance mismatch");
    require(std::fabs(scored.score - expected) <= 1e-9, "combined score mismatch");
  }
  const double elapsed = omp_get_wtime() - t0;
  require(elapsed < 1.0, "scoring oracle run took " + std::to_string(elapsed) + "s (>= 1s)");
}

// --- criterion 2: threshold contract ----------------------------------------

void criterion_threshold_contract() {
  const double t0 = omp_get_wtime();
  Pcg32 rng(77);
  const double percentiles[4] = {1.0, 20.0, 50.0, 100.0};
  for (int trial = 0; trial < 50; ++trial) {
    attribution::AttributionMap map;
    map.values = attribution::normalize_values(random_grid(12, 11, rng));
    BitGrid previous;
    for (double p : percentiles) {
      auto mask = attribution::threshold_top_p(map, p);
      const auto expected_k = static_cast<std::int64_t>(
          std::ceil(p / 100.0 * static_cast<double>(map.values.size())));
      require(popcount(mask.bits) == expected_k, "popcount != ceil(p/100*H*W)");

      float min_selected = 2.0f, max_unselected = -1.0f;
      for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        if (mask.bits[i]) min_selected = std::min(min_selected, map.values[i]);
        else max_unselected = std::max(max_unselected, map.values[i]);
      }
      if (max_unselected >= 0.0f)
        require(min_selected >= max_unselected, "value dominance violated");

      if (!previous.empty()) {
        for (std::size_t i = 0; i < mask.bits.size(); ++i) {
          if (previous[i]) require(mask.bits[i] != 0, "masks not nested in p");
        }
      }
      previous = mask.bits;
    }
  }
  const double elapsed = omp_get_wtime() - t0;
  require(elapsed < 1.0, "threshold contract run took " + std::to_string(elapsed) + "s (>= 1s)");
}

// --- criterion 3: dedup oracle ----------------------------------------------

void criterion_dedup_oracle() {
  Pcg32 rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    segmentation::SegmentSet set;
    std::vector<selection::ScoredSegment> ranked;
    const int n = 2 + static_cast<int>(rng.bounded(6));
    for (int i = 0; i < n; ++i) {
      set.segments.push_back(segmentation::make_mask(i, random_bits(10, 10, rng, 0.3), "accept"));
      selection::ScoredSegment s;
      s.segment_id = i;
      s.score = rng.next_double();
      ranked.push_back(s);
    }
    std::sort(ranked.begin(), ranked.end(),
              [](const selection::ScoredSegment& a, const selection::ScoredSegment& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.segment_id < b.segment_id;
              });
    selection::SelectionConfig config;
    config.iou_threshold = 0.3 + 0.4 * rng.next_double();
    config.containment_threshold = 0.6 + 0.3 * rng.next_double();
    config.area_ratio_gate = 1.5 + 3.0 * rng.next_double();

    auto kept = dedup_containment_iou(ranked, set, config);

    // Reference: pairwise rule applied in rank order with plain set math.
    std::vector<int> expected;
    for (const auto& candidate : ranked) {
      const auto& b = set.segments[candidate.segment_id].bits;
      double area_b = 0;
      for (std::size_t i = 0; i < b.size(); ++i) area_b += b[i] ? 1 : 0;
      bool discard = false;
      for (int winner : expected) {
        const auto& a = set.segments[winner].bits;
        double area_a = 0, inter = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
          area_a += a[i] ? 1 : 0;
          inter += (a[i] && b[i]) ? 1 : 0;
        }
        const double iou = inter / (area_a + area_b - inter);
        if (iou >= config.iou_threshold ||
            (inter / area_b >= config.containment_threshold &&
             area_a / area_b <= config.area_ratio_gate)) {
          discard = true;
          break;
        }
      }
      if (!discard) expected.push_back(candidate.segment_id);
    }
    require(kept.size() == expected.size(), "dedup kept-count differs from reference");
    for (std::size_t i = 0; i < kept.size(); ++i)
      require(kept[i].segment_id == expected[i], "dedup kept-set differs from reference");
  }

  // Small-inside-large preservation: area ratio above rho always keeps the
  // small segment, across random placements.
  for (int trial = 0; trial < 20; ++trial) {
    BitGrid large(30, 30), small(30, 30);
    const int lr = static_cast<int>(rng.bounded(6));
    const int lc = static_cast<int>(rng.bounded(6));
    for (int r = lr; r < lr + 20; ++r) {
      for (int c = lc; c < lc + 20; ++c) large.at(r, c) = 1;
    }
    const int sr = lr + 4 + static_cast<int>(rng.bounded(10));
    const int sc = lc + 4 + static_cast<int>(rng.bounded(10));
    for (int r = sr; r < sr + 3; ++r) {
      for (int c = sc; c < sc + 3; ++c) small.at(r, c) = 1;
    }
    segmentation::SegmentSet set;
    set.segments.push_back(segmentation::make_mask(0, large, "accept"));
    set.segments.push_back(segmentation::make_mask(1, small, "accept"));
    std::vector<selection::ScoredSegment> ranked(2);
    ranked[0].segment_id = 0;
    ranked[0].score = 0.9;
    ranked[1].segment_id = 1;
    ranked[1].score = 0.5;
    selection::SelectionConfig config;  // rho = 3; ratio here is 400/9
    auto kept = dedup_containment_iou(ranked, set, config);
    require(kept.size() == 2, "small-inside-large segment was not preserved");
    require(kept[1].segment_id == 1, "small segment missing from kept set");
  }
}

// --- criterion 4: masking complementarity -----------------------------------

void criterion_masking_complementarity() {
  Pcg32 rng(88);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 8 + static_cast<int>(rng.bounded(12));
    const int w = 8 + static_cast<int>(rng.bounded(12));
    ImageTensor image(h, w, Normalization::raw_0_1);
    for (float& v : image.values) v = rng.next_float();
    std::vector<selection::CropBox> boxes;
    const int n_boxes = static_cast<int>(rng.bounded(5));
    for (int b = 0; b < n_boxes; ++b) {
      selection::CropBox box;
      box.row0 = static_cast<int>(rng.bounded(h));
      box.col0 = static_cast<int>(rng.bounded(w));
      box.row1 = box.row0 + static_cast<int>(rng.bounded(static_cast<std::uint32_t>(h - box.row0)));
      box.col1 = box.col0 + static_cast<int>(rng.bounded(static_cast<std::uint32_t>(w - box.col0)));
      boxes.push_back(box);
    }
    const std::array<float, 3> fill{0.2f, 0.4f, 0.6f};
    auto deleted = faithfulness::apply_masking(image, {boxes, faithfulness::MaskMode::deletion, fill});
    auto inserted =
        faithfulness::apply_masking(image, {boxes, faithfulness::MaskMode::insertion, fill});
    for (int ch = 0; ch < 3; ++ch) {
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const float d = deleted.at(ch, r, c);
          const float i = inserted.at(ch, r, c);
          const float o = image.at(ch, r, c);
          const float f = fill[ch];
          require((d == o && i == f) || (d == f && i == o),
                  "pixel multiset {deletion, insertion} != {original, fill}");
        }
      }
    }
  }
}

// --- end-to-end setup --------------------------------------------------------

config::RunConfig e2e_config(std::uint64_t run_seed) {
  config::RunConfig run;
  run.seed = run_seed;
  run.output_dir = (g_work / "runs").string();
  run.manifest_path = (g_e2e.dataset_dir / "manifest.jsonl").string();
  run.preprocess.side = 64;
  run.classifier_backend = "toy-cnn";
  run.classifier_weights = g_e2e.weights_path.string();
  run.attribution_methods = {"refcam"};
  run.segmentation_backends = {"fallback"};
  run.attribution.top_p = 20.0;
  run.selection.s_min = 0.2;
  run.faithfulness.random_repeats = 10;
  run.export_crop_images = false;
  return run;
}

void build_e2e_state() {
  if (g_e2e.ready) return;
  g_e2e.dataset_dir = g_work / "dataset";
  synth::SynthConfig synth_config;
  synth_config.side = 64;
  synth_config.train_per_class = 100;
  synth_config.eval_per_class = 100;
  synth_config.seed = 7;
  auto manifest = synth::write_dataset(synth_config, g_e2e.dataset_dir);
  std::cerr << "  [e2e] dataset: " << manifest.records.size() << " images\n";

  classifier::TrainConfig train_config;
  train_config.learning_rate = 1e-3;  // recipe lr is the shipped default; this is the fast desk run
  train_config.weight_decay = 0.02;
  train_config.label_smoothing = 0.1;
  train_config.max_epochs = 40;
  train_config.patience = 8;
  train_config.batch_size = 32;
  train_config.seed = 1234;

  ingest::PreprocessConfig preprocess;
  preprocess.side = 64;
  ingest::AugmentConfig augment;  // default flip + jitter

  classifier::ToyCnn::Spec spec;
  spec.input_side = 64;
  spec.num_classes = manifest.num_classes;

  const double t0 = omp_get_wtime();
  auto trained = classifier::train_classifier(manifest, g_e2e.dataset_dir, train_config, augment,
                                              preprocess, spec);
  std::cerr << "  [e2e] trained " << trained.report.epochs.size() << " epochs in "
            << (omp_get_wtime() - t0) << "s; train acc " << trained.report.final_train_accuracy
            << ", val acc " << trained.report.final_val_accuracy << "\n";

  g_e2e.weights_path = g_work / "toy_cnn.bin";
  trained.model->save(g_e2e.weights_path);

  // Eval-split accuracy for the >= 0.9 gate.
  ingest::PreprocessConfig raw_config = preprocess;
  raw_config.normalization = Normalization::raw_0_1;
  std::vector<ImageTensor> eval_images;
  std::vector<int> eval_labels;
  for (const auto& record : manifest.split_records(ingest::Split::eval)) {
    auto raw = ingest::preprocess(ingest::load_image(g_e2e.dataset_dir / record.uri), raw_config);
    eval_images.push_back(ingest::standardize(raw, preprocess));
    eval_labels.push_back(record.label);
  }
  g_e2e.eval_accuracy = classifier::accuracy(*trained.model, eval_images, eval_labels);
  std::cerr << "  [e2e] eval accuracy: " << g_e2e.eval_accuracy << "\n";
  g_e2e.ready = true;
}

// --- criterion 5: end-to-end directional check ------------------------------

void criterion_e2e_directional() {
  build_e2e_state();
  require(g_e2e.eval_accuracy >= 0.9, "toy classifier eval accuracy " +
                                          std::to_string(g_e2e.eval_accuracy) + " < 0.9");

  double guided_drop = 0.0, random_drop = 0.0, guided_ins = 0.0, random_ins = 0.0;
  const std::uint64_t run_seeds[3] = {101, 202, 303};
  for (std::uint64_t seed : run_seeds) {
    config::RunConfig run = e2e_config(seed);
    pipeline::cmd_extract(run);
    auto evaluated = pipeline::cmd_evaluate(run);
    std::ifstream summary_in(evaluated.run_directory / "pairs" / "refcam__fallback" /
                             "summary.json");
    json summary = json::parse(summary_in);
    require(summary.contains("guided"), "summary lacks guided aggregates");
    guided_drop += summary["guided"]["deletion_drop"].get<double>();
    random_drop += summary["random"]["deletion_drop"].get<double>();
    guided_ins += summary["guided"]["accuracy_insertion"].get<double>();
    random_ins += summary["random"]["accuracy_insertion"].get<double>();
    std::cerr << "  [e2e] seed " << seed << ": guided drop "
              << summary["guided"]["deletion_drop"].get<double>() << " vs random "
              << summary["random"]["deletion_drop"].get<double>() << "; guided insertion "
              << summary["guided"]["accuracy_insertion"].get<double>() << " vs random "
              << summary["random"]["accuracy_insertion"].get<double>() << "\n";
  }
  guided_drop /= 3.0;
  random_drop /= 3.0;
  guided_ins /= 3.0;
  random_ins /= 3.0;
  std::cerr << "  [e2e] 3-seed means: deletion drop " << guided_drop << " (guided) vs "
            << random_drop << " (random); insertion " << guided_ins << " (guided) vs "
            << random_ins << " (random)\n";
  require(guided_drop > random_drop + 0.05,
          "guided deletion drop does not beat random by > 0.05");
  require(guided_ins > random_ins + 0.05,
          "guided insertion accuracy does not beat random by > 0.05");
}

// --- criterion 6: determinism ------------------------------------------------

void criterion_determinism() {
  build_e2e_state();
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    require(static_cast<bool>(in), "missing result file " + p.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };

  fs::path dirs[2];
  for (int round = 0; round < 2; ++round) {
    config::RunConfig run = e2e_config(4242);
    run.output_dir = (g_work / ("det_root_" + std::to_string(round))).string();
    run.limit = 60;
    pipeline::cmd_extract(run);
    dirs[round] = pipeline::cmd_evaluate(run).run_directory;
  }
  for (const char* file : {"pairs/refcam__fallback/crops.jsonl",
                           "pairs/refcam__fallback/results.jsonl",
                           "pairs/refcam__fallback/summary.json"}) {
    require(slurp(dirs[0] / file) == slurp(dirs[1] / file),
            std::string("result file differs between runs: ") + file);
  }
}

// --- criterion 7: degenerate robustness --------------------------------------

void criterion_degenerate() {
  build_e2e_state();
  // Zeroed linear head -> identically-zero CAM -> constant map -> zero crops.
  classifier::ToyCnn::Spec spec;
  spec.input_side = 64;
  spec.num_classes = 3;
  classifier::ToyCnn model(spec, 5);
  std::fill(model.params().wfc.begin(), model.params().wfc.end(), 0.0f);
  std::fill(model.params().bfc.begin(), model.params().bfc.end(), 0.0f);
  const fs::path weights = g_work / "zero_head.bin";
  model.save(weights);

  config::RunConfig run = e2e_config(11);
  run.classifier_weights = weights.string();
  run.limit = 12;
  auto extract = pipeline::cmd_extract(run);
  const auto& counts = extract.counts.at("refcam__fallback");
  require(counts.ok == 12, "degenerate extract failed images");
  require(counts.zero_crop == 12, "constant map did not produce zero crops everywhere");
  auto evaluated = pipeline::cmd_evaluate(run);
  std::ifstream summary_in(evaluated.run_directory / "pairs" / "refcam__fallback" / "summary.json");
  json summary = json::parse(summary_in);
  require(summary["excluded"]["zero_crops"].get<int>() == 12,
          "zero-crop images not excluded with a counted reason");
  require(summary["n_images_evaluated"].get<int>() == 0, "degenerate images were aggregated");
}

// --- criterion 8: trainer recipe conformance ----------------------------------

void criterion_recipe_conformance() {
  const fs::path path = g_source / "configs" / "default.json";
  auto config = config::load_run_config(path);
  require(config.train.learning_rate == 3e-4, "default learning rate != 3e-4");
  require(config.train.weight_decay == 0.02, "default weight decay != 0.02");
  require(config.train.label_smoothing == 0.1, "default label smoothing != 0.1");
  require(config.train.patience == 30, "default patience != 30");
}

// --- extra: planted-cue ground-truth boxes (frozen from the oracle run) ------

void criterion_planted_cue_oracle() {
  build_e2e_state();
  auto model = classifier::ToyCnn::load(g_e2e.weights_path);
  auto manifest = ingest::load_manifest(g_e2e.dataset_dir / "manifest.jsonl");
  auto truth = synth::load_truth(g_e2e.dataset_dir / "truth.jsonl");

  ingest::PreprocessConfig preprocess;
  preprocess.side = 64;
  ingest::PreprocessConfig raw_config = preprocess;
  raw_config.normalization = Normalization::raw_0_1;
  faithfulness::FaithfulnessConfig faith;
  faith.random_repeats = 0;

  int n = 0, insertion_hits = 0, deletion_misses = 0;
  for (const auto& record : manifest.split_records(ingest::Split::eval)) {
    const auto& t = truth.at(record.id);
    selection::CropBox box;
    box.row0 = t.row0;
    box.col0 = t.col0;
    box.row1 = t.row1;
    box.col1 = t.col1;
    auto raw = ingest::preprocess(ingest::load_image(g_e2e.dataset_dir / record.uri), raw_config);
    auto results = faithfulness::evaluate_image(*model, raw, record.id, record.label, {box},
                                                faith, preprocess, 1);
    ++n;
    insertion_hits += results[0].pred_insertion == record.label ? 1 : 0;
    deletion_misses += results[0].pred_deletion != record.label ? 1 : 0;
  }
  const double insertion_rate = static_cast<double>(insertion_hits) / n;
  const double deletion_miss_rate = static_cast<double>(deletion_misses) / n;
  std::cerr << "  [cue] truth-box insertion==label: " << insertion_rate
            << ", deletion!=label: " << deletion_miss_rate << "\n";
  // Frozen from the measured ground-truth-box oracle: insertion keeps the
  // cue (rate tracks eval accuracy); deletion removes it, leaving a roughly
  // class-uninformed prediction whose mismatch rate centers near 2/3 on a
  // balanced 3-class set.
  require(insertion_rate >= 0.8, "truth-box insertion success below 0.8");
  require(deletion_miss_rate >= 0.5, "truth-box deletion mismatch below 0.5");
}

}  // namespace

int main(int argc, char** argv) {
  g_work = fs::temp_directory_path() / "gx_acceptance";
  g_source = GX_SOURCE_DIR;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--work") g_work = argv[i + 1];
    else if (flag == "--source") g_source = argv[i + 1];
  }
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  std::vector<Criterion> criteria{
      {"scoring-oracle-equivalence", criterion_scoring_oracle},
      {"threshold-contract", criterion_threshold_contract},
      {"dedup-oracle-equivalence", criterion_dedup_oracle},
      {"masking-complementarity", criterion_masking_complementarity},
      {"e2e-directional-check", criterion_e2e_directional},
      {"determinism", criterion_determinism},
      {"degenerate-robustness", criterion_degenerate},
      {"trainer-recipe-conformance", criterion_recipe_conformance},
      {"planted-cue-truth-boxes", criterion_planted_cue_oracle},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const double t0 = omp_get_wtime();
    try {
      criterion.body();
      std::cout << "PASS " << criterion.name << " (" << (omp_get_wtime() - t0) << "s)\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "FAIL " << criterion.name << ": " << e.what() << "\n";
    }
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
