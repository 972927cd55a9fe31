#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "geoxplain/config.hpp"
#include "geoxplain/errors.hpp"
#include "geoxplain/faithfulness.hpp"
#include "geoxplain/pipeline.hpp"
#include "geoxplain/rng.hpp"
#include "geoxplain/synth.hpp"
#include "geoxplain/toy_cnn.hpp"

using namespace geoxplain;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct TempTree {
  fs::path root;
  explicit TempTree(const std::string& tag) {
    root = fs::temp_directory_path() / ("gx_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~TempTree() { fs::remove_all(root); }
};

// Tiny on-disk synth dataset shared by the pipeline tests.
const fs::path& synth_dataset() {
  static TempTree tree("dataset");
  static bool built = false;
  if (!built) {
    synth::SynthConfig config;
    config.side = 24;
    config.cue_min = 8;
    config.cue_max = 10;
    config.train_per_class = 2;
    config.eval_per_class = 3;
    config.seed = 3;
    synth::write_dataset(config, tree.root);
    built = true;
  }
  return tree.root;
}

config::RunConfig stub_config(const fs::path& output_dir) {
  config::RunConfig run;
  run.seed = 321;
  run.output_dir = output_dir.string();
  run.manifest_path = (synth_dataset() / "manifest.jsonl").string();
  run.preprocess.side = 24;
  run.classifier_backend = "stub";
  run.stub_logits = {0.0f, 1.5f, 0.0f};
  run.attribution_methods = {"stub"};
  run.segmentation_backends = {"fallback"};
  run.selection.s_min = 0.05;
  run.faithfulness.random_repeats = 2;
  run.export_crop_images = false;
  return run;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config hash identifies the experiment, not the execution") {
  config::RunConfig a = stub_config("/tmp/rootA");
  config::RunConfig b = a;
  CHECK(config::config_hash(a) == config::config_hash(b));
  b.workers = 7;
  b.output_dir = "/somewhere/else";
  CHECK(config::config_hash(a) == config::config_hash(b));  // execution details
  b.selection.s_min = 0.3;
  CHECK(config::config_hash(a) != config::config_hash(b));  // experiment change
  config::RunConfig c = a;
  c.seed = 99;
  CHECK(config::config_hash(a) != config::config_hash(c));
}

TEST_CASE("config round-trips through json") {
  config::RunConfig a = stub_config("/tmp/rootA");
  a.attribution.top_p = 35.0;
  a.selection.max_elements.reset();
  config::RunConfig b = config::from_json(config::to_json(a));
  CHECK(config::config_hash(a) == config::config_hash(b));
  CHECK(b.attribution.top_p == 35.0);
  CHECK_FALSE(b.selection.max_elements.has_value());
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(config::from_json(json::parse(R"({"selektion": {}})")), Error);
  CHECK_THROWS_AS(config::from_json(json::parse(R"({"selection": {"smin": 0.2}})")), Error);
  CHECK_THROWS_AS(config::from_json(json::parse(R"({"attribution": {"top_p": 0}})")), Error);
  CHECK_THROWS_AS(config::from_json(json::parse(R"({"attribution": {"method": "magic"}})")), Error);
  CHECK_THROWS_AS(
      config::from_json(json::parse(R"({"classifier": {"train": {"label_smoothing": 1.0}}})")),
      Error);
  try {
    config::load_run_config("/nonexistent/config.json");
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
}

TEST_CASE("shipped default config carries every documented default") {
  const fs::path path = fs::path(GX_SOURCE_DIR) / "configs" / "default.json";
  config::RunConfig config = config::load_run_config(path);
  CHECK(config.preprocess.side == 224);
  CHECK(config.preprocess.mean[0] == doctest::Approx(0.485f));
  CHECK(config.preprocess.mean[1] == doctest::Approx(0.456f));
  CHECK(config.preprocess.mean[2] == doctest::Approx(0.406f));
  CHECK(config.preprocess.stddev[0] == doctest::Approx(0.229f));
  CHECK(config.preprocess.stddev[1] == doctest::Approx(0.224f));
  CHECK(config.preprocess.stddev[2] == doctest::Approx(0.225f));
  CHECK(config.augment.flip_probability == 0.5f);
  CHECK(config.augment.brightness == 0.2f);
  CHECK(config.augment.contrast == 0.2f);
  CHECK(config.augment.saturation == 0.2f);
  CHECK(config.train.learning_rate == 3e-4);
  CHECK(config.train.weight_decay == 0.02);
  CHECK(config.train.label_smoothing == 0.1);
  CHECK(config.train.patience == 30);
  CHECK(config.train.max_epochs == 300);
  CHECK(config.train.batch_size == 32);
  CHECK(config.attribution.top_p == 20.0);
  CHECK(config.selection.s_min == 0.2);
  CHECK(config.selection.iou_threshold == 0.7);
  CHECK(config.selection.containment_threshold == 0.85);
  CHECK(config.selection.area_ratio_gate == 3.0);
  CHECK(config.selection.pad_fraction == 0.1);
  CHECK(config.selection.max_elements == 10);
  CHECK(config.faithfulness.random_repeats == 10);
  CHECK(config.faithfulness.fill == "image_mean");
  CHECK(config.segmentation.fallback_levels == 4);
  CHECK(config.segmentation.min_area == 4);
}

TEST_CASE("extract + evaluate + report over the stub pipeline") {
  TempTree tree("stubrun");
  config::RunConfig run = stub_config(tree.root);

  auto extract = pipeline::cmd_extract(run);
  const auto& counts = extract.counts.at("stub__fallback");
  CHECK(counts.images == 9);
  CHECK(counts.ok == 9);
  CHECK(counts.failed == 0);
  CHECK(counts.segments > 0);
  // The fallback backend partitions each image, so union coverage is full.
  CHECK(counts.mean_segment_coverage == doctest::Approx(1.0).epsilon(1e-12));

  const auto pair_dir = extract.run_directory / "pairs" / "stub__fallback";
  auto records = pipeline::read_crop_records(pair_dir / "crops.jsonl");
  REQUIRE(records.size() == 9);
  for (const auto& record : records) {
    CHECK(record.target_class == 1);  // stub logits peak at class 1
    for (const auto& element : record.elements) {
      CHECK(element.box.row0 >= 0);
      CHECK(element.box.row1 < 24);
      CHECK(element.scored.score >= run.selection.s_min);
    }
  }

  auto evaluate = pipeline::cmd_evaluate(run);
  CHECK(evaluate.pairs_evaluated == 1);
  REQUIRE(fs::exists(pair_dir / "results.jsonl"));
  REQUIRE(fs::exists(pair_dir / "summary.json"));

  // Independent re-aggregation oracle: rebuild the aggregate from the raw
  // results file and compare with the persisted summary.
  json summary = json::parse(slurp(pair_dir / "summary.json"));
  std::vector<faithfulness::FaithfulnessResult> results;
  std::ifstream results_in(pair_dir / "results.jsonl");
  std::string line;
  while (std::getline(results_in, line)) {
    if (line.empty()) continue;
    json row = json::parse(line);
    faithfulness::FaithfulnessResult r;
    r.image_id = row.at("image_id").get<std::string>();
    r.label = row.at("label").get<int>();
    r.condition = faithfulness::condition_from_string(row.at("condition").get<std::string>());
    r.repeat_index = row.at("repeat_index").get<int>();
    r.pred_original = row.at("pred_original").get<int>();
    r.pred_deletion = row.at("pred_deletion").get<int>();
    r.pred_insertion = row.at("pred_insertion").get<int>();
    r.coverage_fraction = row.at("coverage_fraction").get<double>();
    results.push_back(r);
  }
  REQUIRE(!results.empty());
  auto re_agg = faithfulness::aggregate(results);
  CHECK(summary["guided"]["accuracy_original"].get<double>() ==
        doctest::Approx(re_agg.guided.accuracy_original).epsilon(1e-12));
  CHECK(summary["guided"]["deletion_drop"].get<double>() ==
        doctest::Approx(re_agg.guided.deletion_drop).epsilon(1e-12));
  CHECK(summary["random"]["accuracy_insertion"].get<double>() ==
        doctest::Approx(re_agg.random.accuracy_insertion).epsilon(1e-12));
  // Pixel-blind stub: all conditions score identically, drop 0.
  CHECK(summary["guided"]["deletion_drop"].get<double>() == 0.0);

  auto report_dir = pipeline::cmd_report(extract.run_directory, 3, 5);
  CHECK(fs::exists(report_dir / "deletion.svg"));
  CHECK(fs::exists(report_dir / "insertion.svg"));
  CHECK(fs::exists(report_dir / "plot_data.json"));
  CHECK(fs::exists(report_dir / "gallery.md"));

  // Plot bar heights carry the exact aggregate numbers.
  const std::string svg = slurp(report_dir / "deletion.svg");
  const std::string expected =
      "data-value=\"" + json(summary["guided"]["accuracy_deletion"].get<double>()).dump() + "\"";
  CHECK(svg.find(expected) != std::string::npos);
  json plot_data = json::parse(slurp(report_dir / "plot_data.json"));
  CHECK(plot_data[0]["guided"]["accuracy_deletion"] == summary["guided"]["accuracy_deletion"]);

  // Report is a pure function of persisted results: re-running reproduces
  // identical bytes.
  pipeline::cmd_report(extract.run_directory, 3, 5);
  CHECK(slurp(report_dir / "deletion.svg") == svg);
}

TEST_CASE("two runs with the same config and seed are byte-identical") {
  TempTree tree_a("det_a");
  TempTree tree_b("det_b");
  config::RunConfig run_a = stub_config(tree_a.root);
  config::RunConfig run_b = stub_config(tree_b.root);
  run_b.workers = 1;  // thread count must not affect results

  auto extract_a = pipeline::cmd_extract(run_a);
  auto extract_b = pipeline::cmd_extract(run_b);
  pipeline::cmd_evaluate(run_a);
  pipeline::cmd_evaluate(run_b);

  CHECK(extract_a.run_directory.filename() == extract_b.run_directory.filename());
  for (const char* file : {"pairs/stub__fallback/crops.jsonl", "pairs/stub__fallback/results.jsonl",
                           "pairs/stub__fallback/summary.json"}) {
    CHECK(slurp(extract_a.run_directory / file) == slurp(extract_b.run_directory / file));
  }
}

TEST_CASE("per-image failures are isolated and counted") {
  TempTree tree("broken");
  // Copy the dataset and corrupt one eval image.
  const fs::path data = tree.root / "data";
  fs::create_directories(data);
  fs::copy(synth_dataset(), data, fs::copy_options::recursive);
  {
    std::ofstream corrupt(data / "images" / "eval_1_0000.png", std::ios::binary | std::ios::trunc);
    corrupt << "not a png";
  }
  config::RunConfig run = stub_config(tree.root / "runs");
  run.manifest_path = (data / "manifest.jsonl").string();

  auto extract = pipeline::cmd_extract(run);
  const auto& counts = extract.counts.at("stub__fallback");
  CHECK(counts.images == 9);
  CHECK(counts.ok == 8);
  CHECK(counts.failed == 1);
  CHECK(fs::exists(extract.run_directory / "errors.jsonl"));
  auto records = pipeline::read_crop_records(extract.run_directory / "pairs" / "stub__fallback" /
                                             "crops.jsonl");
  CHECK(records.size() == 8);
}

TEST_CASE("constant attribution map yields zero crops and a counted exclusion") {
  TempTree tree("degenerate");
  // A toy CNN with a zeroed head produces identically-zero CAMs.
  config::RunConfig run = stub_config(tree.root);
  run.classifier_backend = "toy-cnn";
  run.attribution_methods = {"refcam"};
  classifier::ToyCnn::Spec spec;
  spec.input_side = 24;
  spec.num_classes = 3;
  spec.c1 = 4;
  spec.c2 = 4;
  spec.c3 = 4;
  classifier::ToyCnn model(spec, 5);
  std::fill(model.params().wfc.begin(), model.params().wfc.end(), 0.0f);
  std::fill(model.params().bfc.begin(), model.params().bfc.end(), 0.0f);
  const fs::path weights = tree.root / "zeroed.bin";
  model.save(weights);
  run.classifier_weights = weights.string();
  run.toy_c1 = 4;
  run.toy_c2 = 4;
  run.toy_c3 = 4;

  auto extract = pipeline::cmd_extract(run);
  const auto& counts = extract.counts.at("refcam__fallback");
  CHECK(counts.ok == 9);
  CHECK(counts.zero_crop == 9);
  CHECK(counts.crops == 0);

  auto evaluate = pipeline::cmd_evaluate(run);
  json summary = json::parse(
      slurp(evaluate.run_directory / "pairs" / "refcam__fallback" / "summary.json"));
  CHECK(summary["excluded"]["zero_crops"].get<int>() == 9);
  CHECK(summary["n_images_evaluated"].get<int>() == 0);
  CHECK_FALSE(summary.contains("guided"));
}

TEST_CASE("evaluate before extract reports missing artifacts") {
  TempTree tree("missing");
  config::RunConfig run = stub_config(tree.root);
  try {
    pipeline::cmd_evaluate(run);
    FAIL("expected MissingArtifacts");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingArtifacts);
  }
}

TEST_CASE("sweep: table shape, degenerate point, monotone coverage in p") {
  TempTree tree("sweep");
  config::RunConfig run = stub_config(tree.root);
  run.faithfulness.random_repeats = 1;

  const fs::path grid_path = tree.root / "grid.json";
  std::ofstream(grid_path) << R"({"p": [10, 20, 40]})";
  auto rows = pipeline::cmd_sweep(run, grid_path);
  REQUIRE(rows.size() == 3);  // one pair per point
  CHECK(rows[0].params.at("p") == 10.0);
  CHECK(rows[2].params.at("p") == 40.0);
  // Coverage is monotone nondecreasing in p (mask monotonicity downstream).
  CHECK(rows[0].coverage <= rows[1].coverage + 1e-12);
  CHECK(rows[1].coverage <= rows[2].coverage + 1e-12);

  // A single-point grid equals the plain evaluate numbers.
  const fs::path single_path = tree.root / "single.json";
  std::ofstream(single_path) << R"({"p": [20]})";
  auto single = pipeline::cmd_sweep(run, single_path);
  REQUIRE(single.size() == 1);
  CHECK(single[0].coverage == doctest::Approx(rows[1].coverage).epsilon(1e-12));
  CHECK(single[0].deletion_drop == doctest::Approx(rows[1].deletion_drop).epsilon(1e-12));

  // Oversized grids are rejected.
  config::RunConfig capped = run;
  capped.max_grid_points = 2;
  try {
    pipeline::cmd_sweep(capped, grid_path);
    FAIL("expected GridTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridTooLarge);
  }
  const fs::path bad_path = tree.root / "bad.json";
  std::ofstream(bad_path) << R"({"batch_size": [1, 2]})";
  CHECK_THROWS_AS(pipeline::cmd_sweep(run, bad_path), Error);
}

TEST_CASE("adapter substitutability: the external classifier drives the same pipeline") {
  TempTree tree("external");
  config::RunConfig run = stub_config(tree.root);
  run.classifier_backend = "external";
  run.classifier_module = GX_TEST_CLASSIFIER_MODULE;
  run.classifier_weights = "";
  run.preprocess.side = 8;  // the test module expects 8x8 inputs

  auto extract = pipeline::cmd_extract(run);
  CHECK(extract.counts.at("stub__fallback").ok == 9);
  auto evaluate = pipeline::cmd_evaluate(run);
  CHECK(evaluate.pairs_evaluated == 1);
}

TEST_CASE("multiple attribution methods produce one summary per pair") {
  TempTree tree("pairs");
  config::RunConfig run = stub_config(tree.root);
  run.classifier_backend = "toy-cnn";
  classifier::ToyCnn::Spec spec;
  spec.input_side = 24;
  spec.num_classes = 3;
  spec.c1 = 4;
  spec.c2 = 4;
  spec.c3 = 4;
  classifier::ToyCnn model(spec, 77);
  const fs::path weights = tree.root / "weights.bin";
  model.save(weights);
  run.classifier_weights = weights.string();
  run.toy_c1 = run.toy_c2 = run.toy_c3 = 4;
  run.attribution_methods = {"refcam", "smoothgrad"};
  run.attribution.smoothgrad_samples = 2;
  run.limit = 4;

  auto extract = pipeline::cmd_extract(run);
  CHECK(extract.pairs.size() == 2);
  pipeline::cmd_evaluate(run);
  CHECK(fs::exists(extract.run_directory / "pairs" / "refcam__fallback" / "summary.json"));
  CHECK(fs::exists(extract.run_directory / "pairs" / "smoothgrad__fallback" / "summary.json"));

  auto report_dir = pipeline::cmd_report(extract.run_directory, 2, 2);
  const std::string svg = slurp(report_dir / "deletion.svg");
  CHECK(svg.find("refcam__fallback") != std::string::npos);
  CHECK(svg.find("smoothgrad__fallback") != std::string::npos);
}

TEST_CASE("run manifest validates artifact existence") {
  TempTree tree("manifesto");
  config::RunConfig run = stub_config(tree.root);
  auto extract = pipeline::cmd_extract(run);
  json manifest = json::parse(slurp(extract.run_directory / "run_manifest.json"));
  CHECK(manifest["config_hash"].get<std::string>() == config::config_hash(run));
  CHECK(manifest["stages"].contains("extract"));
  const auto& stage = manifest["stages"]["extract"];
  CHECK(stage["stub__fallback"]["segments"].get<int>() > 0);
  CHECK(stage["stub__fallback"]["mean_segment_coverage"].get<double>() == 1.0);
  CHECK(stage["class_counts"]["eval"] == json({3, 3, 3}));
  for (const auto& artifact : manifest["artifacts"])
    CHECK(fs::exists(extract.run_directory / artifact.get<std::string>()));
}
