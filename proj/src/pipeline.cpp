#include "geoxplain/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <optional>
#include <set>

#include <json.hpp>

#include "geoxplain/attribution.hpp"
#include "geoxplain/errors.hpp"
#include "geoxplain/external_adapter.hpp"
#include "geoxplain/faithfulness.hpp"
#include "geoxplain/image_io.hpp"
#include "geoxplain/npy.hpp"
#include "geoxplain/parallel.hpp"
#include "geoxplain/report.hpp"
#include "geoxplain/rle.hpp"
#include "geoxplain/rng.hpp"
#include "geoxplain/toy_cnn.hpp"

namespace geoxplain::pipeline {

using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "geoxplain 0.1.0";

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::filesystem::path resolve_uri(const std::filesystem::path& manifest_dir,
                                  const std::string& uri) {
  std::filesystem::path p(uri);
  return p.is_relative() ? manifest_dir / p : p;
}

// Appends a stage record and re-validates that every referenced artifact
// exists before the manifest is written out.
void update_run_manifest(const std::filesystem::path& run_directory, const std::string& hash,
                         const std::string& stage, const json& payload,
                         const std::vector<std::string>& artifacts) {
  const auto path = run_directory / "run_manifest.json";
  json manifest;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    manifest = json::parse(in, nullptr, false);
    if (manifest.is_discarded()) manifest = json::object();
  }
  manifest["config_hash"] = hash;
  manifest["tool_version"] = kToolVersion;
  if (!manifest.contains("created_at")) manifest["created_at"] = now_iso8601();
  manifest["updated_at"] = now_iso8601();
  manifest["stages"][stage] = payload;

  std::set<std::string> all;
  if (manifest.contains("artifacts")) {
    for (const auto& a : manifest["artifacts"]) all.insert(a.get<std::string>());
  }
  for (const auto& a : artifacts) all.insert(a);
  for (const auto& a : all) {
    if (!std::filesystem::exists(run_directory / a))
      throw Error(ErrorCode::MissingArtifacts,
                  "run manifest references missing artifact: " + a);
  }
  manifest["artifacts"] = std::vector<std::string>(all.begin(), all.end());

  std::ofstream out(path);
  out << manifest.dump(2) << "\n";
}

json mask_to_json(const BitGrid& bits) {
  return json(rle::encode(bits));
}

json element_to_json(const selection::SelectedElement& element, int rank) {
  return json{{"rank", rank},
              {"segment_id", element.scored.segment_id},
              {"row0", element.box.row0},
              {"col0", element.box.col0},
              {"row1", element.box.row1},
              {"col1", element.box.col1},
              {"score", element.scored.score},
              {"overlap", element.scored.overlap_factor},
              {"mean_importance", element.scored.mean_importance},
              {"central_importance", element.scored.central_importance}};
}

struct LoadedEval {
  ingest::DatasetManifest manifest;
  std::filesystem::path manifest_dir;
  std::vector<ingest::ImageRecord> records;
};

LoadedEval load_eval_records(const config::RunConfig& config) {
  if (config.manifest_path.empty())
    throw Error(ErrorCode::ConfigError, "ingest.manifest must point at a dataset manifest");
  LoadedEval loaded;
  loaded.manifest = ingest::load_manifest(config.manifest_path);
  loaded.manifest_dir = std::filesystem::path(config.manifest_path).parent_path();
  loaded.records = loaded.manifest.split_records(ingest::Split::eval);
  if (config.limit > 0 && static_cast<int>(loaded.records.size()) > config.limit)
    loaded.records.resize(config.limit);
  return loaded;
}

std::vector<PairKey> configured_pairs(const config::RunConfig& config) {
  std::vector<PairKey> pairs;
  for (const auto& method : config.attribution_methods) {
    for (const auto& backend : config.segmentation_backends)
      pairs.push_back({method, backend});
  }
  return pairs;
}

struct PerImageLog {
  std::string image_id;
  std::string status;  // ok | failed
  std::string error;
  double ms = 0.0;
};

void write_stage_log(const std::filesystem::path& run_directory, const std::string& stage,
                     const std::string& pair, const std::vector<PerImageLog>& entries) {
  std::filesystem::create_directories(run_directory / "logs");
  std::ofstream out(run_directory / "logs" / (stage + ".jsonl"), std::ios::app);
  for (const auto& e : entries) {
    json line{{"stage", stage}, {"pair", pair}, {"image_id", e.image_id},
              {"status", e.status}, {"ms", e.ms}};
    if (!e.error.empty()) line["error"] = e.error;
    out << line.dump() << "\n";
  }
}

}  // namespace

std::string sanitize_id(const std::string& id) {
  std::string safe;
  bool changed = false;
  for (char ch : id) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '_' || ch == '-' || ch == '.';
    safe.push_back(ok ? ch : '_');
    changed |= !ok;
  }
  if (changed) {
    char suffix[18];
    std::snprintf(suffix, sizeof(suffix), "-%08x",
                  static_cast<unsigned>(fnv1a64(id) & 0xffffffffu));
    safe += suffix;
  }
  return safe;
}

std::unique_ptr<classifier::ClassifierAdapter> make_classifier(const config::RunConfig& config,
                                                               int manifest_num_classes) {
  std::unique_ptr<classifier::ClassifierAdapter> model;
  if (config.classifier_backend == "stub") {
    std::vector<float> logits = config.stub_logits;
    if (logits.empty()) logits.assign(manifest_num_classes, 0.0f);
    model = std::make_unique<classifier::StubClassifier>(logits, config.preprocess.side);
  } else if (config.classifier_backend == "toy-cnn") {
    std::filesystem::path weights = config.classifier_weights;
    if (weights.empty()) weights = config::run_dir(config) / "model" / "toy_cnn.bin";
    if (!std::filesystem::exists(weights))
      throw Error(ErrorCode::ConfigError,
                  "toy-cnn weights not found at '" + weights.string() +
                      "'; run the train command first or set classifier.weights");
    model = classifier::ToyCnn::load(weights);
  } else if (config.classifier_backend == "external") {
    if (config.classifier_module.empty())
      throw Error(ErrorCode::ConfigError, "classifier.module is required for the external backend");
    model = std::make_unique<external::ExternalClassifier>(config.classifier_module,
                                                           config.classifier_weights);
  } else {
    throw Error(ErrorCode::ConfigError,
                "unknown classifier backend '" + config.classifier_backend + "'");
  }
  if (manifest_num_classes > 0 && model->num_classes() != manifest_num_classes)
    throw Error(ErrorCode::ConfigError,
                "classifier has " + std::to_string(model->num_classes()) +
                    " classes but the manifest declares " + std::to_string(manifest_num_classes));
  return model;
}

ExtractOutcome cmd_extract(const config::RunConfig& config) {
  par::set_max_threads(config.workers);
  LoadedEval loaded = load_eval_records(config);

  std::unique_ptr<classifier::ClassifierAdapter> model;
  try {
    model = make_classifier(config, loaded.manifest.num_classes);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BackendFailure)
      throw Error(ErrorCode::FatalBackendError, e.what());
    throw;
  }

  const auto run_directory = config::run_dir(config);
  std::filesystem::create_directories(run_directory);
  config::write_config(config, run_directory / "config.json");

  std::vector<std::string> concepts;
  if (!config.segmentation.concepts_file.empty()) {
    concepts = segmentation::load_concepts(config.segmentation.concepts_file);
    bool any_capable = false;
    for (const auto& backend : config.segmentation_backends)
      any_capable |= segmentation::backend_supports_concepts(backend);
    if (!any_capable)
      throw Error(ErrorCode::ConfigError,
                  "segmentation.concepts_file is set but no configured backend accepts concepts");
  }

  ExtractOutcome outcome;
  outcome.run_directory = run_directory;
  outcome.pairs = configured_pairs(config);

  ingest::PreprocessConfig raw_config = config.preprocess;
  raw_config.normalization = Normalization::raw_0_1;

  const std::string hash = config::config_hash(config);
  std::vector<std::string> artifacts;

  for (const auto& pair : outcome.pairs) {
    const auto pair_dir = run_directory / "pairs" / pair.dir_name();
    std::filesystem::create_directories(pair_dir / "attribution");
    std::filesystem::create_directories(pair_dir / "saliency");
    std::filesystem::create_directories(pair_dir / "segments");
    if (config.export_crop_images) std::filesystem::create_directories(pair_dir / "crop_images");

    StageCounts counts;
    counts.images = static_cast<int>(loaded.records.size());
    const std::size_t n = loaded.records.size();
    std::vector<std::optional<std::string>> crop_lines(n);
    std::vector<PerImageLog> logs(n);
    std::vector<std::int64_t> segment_counts(n, 0), crop_counts(n, 0);
    std::vector<double> segment_coverage(n, 0.0);

    const std::vector<std::string>& backend_concepts =
        segmentation::backend_supports_concepts(pair.backend) ? concepts
                                                              : std::vector<std::string>{};

    const bool par = par::enabled() && model->thread_safe_inference();
#pragma omp parallel for schedule(dynamic) if (par)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      const auto& record = loaded.records[i];
      const double t0 = omp_get_wtime();
      logs[i].image_id = record.id;
      try {
        const auto image_path = resolve_uri(loaded.manifest_dir, record.uri);
        const ImageTensor raw = ingest::preprocess(ingest::load_image(image_path), raw_config);
        const ImageTensor standardized = ingest::standardize(raw, config.preprocess);

        const int target = classifier::predict_top1(*model, standardized).first;
        attribution::AttributionMap map = attribution::compute_attribution(
            *model, standardized, target, pair.method, config.attribution);
        attribution::SaliencyMask saliency =
            attribution::threshold_top_p(map, config.attribution.top_p);
        segmentation::SegmentSet segments = segmentation::segment_image(
            raw, pair.backend, backend_concepts, config.segmentation, record.id);
        std::vector<selection::SelectedElement> elements =
            selection::select_elements(map, saliency, segments, config.selection);

        const std::string safe = sanitize_id(record.id);
        npy::write_f32(pair_dir / "attribution" / (safe + ".npy"), map.values);
        {
          std::ofstream sidecar(pair_dir / "attribution" / (safe + ".json"));
          sidecar << json{{"image_id", record.id},
                          {"method", map.method},
                          {"target_class", map.target_class}}
                         .dump()
                  << "\n";
        }
        {
          std::ofstream mask_out(pair_dir / "saliency" / (safe + ".json"));
          mask_out << json{{"image_id", record.id},
                           {"height", saliency.bits.rows()},
                           {"width", saliency.bits.cols()},
                           {"percentile_p", saliency.percentile_p},
                           {"runs", mask_to_json(saliency.bits)}}
                          .dump()
                   << "\n";
        }
        {
          json segs = json::array();
          for (const auto& segment : segments.segments) {
            json s{{"segment_id", segment.segment_id},
                   {"area", segment.area},
                   {"source", segment.source},
                   {"runs", mask_to_json(segment.bits)}};
            if (segment.concept_hint) s["concept_hint"] = *segment.concept_hint;
            segs.push_back(std::move(s));
          }
          std::ofstream seg_out(pair_dir / "segments" / (safe + ".json"));
          seg_out << json{{"image_id", record.id},
                          {"backend", pair.backend},
                          {"height", raw.height},
                          {"width", raw.width},
                          {"segments", std::move(segs)}}
                         .dump()
                  << "\n";
        }
        if (config.export_crop_images) {
          for (std::size_t rank = 0; rank < elements.size(); ++rank) {
            const auto& box = elements[rank].box;
            ImageTensor crop(box.height(), box.width(), Normalization::raw_0_1);
            for (int ch = 0; ch < 3; ++ch) {
              for (int r = 0; r < crop.height; ++r) {
                for (int c = 0; c < crop.width; ++c)
                  crop.at(ch, r, c) = raw.at(ch, box.row0 + r, box.col0 + c);
              }
            }
            ingest::save_png(pair_dir / "crop_images" /
                                 (safe + "_" + std::to_string(rank) + ".png"),
                             ingest::to_decoded(crop));
          }
        }

        json elements_json = json::array();
        for (std::size_t rank = 0; rank < elements.size(); ++rank)
          elements_json.push_back(element_to_json(elements[rank], static_cast<int>(rank)));
        crop_lines[i] = json{{"image_id", record.id},
                             {"uri", record.uri},
                             {"label", record.label},
                             {"target_class", target},
                             {"elements", std::move(elements_json)}}
                            .dump();
        segment_counts[i] = static_cast<std::int64_t>(segments.segments.size());
        crop_counts[i] = static_cast<std::int64_t>(elements.size());
        {
          BitGrid covered(raw.height, raw.width);
          for (const auto& segment : segments.segments) {
            for (std::size_t px = 0; px < covered.size(); ++px) {
              if (segment.bits[px]) covered[px] = 1;
            }
          }
          segment_coverage[i] =
              static_cast<double>(popcount(covered)) / static_cast<double>(covered.size());
        }
        logs[i].status = "ok";
      } catch (const std::exception& e) {
        logs[i].status = "failed";
        logs[i].error = e.what();
      }
      logs[i].ms = (omp_get_wtime() - t0) * 1000.0;
    }

    std::ofstream crops_out(pair_dir / "crops.jsonl");
    std::ofstream errors_out(run_directory / "errors.jsonl", std::ios::app);
    for (std::size_t i = 0; i < n; ++i) {
      if (crop_lines[i]) {
        crops_out << *crop_lines[i] << "\n";
        ++counts.ok;
        counts.segments += segment_counts[i];
        counts.crops += crop_counts[i];
        counts.mean_segment_coverage += segment_coverage[i];
        if (crop_counts[i] == 0) ++counts.zero_crop;
      } else {
        ++counts.failed;
        errors_out << json{{"stage", "extract"},
                           {"pair", pair.dir_name()},
                           {"image_id", loaded.records[i].id},
                           {"error", logs[i].error}}
                          .dump()
                   << "\n";
      }
    }
    crops_out.close();
    if (counts.ok > 0) counts.mean_segment_coverage /= counts.ok;
    write_stage_log(run_directory, "extract", pair.dir_name(), logs);

    if (counts.images > 0 && counts.ok == 0)
      throw Error(ErrorCode::FatalBackendError,
                  "every image failed during extract for pair " + pair.dir_name() +
                      "; first error: " + (logs.empty() ? "?" : logs[0].error));

    outcome.counts[pair.dir_name()] = counts;
    artifacts.push_back("pairs/" + pair.dir_name() + "/crops.jsonl");
  }

  json stage_payload;
  for (const auto& [pair_name, counts] : outcome.counts) {
    stage_payload[pair_name] = {{"images", counts.images},
                                {"ok", counts.ok},
                                {"failed", counts.failed},
                                {"zero_crop", counts.zero_crop},
                                {"segments", counts.segments},
                                {"mean_segment_coverage", counts.mean_segment_coverage},
                                {"crops", counts.crops}};
  }
  {
    // Per-split class counts, reported (never enforced).
    auto counts_by_split = ingest::split_class_counts(loaded.manifest);
    stage_payload["class_counts"] = {
        {"train", counts_by_split[ingest::Split::train]},
        {"eval", counts_by_split[ingest::Split::eval]},
        {"class_names", loaded.manifest.class_names}};
  }
  update_run_manifest(run_directory, hash, "extract", stage_payload, artifacts);
  return outcome;
}

std::vector<CropRecord> read_crop_records(const std::filesystem::path& crops_file) {
  std::ifstream in(crops_file);
  if (!in) throw Error(ErrorCode::MissingArtifacts, "missing crops file: " + crops_file.string());
  std::vector<CropRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json row = json::parse(line, nullptr, false);
    if (row.is_discarded())
      throw Error(ErrorCode::SchemaError, "invalid crops line in " + crops_file.string());
    CropRecord record;
    record.image_id = row.at("image_id").get<std::string>();
    record.uri = row.at("uri").get<std::string>();
    record.label = row.at("label").get<int>();
    record.target_class = row.at("target_class").get<int>();
    for (const auto& e : row.at("elements")) {
      selection::SelectedElement element;
      element.box.row0 = e.at("row0").get<int>();
      element.box.col0 = e.at("col0").get<int>();
      element.box.row1 = e.at("row1").get<int>();
      element.box.col1 = e.at("col1").get<int>();
      element.box.source_segment_id = e.at("segment_id").get<int>();
      element.box.score = e.at("score").get<double>();
      element.scored.segment_id = element.box.source_segment_id;
      element.scored.score = element.box.score;
      element.scored.overlap_factor = e.at("overlap").get<double>();
      element.scored.mean_importance = e.at("mean_importance").get<double>();
      element.scored.central_importance = e.at("central_importance").get<double>();
      record.elements.push_back(std::move(element));
    }
    records.push_back(std::move(record));
  }
  return records;
}

EvaluateOutcome cmd_evaluate(const config::RunConfig& config) {
  par::set_max_threads(config.workers);
  const auto run_directory = config::run_dir(config);
  if (!std::filesystem::exists(run_directory / "pairs"))
    throw Error(ErrorCode::MissingArtifacts,
                "no extract artifacts under '" + run_directory.string() + "'; run extract first");

  LoadedEval loaded = load_eval_records(config);
  auto model = make_classifier(config, loaded.manifest.num_classes);

  ingest::PreprocessConfig raw_config = config.preprocess;
  raw_config.normalization = Normalization::raw_0_1;

  const std::string hash = config::config_hash(config);
  std::vector<std::string> artifacts;
  EvaluateOutcome outcome;
  outcome.run_directory = run_directory;

  json stage_payload;
  for (const auto& pair : configured_pairs(config)) {
    const auto pair_dir = run_directory / "pairs" / pair.dir_name();
    const auto crops_file = pair_dir / "crops.jsonl";
    if (!std::filesystem::exists(crops_file))
      throw Error(ErrorCode::MissingArtifacts,
                  "missing " + crops_file.string() + "; run extract first");
    const std::vector<CropRecord> records = read_crop_records(crops_file);

    const std::size_t n = records.size();
    std::vector<std::vector<faithfulness::FaithfulnessResult>> per_image(n);
    std::vector<PerImageLog> logs(n);
    std::vector<int> zero_crop(n, 0), failed(n, 0);

    const bool par = par::enabled() && model->thread_safe_inference();
#pragma omp parallel for schedule(dynamic) if (par)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      const auto& record = records[i];
      const double t0 = omp_get_wtime();
      logs[i].image_id = record.image_id;
      try {
        if (record.elements.empty()) {
          zero_crop[i] = 1;
          logs[i].status = "excluded_zero_crops";
        } else {
          const auto image_path = resolve_uri(loaded.manifest_dir, record.uri);
          const ImageTensor raw = ingest::preprocess(ingest::load_image(image_path), raw_config);
          std::vector<selection::CropBox> boxes;
          for (const auto& element : record.elements) boxes.push_back(element.box);
          per_image[i] = faithfulness::evaluate_image(*model, raw, record.image_id, record.label,
                                                      boxes, config.faithfulness,
                                                      config.preprocess, config.seed);
          logs[i].status = "ok";
        }
      } catch (const std::exception& e) {
        failed[i] = 1;
        logs[i].status = "failed";
        logs[i].error = e.what();
      }
      logs[i].ms = (omp_get_wtime() - t0) * 1000.0;
    }

    std::vector<faithfulness::FaithfulnessResult> all_results;
    std::ofstream results_out(pair_dir / "results.jsonl");
    std::ofstream errors_out(run_directory / "errors.jsonl", std::ios::app);
    int n_zero = 0, n_failed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      n_zero += zero_crop[i];
      if (failed[i]) {
        ++n_failed;
        errors_out << json{{"stage", "evaluate"},
                           {"pair", pair.dir_name()},
                           {"image_id", records[i].image_id},
                           {"error", logs[i].error}}
                          .dump()
                   << "\n";
        continue;
      }
      for (const auto& r : per_image[i]) {
        results_out << json{{"image_id", r.image_id},
                            {"label", r.label},
                            {"condition", faithfulness::condition_name(r.condition)},
                            {"repeat_index", r.repeat_index},
                            {"pred_original", r.pred_original},
                            {"pred_deletion", r.pred_deletion},
                            {"pred_insertion", r.pred_insertion},
                            {"coverage_fraction", r.coverage_fraction}}
                           .dump()
                    << "\n";
        all_results.push_back(r);
      }
    }
    results_out.close();
    write_stage_log(run_directory, "evaluate", pair.dir_name(), logs);

    json summary{{"attribution_method", pair.method},
                 {"segmentation_backend", pair.backend},
                 {"config_hash", hash},
                 {"n_images_evaluated", static_cast<int>(n) - n_zero - n_failed},
                 {"excluded", {{"zero_crops", n_zero}, {"failed", n_failed}}}};
    if (!all_results.empty()) {
      const faithfulness::AggregateReport agg = faithfulness::aggregate(all_results);
      auto condition_json = [](const faithfulness::ConditionAggregate& c) {
        return json{{"accuracy_original", c.accuracy_original},
                    {"accuracy_deletion", c.accuracy_deletion},
                    {"accuracy_insertion", c.accuracy_insertion},
                    {"deletion_drop", c.deletion_drop},
                    {"mean_coverage", c.mean_coverage},
                    {"agreement_deletion", c.agreement_deletion},
                    {"agreement_insertion", c.agreement_insertion},
                    {"n_images", c.n_images}};
      };
      summary["guided"] = condition_json(agg.guided);
      summary["random"] = condition_json(agg.random);
    }
    std::ofstream summary_out(pair_dir / "summary.json");
    summary_out << summary.dump(2) << "\n";
    summary_out.close();

    artifacts.push_back("pairs/" + pair.dir_name() + "/results.jsonl");
    artifacts.push_back("pairs/" + pair.dir_name() + "/summary.json");
    stage_payload[pair.dir_name()] = {{"evaluated", static_cast<int>(n) - n_zero - n_failed},
                                      {"zero_crops", n_zero},
                                      {"failed", n_failed}};
    ++outcome.pairs_evaluated;
  }

  update_run_manifest(run_directory, hash, "evaluate", stage_payload, artifacts);
  return outcome;
}

std::filesystem::path cmd_report(const std::filesystem::path& run_directory, int gallery_top_k,
                                 int gallery_max_images) {
  if (!std::filesystem::exists(run_directory / "pairs"))
    throw Error(ErrorCode::MissingResults,
                "no evaluate artifacts under '" + run_directory.string() + "'");
  report::write_reports(run_directory, gallery_top_k, gallery_max_images);
  return run_directory / "report";
}

std::vector<SweepRow> cmd_sweep(const config::RunConfig& config,
                                const std::filesystem::path& grid_path,
                                std::filesystem::path* table_dir) {
  std::ifstream in(grid_path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open grid file: " + grid_path.string());
  json grid = json::parse(in, nullptr, false);
  if (grid.is_discarded() || !grid.is_object())
    throw Error(ErrorCode::ConfigError, "grid file must be a JSON object of parameter lists");

  const std::set<std::string> allowed{"p",           "s_min",          "iou_threshold",
                                      "containment_threshold", "area_ratio_gate", "pad_fraction"};
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  std::size_t points = 1;
  for (const auto& [key, values] : grid.items()) {
    if (!allowed.contains(key))
      throw Error(ErrorCode::ConfigError, "grid parameter '" + key + "' is not sweepable");
    auto list = values.get<std::vector<double>>();
    if (list.empty()) throw Error(ErrorCode::ConfigError, "grid parameter '" + key + "' is empty");
    points *= list.size();
    axes.emplace_back(key, std::move(list));
  }
  if (axes.empty()) throw Error(ErrorCode::ConfigError, "grid file has no parameters");
  if (points > static_cast<std::size_t>(config.max_grid_points))
    throw Error(ErrorCode::GridTooLarge,
                std::to_string(points) + " grid points exceed the cap of " +
                    std::to_string(config.max_grid_points));

  std::vector<SweepRow> rows;
  std::vector<std::size_t> index(axes.size(), 0);
  for (std::size_t point = 0; point < points; ++point) {
    config::RunConfig patched = config;
    std::map<std::string, double> params;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const double value = axes[a].second[index[a]];
      params[axes[a].first] = value;
      if (axes[a].first == "p") patched.attribution.top_p = value;
      else if (axes[a].first == "s_min") patched.selection.s_min = value;
      else if (axes[a].first == "iou_threshold") patched.selection.iou_threshold = value;
      else if (axes[a].first == "containment_threshold") patched.selection.containment_threshold = value;
      else if (axes[a].first == "area_ratio_gate") patched.selection.area_ratio_gate = value;
      else if (axes[a].first == "pad_fraction") patched.selection.pad_fraction = value;
    }

    // Completed points (summary already on disk) are reused, not recomputed.
    const auto patched_dir = config::run_dir(patched);
    bool cached = true;
    for (const auto& pair : configured_pairs(patched)) {
      if (!std::filesystem::exists(patched_dir / "pairs" / pair.dir_name() / "summary.json"))
        cached = false;
    }
    if (!cached) {
      cmd_extract(patched);
      cmd_evaluate(patched);
    }

    for (const auto& pair : configured_pairs(patched)) {
      std::ifstream summary_in(patched_dir / "pairs" / pair.dir_name() / "summary.json");
      json summary = json::parse(summary_in);
      SweepRow row;
      row.params = params;
      row.method = pair.method;
      row.backend = pair.backend;
      if (summary.contains("guided")) {
        row.coverage = summary["guided"]["mean_coverage"].get<double>();
        row.deletion_drop = summary["guided"]["deletion_drop"].get<double>();
        row.insertion_accuracy = summary["guided"]["accuracy_insertion"].get<double>();
      }
      rows.push_back(std::move(row));
    }

    for (std::size_t a = axes.size(); a-- > 0;) {
      if (++index[a] < axes[a].second.size()) break;
      index[a] = 0;
    }
  }

  // Persist the table next to the swept runs.
  json grid_key{{"base", config::config_hash(config)}, {"grid", grid}};
  char hash_buf[17];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(grid_key.dump())));
  const auto sweep_dir = config::run_root(config) / "sweeps" / hash_buf;
  std::filesystem::create_directories(sweep_dir);
  {
    std::ofstream csv(sweep_dir / "sweep.csv");
    csv << report::sweep_table_csv(rows);
    json rows_json = json::array();
    for (const auto& row : rows) {
      rows_json.push_back({{"params", row.params}, {"method", row.method},
                           {"backend", row.backend}, {"coverage", row.coverage},
                           {"deletion_drop", row.deletion_drop},
                           {"insertion_accuracy", row.insertion_accuracy}});
    }
    std::ofstream js(sweep_dir / "sweep.json");
    js << rows_json.dump(2) << "\n";
  }
  if (table_dir) *table_dir = sweep_dir;
  return rows;
}

TrainOutcome cmd_train(const config::RunConfig& config) {
  par::set_max_threads(config.workers);
  if (config.classifier_backend != "toy-cnn")
    throw Error(ErrorCode::ConfigError, "the train command targets the toy-cnn backend");
  if (config.manifest_path.empty())
    throw Error(ErrorCode::ConfigError, "ingest.manifest must point at a dataset manifest");

  const auto manifest = ingest::load_manifest(config.manifest_path);
  const auto manifest_dir = std::filesystem::path(config.manifest_path).parent_path();

  classifier::ToyCnn::Spec spec;
  spec.input_side = config.preprocess.side;
  spec.num_classes = manifest.num_classes;
  spec.c1 = config.toy_c1;
  spec.c2 = config.toy_c2;
  spec.c3 = config.toy_c3;

  classifier::TrainedModel trained = classifier::train_classifier(
      manifest, manifest_dir, config.train, config.augment, config.preprocess, spec);

  const auto run_directory = config::run_dir(config);
  std::filesystem::create_directories(run_directory / "model");
  config::write_config(config, run_directory / "config.json");

  TrainOutcome outcome;
  outcome.weights_path = config.classifier_weights.empty()
                             ? run_directory / "model" / "toy_cnn.bin"
                             : std::filesystem::path(config.classifier_weights);
  if (outcome.weights_path.has_parent_path())
    std::filesystem::create_directories(outcome.weights_path.parent_path());
  trained.model->save(outcome.weights_path);
  outcome.report_path = run_directory / "train_report.json";
  classifier::write_train_report(trained.report, outcome.report_path);
  outcome.report = std::move(trained.report);

  json payload{{"weights", outcome.weights_path.string()},
               {"best_epoch", outcome.report.best_epoch},
               {"final_train_accuracy", outcome.report.final_train_accuracy},
               {"final_val_accuracy", outcome.report.final_val_accuracy},
               {"epochs_run", outcome.report.epochs.size()}};
  update_run_manifest(run_directory, config::config_hash(config), "train", payload,
                      {"train_report.json"});
  return outcome;
}

}  // namespace geoxplain::pipeline
