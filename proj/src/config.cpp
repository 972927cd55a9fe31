#include "geoxplain/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "geoxplain/errors.hpp"
#include "geoxplain/rng.hpp"

namespace geoxplain::config {

using nlohmann::json;

namespace {

void check_keys(const json& section, const char* name, const std::set<std::string>& allowed) {
  if (!section.is_object())
    throw Error(ErrorCode::ConfigError, std::string("section '") + name + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    if (!allowed.contains(key))
      throw Error(ErrorCode::ConfigError,
                  std::string("unknown key '") + key + "' in section '" + name + "'");
  }
}

template <typename T>
void read(const json& section, const char* key, T& out) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ConfigError, std::string("key '") + key + "' has the wrong type");
  }
}

void read_color(const json& section, const char* key, std::array<float, 3>& out) {
  if (!section.contains(key)) return;
  auto v = section.at(key).get<std::vector<float>>();
  if (v.size() != 3)
    throw Error(ErrorCode::ConfigError, std::string("'") + key + "' must have 3 entries");
  std::copy(v.begin(), v.end(), out.begin());
}

// Accepts either a singular string key or a plural list key.
std::vector<std::string> read_name_list(const json& section, const char* singular,
                                        const char* plural,
                                        const std::vector<std::string>& fallback) {
  if (section.contains(plural)) {
    auto list = section.at(plural).get<std::vector<std::string>>();
    if (list.empty())
      throw Error(ErrorCode::ConfigError, std::string("'") + plural + "' must not be empty");
    return list;
  }
  if (section.contains(singular)) return {section.at(singular).get<std::string>()};
  return fallback;
}

}  // namespace

RunConfig from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config root must be an object");
  check_keys(j, "(root)",
             {"run", "ingest", "classifier", "attribution", "segmentation", "selection",
              "faithfulness", "report", "sweep"});
  RunConfig config;

  if (j.contains("run")) {
    const auto& run = j.at("run");
    check_keys(run, "run", {"seed", "workers", "limit", "output_dir"});
    read(run, "seed", config.seed);
    read(run, "workers", config.workers);
    read(run, "limit", config.limit);
    read(run, "output_dir", config.output_dir);
  }

  if (j.contains("ingest")) {
    const auto& ingest_section = j.at("ingest");
    check_keys(ingest_section, "ingest",
               {"manifest", "side", "interpolation", "mean", "std", "augment"});
    read(ingest_section, "manifest", config.manifest_path);
    read(ingest_section, "side", config.preprocess.side);
    if (ingest_section.contains("interpolation") &&
        ingest_section.at("interpolation").get<std::string>() != "bilinear")
      throw Error(ErrorCode::ConfigError, "only bilinear interpolation is supported");
    read_color(ingest_section, "mean", config.preprocess.mean);
    read_color(ingest_section, "std", config.preprocess.stddev);
    if (ingest_section.contains("augment")) {
      const auto& augment = ingest_section.at("augment");
      check_keys(augment, "ingest.augment",
                 {"flip_probability", "brightness", "contrast", "saturation"});
      read(augment, "flip_probability", config.augment.flip_probability);
      read(augment, "brightness", config.augment.brightness);
      read(augment, "contrast", config.augment.contrast);
      read(augment, "saturation", config.augment.saturation);
    }
    if (config.preprocess.side < 4)
      throw Error(ErrorCode::ConfigError, "ingest.side must be at least 4");
  }

  if (j.contains("classifier")) {
    const auto& cls = j.at("classifier");
    check_keys(cls, "classifier", {"backend", "weights", "module", "stub_logits", "train", "toy"});
    read(cls, "backend", config.classifier_backend);
    read(cls, "weights", config.classifier_weights);
    read(cls, "module", config.classifier_module);
    read(cls, "stub_logits", config.stub_logits);
    if (cls.contains("train")) {
      const auto& train = cls.at("train");
      check_keys(train, "classifier.train",
                 {"learning_rate", "weight_decay", "label_smoothing", "max_epochs", "patience",
                  "batch_size", "seed", "validation_fraction"});
      read(train, "learning_rate", config.train.learning_rate);
      read(train, "weight_decay", config.train.weight_decay);
      read(train, "label_smoothing", config.train.label_smoothing);
      read(train, "max_epochs", config.train.max_epochs);
      read(train, "patience", config.train.patience);
      read(train, "batch_size", config.train.batch_size);
      read(train, "seed", config.train.seed);
      read(train, "validation_fraction", config.train.validation_fraction);
      if (config.train.label_smoothing < 0.0 || config.train.label_smoothing >= 1.0)
        throw Error(ErrorCode::ConfigError, "label_smoothing must lie in [0, 1)");
      if (config.train.learning_rate <= 0.0 || config.train.max_epochs <= 0 ||
          config.train.patience <= 0 || config.train.batch_size <= 0)
        throw Error(ErrorCode::ConfigError, "train parameters must be positive");
    }
    if (cls.contains("toy")) {
      const auto& toy = cls.at("toy");
      check_keys(toy, "classifier.toy", {"c1", "c2", "c3"});
      read(toy, "c1", config.toy_c1);
      read(toy, "c2", config.toy_c2);
      read(toy, "c3", config.toy_c3);
    }
    const std::set<std::string> known{"toy-cnn", "stub", "external"};
    if (!known.contains(config.classifier_backend))
      throw Error(ErrorCode::ConfigError,
                  "classifier.backend must be toy-cnn, stub or external, got '" +
                      config.classifier_backend + "'");
  }

  if (j.contains("attribution")) {
    const auto& attr = j.at("attribution");
    check_keys(attr, "attribution",
               {"method", "methods", "top_p", "smoothgrad", "module", "weights"});
    config.attribution_methods = read_name_list(attr, "method", "methods", {"refcam"});
    read(attr, "top_p", config.attribution.top_p);
    read(attr, "module", config.attribution.module_path);
    read(attr, "weights", config.attribution.weights_path);
    if (attr.contains("smoothgrad")) {
      const auto& sg = attr.at("smoothgrad");
      check_keys(sg, "attribution.smoothgrad", {"noise_level", "samples", "seed"});
      read(sg, "noise_level", config.attribution.smoothgrad_noise);
      read(sg, "samples", config.attribution.smoothgrad_samples);
      read(sg, "seed", config.attribution.smoothgrad_seed);
    }
    if (!(config.attribution.top_p > 0.0) || config.attribution.top_p > 100.0)
      throw Error(ErrorCode::ConfigError, "attribution.top_p must lie in (0, 100]");
    const auto known = attribution::registered_methods();
    for (const auto& method : config.attribution_methods) {
      if (std::find(known.begin(), known.end(), method) == known.end())
        throw Error(ErrorCode::ConfigError, "unknown attribution method '" + method + "'");
    }
  }

  if (j.contains("segmentation")) {
    const auto& seg = j.at("segmentation");
    check_keys(seg, "segmentation",
               {"backend", "backends", "concepts_file", "fallback_levels", "min_area", "module",
                "weights"});
    config.segmentation_backends = read_name_list(seg, "backend", "backends", {"fallback"});
    read(seg, "concepts_file", config.segmentation.concepts_file);
    read(seg, "fallback_levels", config.segmentation.fallback_levels);
    read(seg, "min_area", config.segmentation.min_area);
    read(seg, "module", config.segmentation.module_path);
    read(seg, "weights", config.segmentation.weights_path);
    const auto known = segmentation::registered_backends();
    for (const auto& backend : config.segmentation_backends) {
      if (std::find(known.begin(), known.end(), backend) == known.end())
        throw Error(ErrorCode::ConfigError, "unknown segmentation backend '" + backend + "'");
    }
  }

  if (j.contains("selection")) {
    const auto& sel = j.at("selection");
    check_keys(sel, "selection",
               {"s_min", "iou_threshold", "containment_threshold", "area_ratio_gate",
                "pad_fraction", "max_elements"});
    read(sel, "s_min", config.selection.s_min);
    read(sel, "iou_threshold", config.selection.iou_threshold);
    read(sel, "containment_threshold", config.selection.containment_threshold);
    read(sel, "area_ratio_gate", config.selection.area_ratio_gate);
    read(sel, "pad_fraction", config.selection.pad_fraction);
    if (sel.contains("max_elements")) {
      const auto& me = sel.at("max_elements");
      if (me.is_null()) config.selection.max_elements.reset();
      else config.selection.max_elements = me.get<int>();
    }
    const auto& s = config.selection;
    if (s.iou_threshold < 0.0 || s.iou_threshold > 1.0 || s.containment_threshold < 0.0 ||
        s.containment_threshold > 1.0 || s.area_ratio_gate < 1.0 || s.pad_fraction < 0.0)
      throw Error(ErrorCode::ConfigError, "selection thresholds out of range");
  }

  if (j.contains("faithfulness")) {
    const auto& faith = j.at("faithfulness");
    check_keys(faith, "faithfulness", {"random_repeats", "fill", "fill_color"});
    read(faith, "random_repeats", config.faithfulness.random_repeats);
    read(faith, "fill", config.faithfulness.fill);
    read_color(faith, "fill_color", config.faithfulness.fill_color);
    if (config.faithfulness.random_repeats < 0)
      throw Error(ErrorCode::ConfigError, "faithfulness.random_repeats must be >= 0");
  }

  if (j.contains("report")) {
    const auto& rep = j.at("report");
    check_keys(rep, "report", {"gallery_top_k", "gallery_max_images", "export_crop_images"});
    read(rep, "gallery_top_k", config.gallery_top_k);
    read(rep, "gallery_max_images", config.gallery_max_images);
    read(rep, "export_crop_images", config.export_crop_images);
  }

  if (j.contains("sweep")) {
    const auto& sweep = j.at("sweep");
    check_keys(sweep, "sweep", {"max_grid_points"});
    read(sweep, "max_grid_points", config.max_grid_points);
  }

  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file: " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw Error(ErrorCode::ConfigError, "config file is not valid JSON: " + path.string());
  return from_json(j);
}

json to_json(const RunConfig& c) {
  json j;
  j["run"] = {{"seed", c.seed}, {"workers", c.workers}, {"limit", c.limit},
              {"output_dir", c.output_dir}};
  j["ingest"] = {
      {"manifest", c.manifest_path},
      {"side", c.preprocess.side},
      {"interpolation", "bilinear"},
      {"mean", std::vector<float>(c.preprocess.mean.begin(), c.preprocess.mean.end())},
      {"std", std::vector<float>(c.preprocess.stddev.begin(), c.preprocess.stddev.end())},
      {"augment",
       {{"flip_probability", c.augment.flip_probability},
        {"brightness", c.augment.brightness},
        {"contrast", c.augment.contrast},
        {"saturation", c.augment.saturation}}}};
  j["classifier"] = {{"backend", c.classifier_backend},
                     {"weights", c.classifier_weights},
                     {"module", c.classifier_module},
                     {"stub_logits", c.stub_logits},
                     {"train",
                      {{"learning_rate", c.train.learning_rate},
                       {"weight_decay", c.train.weight_decay},
                       {"label_smoothing", c.train.label_smoothing},
                       {"max_epochs", c.train.max_epochs},
                       {"patience", c.train.patience},
                       {"batch_size", c.train.batch_size},
                       {"seed", c.train.seed},
                       {"validation_fraction", c.train.validation_fraction}}},
                     {"toy", {{"c1", c.toy_c1}, {"c2", c.toy_c2}, {"c3", c.toy_c3}}}};
  j["attribution"] = {{"methods", c.attribution_methods},
                      {"top_p", c.attribution.top_p},
                      {"smoothgrad",
                       {{"noise_level", c.attribution.smoothgrad_noise},
                        {"samples", c.attribution.smoothgrad_samples},
                        {"seed", c.attribution.smoothgrad_seed}}},
                      {"module", c.attribution.module_path},
                      {"weights", c.attribution.weights_path}};
  j["segmentation"] = {{"backends", c.segmentation_backends},
                       {"concepts_file", c.segmentation.concepts_file},
                       {"fallback_levels", c.segmentation.fallback_levels},
                       {"min_area", c.segmentation.min_area},
                       {"module", c.segmentation.module_path},
                       {"weights", c.segmentation.weights_path}};
  j["selection"] = {{"s_min", c.selection.s_min},
                    {"iou_threshold", c.selection.iou_threshold},
                    {"containment_threshold", c.selection.containment_threshold},
                    {"area_ratio_gate", c.selection.area_ratio_gate},
                    {"pad_fraction", c.selection.pad_fraction}};
  if (c.selection.max_elements) j["selection"]["max_elements"] = *c.selection.max_elements;
  else j["selection"]["max_elements"] = nullptr;
  j["faithfulness"] = {
      {"random_repeats", c.faithfulness.random_repeats},
      {"fill", c.faithfulness.fill},
      {"fill_color",
       std::vector<float>(c.faithfulness.fill_color.begin(), c.faithfulness.fill_color.end())}};
  j["report"] = {{"gallery_top_k", c.gallery_top_k},
                 {"gallery_max_images", c.gallery_max_images},
                 {"export_crop_images", c.export_crop_images}};
  j["sweep"] = {{"max_grid_points", c.max_grid_points}};
  return j;
}

void write_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot open for write: " + path.string());
  out << to_json(config).dump(2) << "\n";
}

std::string config_hash(const RunConfig& config) {
  json canonical = to_json(config);
  // Execution details that cannot change results do not change run identity.
  canonical["run"].erase("workers");
  canonical["run"].erase("output_dir");
  canonical["report"].erase("gallery_top_k");
  canonical["report"].erase("gallery_max_images");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical.dump())));
  return buf;
}

std::filesystem::path run_root(const RunConfig& config) {
  if (const char* cache = std::getenv("GEOXPLAIN_CACHE"); cache && *cache)
    return std::filesystem::path(cache);
  return std::filesystem::path(config.output_dir);
}

std::filesystem::path run_dir(const RunConfig& config) {
  return run_root(config) / config_hash(config);
}

}  // namespace geoxplain::config
