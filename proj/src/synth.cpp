#include "geoxplain/synth.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "geoxplain/errors.hpp"
#include "geoxplain/image_io.hpp"
#include "geoxplain/rng.hpp"

namespace geoxplain::synth {

using nlohmann::json;

namespace {

void paint(ImageTensor& image, int r, int c, float red, float green, float blue) {
  const std::size_t plane = image.plane();
  const std::size_t px = static_cast<std::size_t>(r) * image.width + c;
  image.values[px] = red;
  image.values[plane + px] = green;
  image.values[2 * plane + px] = blue;
}

}  // namespace

SynthImage make_image(const SynthConfig& config, ingest::Split split, int label, int index) {
  if (label < 0 || label > 2) throw Error(ErrorCode::ConfigError, "synth labels are 0..2");
  const int side = config.side;
  if (side < config.cue_max + 4)
    throw Error(ErrorCode::ConfigError, "synth side too small for the configured cue size");

  SynthImage out;
  char id[64];
  std::snprintf(id, sizeof(id), "%s_%d_%04d", ingest::split_name(split), label, index);
  out.id = id;
  out.label = label;
  out.split = split;

  Pcg32 rng(derive_seed(config.seed, out.id, 0));
  ImageTensor image(side, side, Normalization::raw_0_1);

  // Muted base tone.
  const float base = static_cast<float>(rng.uniform(0.35, 0.55));
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      paint(image, r, c, base + static_cast<float>(rng.uniform(-0.02, 0.02)),
            base + static_cast<float>(rng.uniform(-0.02, 0.02)),
            base + static_cast<float>(rng.uniform(-0.02, 0.02)));
    }
  }

  // Structured clutter: desaturated rectangles, identical distribution for
  // every class.
  const int n_rects = 6 + static_cast<int>(rng.bounded(7));
  for (int k = 0; k < n_rects; ++k) {
    const int rh = 4 + static_cast<int>(rng.bounded(static_cast<std::uint32_t>(side / 2)));
    const int rw = 4 + static_cast<int>(rng.bounded(static_cast<std::uint32_t>(side / 2)));
    const int r0 = static_cast<int>(rng.bounded(static_cast<std::uint32_t>(side - 3)));
    const int c0 = static_cast<int>(rng.bounded(static_cast<std::uint32_t>(side - 3)));
    const float gray = static_cast<float>(rng.uniform(0.25, 0.65));
    const float dr = static_cast<float>(rng.uniform(-0.08, 0.08));
    const float dg = static_cast<float>(rng.uniform(-0.08, 0.08));
    const float db = static_cast<float>(rng.uniform(-0.08, 0.08));
    for (int r = r0; r < std::min(side, r0 + rh); ++r) {
      for (int c = c0; c < std::min(side, c0 + rw); ++c)
        paint(image, r, c, gray + dr, gray + dg, gray + db);
    }
  }

  // Light pixel noise.
  for (float& v : image.values) v += static_cast<float>(rng.uniform(-0.03, 0.03));

  // Planted cue, drawn last so nothing occludes it.
  const int cue = config.cue_min +
                  static_cast<int>(rng.bounded(static_cast<std::uint32_t>(config.cue_max - config.cue_min + 1)));
  const int max_origin = side - cue - 1;
  const int cr = 1 + static_cast<int>(rng.bounded(static_cast<std::uint32_t>(max_origin)));
  const int cc = 1 + static_cast<int>(rng.bounded(static_cast<std::uint32_t>(max_origin)));
  const float jitter = static_cast<float>(rng.uniform(-0.03, 0.03));

  int row0 = side, col0 = side, row1 = -1, col1 = -1;
  auto mark = [&](int r, int c) {
    row0 = std::min(row0, r);
    col0 = std::min(col0, c);
    row1 = std::max(row1, r);
    col1 = std::max(col1, c);
  };

  if (label == 0) {  // red square
    for (int r = cr; r < cr + cue; ++r) {
      for (int c = cc; c < cc + cue; ++c) {
        paint(image, r, c, 0.95f + jitter, 0.08f, 0.08f);
        mark(r, c);
      }
    }
  } else if (label == 1) {  // green disc
    const double radius = cue / 2.0;
    const double center_r = cr + radius - 0.5;
    const double center_c = cc + radius - 0.5;
    for (int r = cr; r < cr + cue; ++r) {
      for (int c = cc; c < cc + cue; ++c) {
        const double dr2 = (r - center_r) * (r - center_r);
        const double dc2 = (c - center_c) * (c - center_c);
        if (dr2 + dc2 <= radius * radius) {
          paint(image, r, c, 0.05f, 0.90f + jitter, 0.10f);
          mark(r, c);
        }
      }
    }
  } else {  // blue diamond
    const double half = cue / 2.0;
    const double center_r = cr + half - 0.5;
    const double center_c = cc + half - 0.5;
    for (int r = cr; r < cr + cue; ++r) {
      for (int c = cc; c < cc + cue; ++c) {
        if (std::abs(r - center_r) + std::abs(c - center_c) <= half) {
          paint(image, r, c, 0.08f, 0.15f, 0.95f + jitter);
          mark(r, c);
        }
      }
    }
  }

  for (float& v : image.values) v = std::clamp(v, 0.0f, 1.0f);

  out.truth = {row0, col0, row1, col1};
  out.image = std::move(image);
  return out;
}

ingest::DatasetManifest write_dataset(const SynthConfig& config,
                                      const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "images");

  ingest::DatasetManifest manifest;
  manifest.num_classes = 3;
  manifest.class_names = {class_name(0), class_name(1), class_name(2)};

  std::ofstream truth_out(out_dir / "truth.jsonl");
  if (!truth_out)
    throw Error(ErrorCode::MissingFile, "cannot open for write: " + (out_dir / "truth.jsonl").string());

  auto emit = [&](ingest::Split split, int per_class) {
    for (int label = 0; label < 3; ++label) {
      for (int index = 0; index < per_class; ++index) {
        SynthImage sample = make_image(config, split, label, index);
        const std::string file_name = sample.id + ".png";
        ingest::save_png(out_dir / "images" / file_name, ingest::to_decoded(sample.image));

        ingest::ImageRecord record;
        record.id = sample.id;
        record.uri = "images/" + file_name;
        record.label = label;
        record.label_name = manifest.class_names[label];
        record.split = split;
        manifest.records.push_back(record);

        json truth;
        truth["id"] = sample.id;
        truth["row0"] = sample.truth.row0;
        truth["col0"] = sample.truth.col0;
        truth["row1"] = sample.truth.row1;
        truth["col1"] = sample.truth.col1;
        truth_out << truth.dump() << "\n";
      }
    }
  };
  emit(ingest::Split::train, config.train_per_class);
  emit(ingest::Split::eval, config.eval_per_class);

  ingest::write_manifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

std::map<std::string, TruthBox> load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::map<std::string, TruthBox> truth;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json row = json::parse(line, nullptr, false);
    if (row.is_discarded()) throw Error(ErrorCode::SchemaError, "invalid truth line");
    truth[row.at("id").get<std::string>()] = {row.at("row0").get<int>(), row.at("col0").get<int>(),
                                              row.at("row1").get<int>(), row.at("col1").get<int>()};
  }
  return truth;
}

}  // namespace geoxplain::synth
