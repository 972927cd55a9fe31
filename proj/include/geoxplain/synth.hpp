#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "geoxplain/image.hpp"
#include "geoxplain/manifest.hpp"

namespace geoxplain::synth {

// Three-class benchmark where the class is carried by one localized,
// saturated cue (red square / green disc / blue diamond) planted on muted
// structured clutter. The clutter distribution is identical across classes,
// so only the cue is predictive, and its ground-truth box is known.
struct SynthConfig {
  int side = 64;
  int train_per_class = 100;
  int eval_per_class = 100;
  std::uint64_t seed = 7;
  int cue_min = 10;  // cue bounding box side range
  int cue_max = 16;
};

struct TruthBox {
  int row0 = 0, col0 = 0, row1 = 0, col1 = 0;
};

struct SynthImage {
  std::string id;
  int label = 0;
  ingest::Split split = ingest::Split::train;
  ImageTensor image;  // raw_0_1
  TruthBox truth;
};

inline const char* class_name(int label) {
  constexpr const char* names[3] = {"France", "India", "Japan"};
  return names[label];
}

SynthImage make_image(const SynthConfig& config, ingest::Split split, int label, int index);

// Writes images/*.png, manifest.jsonl and truth.jsonl under out_dir and
// returns the manifest.
ingest::DatasetManifest write_dataset(const SynthConfig& config,
                                      const std::filesystem::path& out_dir);

std::map<std::string, TruthBox> load_truth(const std::filesystem::path& path);

}  // namespace geoxplain::synth
