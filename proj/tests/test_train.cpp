#include <doctest.h>

#include <cmath>

#include "geoxplain/errors.hpp"
#include "geoxplain/rng.hpp"
#include "geoxplain/synth.hpp"
#include "geoxplain/train.hpp"

using namespace geoxplain;
using namespace geoxplain::classifier;

namespace {

TrainingSet tiny_set(int per_class, int side, std::uint64_t seed) {
  synth::SynthConfig config;
  config.side = side;
  config.cue_min = 8;
  config.cue_max = 10;
  config.seed = seed;
  TrainingSet data;
  data.num_classes = 3;
  for (int label = 0; label < 3; ++label) {
    for (int i = 0; i < per_class; ++i) {
      auto sample = synth::make_image(config, ingest::Split::train, label, i);
      data.images.push_back(std::move(sample.image));
      data.labels.push_back(label);
    }
  }
  return data;
}

ingest::PreprocessConfig preprocess_for(int side) {
  ingest::PreprocessConfig config;
  config.side = side;
  return config;
}

ingest::AugmentConfig no_augment() {
  ingest::AugmentConfig config;
  config.flip_probability = 0.0f;
  config.brightness = config.contrast = config.saturation = 0.0f;
  return config;
}

ToyCnn::Spec tiny_spec(int side) {
  ToyCnn::Spec spec;
  spec.input_side = side;
  spec.num_classes = 3;
  spec.c1 = 4;
  spec.c2 = 8;
  spec.c3 = 8;
  return spec;
}

}  // namespace

TEST_CASE("memorization: loss strictly decreases over the first epochs (or diverges loudly)") {
  TrainingSet data = tiny_set(1, 16, 5);
  TrainConfig config;
  config.learning_rate = 3e-3;
  config.max_epochs = 4;
  config.patience = 30;
  config.batch_size = 3;
  config.seed = 7;
  config.validation_fraction = 0.0;  // 3 records: floor(0) -> 1 val record taken below
  try {
    auto trained = train_classifier(data, config, no_augment(), preprocess_for(16), tiny_spec(16));
    REQUIRE(trained.report.epochs.size() >= 3);
    CHECK(trained.report.epochs[1].train_loss < trained.report.epochs[0].train_loss);
    CHECK(trained.report.epochs[2].train_loss < trained.report.epochs[1].train_loss);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DivergenceDetected);
  }
}

TEST_CASE("epoch-0 loss is reproducible to 1e-6 for a fixed seed") {
  TrainingSet data = tiny_set(2, 16, 9);
  TrainConfig config;
  config.max_epochs = 1;
  config.batch_size = 4;
  config.seed = 1234;
  auto first = train_classifier(data, config, no_augment(), preprocess_for(16), tiny_spec(16));
  auto second = train_classifier(data, config, no_augment(), preprocess_for(16), tiny_spec(16));
  REQUIRE(first.report.epochs.size() == 1);
  REQUIRE(second.report.epochs.size() == 1);
  CHECK(std::fabs(first.report.epochs[0].train_loss - second.report.epochs[0].train_loss) < 1e-6);
  CHECK(first.report.config_hash == second.report.config_hash);
}

TEST_CASE("a missing class in the train split is an EmptySplit error") {
  ingest::DatasetManifest manifest;
  manifest.num_classes = 3;
  manifest.class_names = {"a", "b", "c"};
  ingest::ImageRecord record;
  record.id = "only";
  record.uri = "images/only.png";
  record.label = 0;
  record.split = ingest::Split::train;
  manifest.records.push_back(record);
  TrainConfig config;
  try {
    train_classifier(manifest, ".", config, no_augment(), preprocess_for(16), tiny_spec(16));
    FAIL("expected EmptySplit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySplit);
  }
}

TEST_CASE("an exploding learning rate raises DivergenceDetected") {
  TrainingSet data = tiny_set(1, 16, 21);
  TrainConfig config;
  config.learning_rate = 1e20;
  config.max_epochs = 6;
  config.batch_size = 3;
  CHECK_THROWS_AS(
      train_classifier(data, config, no_augment(), preprocess_for(16), tiny_spec(16)), Error);
}

TEST_CASE("default train recipe carries the published values") {
  TrainConfig config;
  CHECK(config.learning_rate == 3e-4);
  CHECK(config.weight_decay == 0.02);
  CHECK(config.label_smoothing == 0.1);
  CHECK(config.patience == 30);
  CHECK(config.max_epochs == 300);
  CHECK(config.batch_size == 32);
}

TEST_CASE("early stopping restores the best epoch") {
  TrainingSet data = tiny_set(4, 16, 30);
  TrainConfig config;
  config.learning_rate = 2e-3;
  config.max_epochs = 20;
  config.patience = 3;
  config.batch_size = 6;
  config.seed = 11;
  auto trained = train_classifier(data, config, no_augment(), preprocess_for(16), tiny_spec(16));
  CHECK(trained.report.best_epoch >= 0);
  CHECK(trained.report.best_epoch < static_cast<int>(trained.report.epochs.size()));
  // best epoch must hold the minimum validation loss seen
  double best = trained.report.epochs[trained.report.best_epoch].val_loss;
  for (const auto& epoch : trained.report.epochs) CHECK(best <= epoch.val_loss + 1e-12);
}
