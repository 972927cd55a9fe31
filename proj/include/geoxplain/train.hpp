#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "geoxplain/manifest.hpp"
#include "geoxplain/preprocess.hpp"
#include "geoxplain/toy_cnn.hpp"

namespace geoxplain::classifier {

struct TrainConfig {
  double learning_rate = 3e-4;
  double weight_decay = 0.02;
  double label_smoothing = 0.1;
  int max_epochs = 300;
  int patience = 30;
  int batch_size = 32;
  std::uint64_t seed = 1234;
  double validation_fraction = 0.1;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double final_train_accuracy = 0.0;
  double final_val_accuracy = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

void write_train_report(const TrainReport& report, const std::filesystem::path& path);

std::string train_config_hash(const TrainConfig& config);

// In-memory training set: raw_0_1 tensors at model resolution plus labels.
struct TrainingSet {
  std::vector<ImageTensor> images;
  std::vector<int> labels;
  int num_classes = 0;
};

struct TrainedModel {
  std::unique_ptr<ToyCnn> model;
  TrainReport report;
};

// AdamW on cross-entropy with label smoothing; early stopping on validation
// loss with the configured patience; the best-epoch weights are restored.
TrainedModel train_classifier(const TrainingSet& data, const TrainConfig& config,
                              const ingest::AugmentConfig& augment_config,
                              const ingest::PreprocessConfig& preprocess_config,
                              const ToyCnn::Spec& spec);

// Manifest front-end: loads the train split (EmptySplit unless every class
// has at least one record), preprocesses, and trains.
TrainedModel train_classifier(const ingest::DatasetManifest& manifest,
                              const std::filesystem::path& manifest_dir, const TrainConfig& config,
                              const ingest::AugmentConfig& augment_config,
                              const ingest::PreprocessConfig& preprocess_config,
                              const ToyCnn::Spec& spec);

double accuracy(const ClassifierAdapter& model, const std::vector<ImageTensor>& standardized,
                const std::vector<int>& labels);

}  // namespace geoxplain::classifier
