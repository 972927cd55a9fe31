#include "geoxplain/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "geoxplain/errors.hpp"
#include "geoxplain/parallel.hpp"
#include "geoxplain/rng.hpp"

namespace geoxplain::classifier {

using nlohmann::json;

std::string train_config_hash(const TrainConfig& config) {
  json j;
  j["learning_rate"] = config.learning_rate;
  j["weight_decay"] = config.weight_decay;
  j["label_smoothing"] = config.label_smoothing;
  j["max_epochs"] = config.max_epochs;
  j["patience"] = config.patience;
  j["batch_size"] = config.batch_size;
  j["seed"] = config.seed;
  j["validation_fraction"] = config.validation_fraction;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

void write_train_report(const TrainReport& report, const std::filesystem::path& path) {
  json j;
  j["seed"] = report.seed;
  j["config_hash"] = report.config_hash;
  j["best_epoch"] = report.best_epoch;
  j["final_train_accuracy"] = report.final_train_accuracy;
  j["final_val_accuracy"] = report.final_val_accuracy;
  j["epochs"] = json::array();
  for (const auto& e : report.epochs) {
    j["epochs"].push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot open for write: " + path.string());
  out << j.dump(2) << "\n";
}

namespace {

// AdamW state for one parameter tensor.
struct AdamState {
  std::vector<double> m, v;
};

struct Optimizer {
  double lr, wd, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int step = 0;
  std::vector<AdamState> state;

  void init(const std::vector<std::vector<float>*>& params) {
    state.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state[i].m.assign(params[i]->size(), 0.0);
      state[i].v.assign(params[i]->size(), 0.0);
    }
  }

  void update(const std::vector<std::vector<float>*>& params,
              const std::vector<const std::vector<float>*>& grads) {
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, step);
    const double bc2 = 1.0 - std::pow(beta2, step);
    for (std::size_t t = 0; t < params.size(); ++t) {
      auto& p = *params[t];
      const auto& g = *grads[t];
      auto& s = state[t];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * gi;
        s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * gi * gi;
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        // Decoupled weight decay.
        p[i] = static_cast<float>(p[i] - lr * (mhat / (std::sqrt(vhat) + eps)) - lr * wd * p[i]);
      }
    }
  }
};

std::vector<std::vector<float>*> param_list(ToyCnn::Tensors& t) {
  return {&t.w1, &t.b1, &t.w2, &t.b2, &t.w3, &t.b3, &t.wfc, &t.bfc};
}

std::vector<const std::vector<float>*> grad_list(const ToyCnn::Tensors& t) {
  return {&t.w1, &t.b1, &t.w2, &t.b2, &t.w3, &t.b3, &t.wfc, &t.bfc};
}

void accumulate(ToyCnn::Tensors& into, const ToyCnn::Tensors& from, float scale) {
  auto dst = param_list(into);
  auto src = grad_list(from);
  for (std::size_t t = 0; t < dst.size(); ++t) {
    for (std::size_t i = 0; i < dst[t]->size(); ++i) (*dst[t])[i] += scale * (*src[t])[i];
  }
}

double eval_loss(const ToyCnn& model, const std::vector<ImageTensor>& images,
                 const std::vector<int>& labels, const std::vector<int>& idx,
                 double label_smoothing) {
  const int n_classes = model.num_classes();
  std::vector<double> losses(idx.size(), 0.0);
  const bool par = par::enabled();
#pragma omp parallel for schedule(dynamic) if (par)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(idx.size()); ++i) {
    const int sample = idx[i];
    std::vector<float> probs = softmax(model.predict_logits(images[sample]));
    double loss = 0.0;
    for (int cls = 0; cls < n_classes; ++cls) {
      const double q = (cls == labels[sample] ? 1.0 - label_smoothing : 0.0) +
                       label_smoothing / n_classes;
      loss -= q * std::log(std::max(1e-12, static_cast<double>(probs[cls])));
    }
    losses[i] = loss;
  }
  double total = 0.0;
  for (double l : losses) total += l;  // fixed order, independent of thread count
  return idx.empty() ? 0.0 : total / static_cast<double>(idx.size());
}

}  // namespace

double accuracy(const ClassifierAdapter& model, const std::vector<ImageTensor>& standardized,
                const std::vector<int>& labels) {
  if (standardized.empty()) return 0.0;
  std::vector<int> hits(standardized.size(), 0);
  const bool par = par::enabled();
#pragma omp parallel for schedule(dynamic) if (par)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(standardized.size()); ++i) {
    try {
      hits[i] = predict_top1(model, standardized[i]).first == labels[i] ? 1 : 0;
    } catch (const std::exception&) {
      hits[i] = 0;  // a failed prediction cannot count as correct
    }
  }
  return std::accumulate(hits.begin(), hits.end(), 0) / static_cast<double>(standardized.size());
}

TrainedModel train_classifier(const TrainingSet& data, const TrainConfig& config,
                              const ingest::AugmentConfig& augment_config,
                              const ingest::PreprocessConfig& preprocess_config,
                              const ToyCnn::Spec& spec) {
  if (data.images.empty()) throw Error(ErrorCode::EmptySplit, "training set is empty");
  if (data.images.size() != data.labels.size())
    throw Error(ErrorCode::ShapeMismatch, "images/labels size mismatch");

  auto model = std::make_unique<ToyCnn>(spec, config.seed);

  // Seeded validation split.
  std::vector<int> order(data.images.size());
  std::iota(order.begin(), order.end(), 0);
  Pcg32 split_rng(splitmix64(config.seed ^ 0x76616c69646174ULL));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[split_rng.bounded(static_cast<std::uint32_t>(i))]);
  std::size_t val_count = static_cast<std::size_t>(
      std::floor(config.validation_fraction * static_cast<double>(order.size())));
  if (config.validation_fraction > 0.0 && val_count == 0 && order.size() >= 2) val_count = 1;
  std::vector<int> val_idx(order.begin(), order.begin() + val_count);
  std::vector<int> train_idx(order.begin() + val_count, order.end());
  if (train_idx.empty()) train_idx = val_idx;

  Optimizer opt;
  opt.lr = config.learning_rate;
  opt.wd = config.weight_decay;
  auto params = param_list(model->params());
  opt.init(params);

  TrainReport report;
  report.seed = config.seed;
  report.config_hash = train_config_hash(config);

  ToyCnn::Tensors best_params = model->params();
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int since_best = 0;

  std::vector<int> epoch_order = train_idx;
  const bool par = par::enabled();

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    Pcg32 shuffle_rng(splitmix64(config.seed ^ (0x65706f6368ULL + epoch)));
    for (std::size_t i = epoch_order.size(); i > 1; --i)
      std::swap(epoch_order[i - 1], epoch_order[shuffle_rng.bounded(static_cast<std::uint32_t>(i))]);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < epoch_order.size(); start += config.batch_size) {
      const std::size_t end = std::min(epoch_order.size(), start + config.batch_size);
      const std::size_t count = end - start;

      std::vector<ToyCnn::Tensors> sample_grads(count);
      std::vector<double> sample_losses(count, 0.0);
#pragma omp parallel for schedule(dynamic) if (par)
      for (std::int64_t b = 0; b < static_cast<std::int64_t>(count); ++b) {
        const int sample = epoch_order[start + b];
        sample_grads[b].resize_like(spec);
        sample_grads[b].fill_zero();
        const std::uint64_t aug_seed =
            splitmix64(splitmix64(config.seed ^ 0x617567ULL) ^
                       (static_cast<std::uint64_t>(epoch) * 1000003ULL + sample));
        ImageTensor augmented =
            ingest::augment(data.images[sample], aug_seed, augment_config, ingest::Split::train);
        ImageTensor x = ingest::standardize(augmented, preprocess_config);
        sample_losses[b] =
            model->sample_gradients(x, data.labels[sample], config.label_smoothing,
                                    sample_grads[b], nullptr);
      }

      // Fixed-order reduction keeps the run reproducible for any thread count.
      ToyCnn::Tensors batch_grads;
      batch_grads.resize_like(spec);
      batch_grads.fill_zero();
      const float inv = 1.0f / static_cast<float>(count);
      for (std::size_t b = 0; b < count; ++b) accumulate(batch_grads, sample_grads[b], inv);
      for (double l : sample_losses) epoch_loss += l;
      seen += count;

      opt.update(params, grad_list(batch_grads));
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(1, seen));

    // Validation on clean (non-augmented) standardized images.
    double val_loss;
    {
      std::vector<int> idx = val_idx.empty() ? train_idx : val_idx;
      std::vector<ImageTensor> std_images(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i)
        std_images[i] = ingest::standardize(data.images[idx[i]], preprocess_config);
      std::vector<int> local(idx.size());
      std::iota(local.begin(), local.end(), 0);
      std::vector<int> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = data.labels[idx[i]];
      val_loss = eval_loss(*model, std_images, labels, local, config.label_smoothing);
    }

    if (!std::isfinite(val_loss) || !std::isfinite(epoch_loss))
      throw Error(ErrorCode::DivergenceDetected,
                  "loss is not finite at epoch " + std::to_string(epoch));
    for (const auto* tensor : grad_list(model->params())) {
      for (float v : *tensor) {
        if (!std::isfinite(v))
          throw Error(ErrorCode::DivergenceDetected,
                      "parameters diverged at epoch " + std::to_string(epoch));
      }
    }

    report.epochs.push_back({epoch, epoch_loss, val_loss});

    if (val_loss < best_val) {
      best_val = val_loss;
      best_epoch = epoch;
      best_params = model->params();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  model->params() = best_params;
  report.best_epoch = best_epoch;

  // Final accuracies on clean inputs.
  auto standardize_all = [&](const std::vector<int>& idx) {
    std::vector<ImageTensor> out(idx.size());
    std::vector<int> labels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out[i] = ingest::standardize(data.images[idx[i]], preprocess_config);
      labels[i] = data.labels[idx[i]];
    }
    return std::pair{out, labels};
  };
  auto [train_images, train_labels] = standardize_all(train_idx);
  report.final_train_accuracy = accuracy(*model, train_images, train_labels);
  if (!val_idx.empty()) {
    auto [val_images2, val_labels] = standardize_all(val_idx);
    report.final_val_accuracy = accuracy(*model, val_images2, val_labels);
  } else {
    report.final_val_accuracy = report.final_train_accuracy;
  }

  return {std::move(model), std::move(report)};
}

TrainedModel train_classifier(const ingest::DatasetManifest& manifest,
                              const std::filesystem::path& manifest_dir, const TrainConfig& config,
                              const ingest::AugmentConfig& augment_config,
                              const ingest::PreprocessConfig& preprocess_config,
                              const ToyCnn::Spec& spec) {
  auto train_records = manifest.split_records(ingest::Split::train);
  std::vector<int> per_class(manifest.num_classes, 0);
  for (const auto& r : train_records) ++per_class[r.label];
  for (int cls = 0; cls < manifest.num_classes; ++cls) {
    if (per_class[cls] == 0)
      throw Error(ErrorCode::EmptySplit, "train split has no records for class '" +
                                             manifest.class_names[cls] + "'");
  }

  TrainingSet data;
  data.num_classes = manifest.num_classes;
  ingest::PreprocessConfig raw_config = preprocess_config;
  raw_config.normalization = Normalization::raw_0_1;
  raw_config.side = spec.input_side;
  for (const auto& record : train_records) {
    std::filesystem::path uri(record.uri);
    if (uri.is_relative()) uri = manifest_dir / uri;
    data.images.push_back(ingest::preprocess(ingest::load_image(uri), raw_config));
    data.labels.push_back(record.label);
  }
  return train_classifier(data, config, augment_config, preprocess_config, spec);
}

}  // namespace geoxplain::classifier
