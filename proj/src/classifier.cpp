#include "geoxplain/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "geoxplain/errors.hpp"

namespace geoxplain::classifier {

std::vector<float> ClassifierAdapter::input_gradient(const ImageTensor&, int) const {
  throw Error(ErrorCode::CapabilityMissing,
              "adapter '" + name() + "' does not expose input gradients");
}

ActivationTap ClassifierAdapter::activation_gradients(const ImageTensor&, int) const {
  throw Error(ErrorCode::CapabilityMissing,
              "adapter '" + name() + "' does not expose activation maps");
}

std::vector<float> softmax(const std::vector<float>& logits) {
  float max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<float> probs(logits.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    denom += probs[i];
  }
  for (float& p : probs) p = static_cast<float>(p / denom);
  return probs;
}

std::vector<float> predict_proba(const ClassifierAdapter& model, const ImageTensor& x) {
  if (x.height != model.input_side() || x.width != model.input_side())
    throw Error(ErrorCode::ShapeMismatch,
                "input is " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                    ", adapter expects " + std::to_string(model.input_side()) + "x" +
                    std::to_string(model.input_side()));
  std::vector<float> logits = model.predict_logits(x);
  if (static_cast<int>(logits.size()) != model.num_classes())
    throw Error(ErrorCode::BackendFailure,
                "adapter '" + model.name() + "' returned " + std::to_string(logits.size()) +
                    " logits, declared " + std::to_string(model.num_classes()) + " classes");
  for (float v : logits) {
    if (!std::isfinite(v))
      throw Error(ErrorCode::BackendFailure, "adapter '" + model.name() + "' emitted non-finite logits");
  }
  return softmax(logits);
}

std::pair<int, float> predict_top1(const ClassifierAdapter& model, const ImageTensor& x) {
  std::vector<float> probs = predict_proba(model, x);
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
    if (probs[i] > probs[best]) best = i;  // strict: ties keep the lowest index
  }
  return {best, probs[best]};
}

StubClassifier::StubClassifier(std::vector<float> logits, int input_side)
    : logits_(std::move(logits)), input_side_(input_side) {}

std::vector<float> StubClassifier::predict_logits(const ImageTensor&) const { return logits_; }

}  // namespace geoxplain::classifier
