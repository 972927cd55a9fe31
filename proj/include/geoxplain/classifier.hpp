#pragma once

#include <memory>
#include <string>
#include <vector>

#include "geoxplain/image.hpp"

namespace geoxplain::classifier {

struct Capabilities {
  bool probabilities = false;
  bool input_gradients = false;
  bool activation_maps = false;
};

// Activations of the adapter's designated convolutional block together with
// the gradient of the target logit with respect to them.
struct ActivationTap {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<float> activations;  // channels * rows * cols, planar
  std::vector<float> gradients;    // same shape
};

class ClassifierAdapter {
 public:
  virtual ~ClassifierAdapter() = default;

  virtual std::string name() const = 0;
  virtual int num_classes() const = 0;
  virtual int input_side() const = 0;
  virtual Capabilities capabilities() const = 0;

  // Adapters that cannot serve concurrent inference declare it here; the
  // pipeline serializes calls to them.
  virtual bool thread_safe_inference() const { return true; }

  // x must be standardized and input_side x input_side. Returns raw logits.
  virtual std::vector<float> predict_logits(const ImageTensor& x) const = 0;

  // d(logit_target)/d(input), planar CHW. Requires input_gradients.
  virtual std::vector<float> input_gradient(const ImageTensor& x, int target) const;

  // Requires activation_maps.
  virtual ActivationTap activation_gradients(const ImageTensor& x, int target) const;
};

// Softmax over predict_logits. Checks shape and that the output normalizes.
std::vector<float> predict_proba(const ClassifierAdapter& model, const ImageTensor& x);

// Argmax of predict_proba; ties break toward the lowest class index.
std::pair<int, float> predict_top1(const ClassifierAdapter& model, const ImageTensor& x);

// Fixed-logit adapter: ignores pixels entirely. Used for harness tests and
// as the pixel-blind baseline.
class StubClassifier : public ClassifierAdapter {
 public:
  StubClassifier(std::vector<float> logits, int input_side);

  std::string name() const override { return "stub"; }
  int num_classes() const override { return static_cast<int>(logits_.size()); }
  int input_side() const override { return input_side_; }
  Capabilities capabilities() const override { return {.probabilities = true}; }
  std::vector<float> predict_logits(const ImageTensor& x) const override;

 private:
  std::vector<float> logits_;
  int input_side_;
};

std::vector<float> softmax(const std::vector<float>& logits);

}  // namespace geoxplain::classifier
