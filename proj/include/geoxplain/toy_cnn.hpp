#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "geoxplain/classifier.hpp"

namespace geoxplain::classifier {

// Small CNN for desk-scale experiments: three 3x3 conv blocks (the first two
// followed by 2x2 max pooling), global average pooling, and a linear head.
// Exposes every capability the attribution backends need: probabilities,
// input gradients, and last-conv activation maps with their gradients.
class ToyCnn : public ClassifierAdapter {
 public:
  struct Spec {
    int input_side = 64;  // must be divisible by 4
    int num_classes = 3;
    int c1 = 8;
    int c2 = 16;
    int c3 = 16;
  };

  ToyCnn(const Spec& spec, std::uint64_t init_seed);

  std::string name() const override { return "toy-cnn"; }
  int num_classes() const override { return spec_.num_classes; }
  int input_side() const override { return spec_.input_side; }
  Capabilities capabilities() const override {
    return {.probabilities = true, .input_gradients = true, .activation_maps = true};
  }
  std::vector<float> predict_logits(const ImageTensor& x) const override;
  std::vector<float> input_gradient(const ImageTensor& x, int target) const override;
  ActivationTap activation_gradients(const ImageTensor& x, int target) const override;

  const Spec& spec() const { return spec_; }

  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<ToyCnn> load(const std::filesystem::path& path);

  // --- training access -----------------------------------------------------

  struct Tensors {
    std::vector<float> w1, b1, w2, b2, w3, b3, wfc, bfc;
    void resize_like(const Spec& spec);
    void fill_zero();
  };

  // Forward + backward for one sample. dlogits drives the backward pass
  // (p - q for a training step, a one-hot vector for pure gradients).
  // Returns the cross-entropy-with-smoothing loss when label >= 0.
  double sample_gradients(const ImageTensor& x, int label, double label_smoothing,
                          Tensors& grads, std::vector<float>* input_grad) const;

  Tensors& params() { return params_; }
  const Tensors& params() const { return params_; }

 private:
  struct Workspace;
  void forward(const ImageTensor& x, Workspace& ws) const;
  void backward(const Workspace& ws, const std::vector<float>& dlogits, Tensors& grads,
                std::vector<float>* input_grad) const;

  Spec spec_;
  Tensors params_;
};

}  // namespace geoxplain::classifier
