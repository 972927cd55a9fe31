#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geoxplain/classifier.hpp"
#include "geoxplain/grid.hpp"
#include "geoxplain/image.hpp"

// Loaders for user-supplied backend modules (shared libraries). A module
// implements one of three flat C contracts; every entry point returns 0 on
// success and nonzero on failure.
//
// Classifier module symbols:
//   void*    gx_classifier_create(const char* weights_path);
//   void     gx_classifier_destroy(void*);
//   int      gx_classifier_num_classes(void*);
//   int      gx_classifier_input_side(void*);
//   unsigned gx_classifier_capabilities(void*);   // bit0 proba, bit1 input grads, bit2 activations
//   int      gx_classifier_predict_logits(void*, const float* chw, int h, int w, float* out);
//   int      gx_classifier_input_gradient(void*, const float* chw, int h, int w, int target,
//                                         float* out_chw);                        [optional]
//   int      gx_classifier_activation_shape(void*, int* channels, int* rows, int* cols);
//   int      gx_classifier_activation_gradients(void*, const float* chw, int h, int w, int target,
//                                               float* activations, float* gradients); [optional]
//
// Segmenter module symbols:
//   void* gx_segmenter_create(const char* weights_path);
//   void  gx_segmenter_destroy(void*);
//   int   gx_segmenter_supports_concepts(void*);
//   int   gx_segmenter_segment(void*, const float* chw, int h, int w,
//                              const char* const* concepts, int n_concepts,
//                              void (*emit)(void* ctx, const unsigned char* bits,
//                                           const char* concept_hint),
//                              void* ctx);
//
// Attribution module symbols:
//   void* gx_attribution_create(const char* weights_path);
//   void  gx_attribution_destroy(void*);
//   int   gx_attribution_compute(void*, const float* chw, int h, int w, int target, float* out_hw);

namespace geoxplain::external {

class SharedLibrary {
 public:
  explicit SharedLibrary(const std::string& path);
  ~SharedLibrary();
  SharedLibrary(const SharedLibrary&) = delete;
  SharedLibrary& operator=(const SharedLibrary&) = delete;

  void* symbol(const char* name) const;            // BackendFailure when missing
  void* optional_symbol(const char* name) const;   // nullptr when missing
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  void* handle_ = nullptr;
};

class ExternalClassifier : public classifier::ClassifierAdapter {
 public:
  ExternalClassifier(const std::string& module_path, const std::string& weights_path);
  ~ExternalClassifier() override;

  std::string name() const override { return "external"; }
  int num_classes() const override { return num_classes_; }
  int input_side() const override { return input_side_; }
  classifier::Capabilities capabilities() const override { return caps_; }
  bool thread_safe_inference() const override { return false; }  // conservative default
  std::vector<float> predict_logits(const ImageTensor& x) const override;
  std::vector<float> input_gradient(const ImageTensor& x, int target) const override;
  classifier::ActivationTap activation_gradients(const ImageTensor& x, int target) const override;

 private:
  std::shared_ptr<SharedLibrary> lib_;
  void* handle_ = nullptr;
  int num_classes_ = 0;
  int input_side_ = 0;
  classifier::Capabilities caps_;
};

struct ExternalSegmentResult {
  BitGrid bits;
  std::optional<std::string> concept_hint;
};

class ExternalSegmenter {
 public:
  ExternalSegmenter(const std::string& module_path, const std::string& weights_path);
  ~ExternalSegmenter();

  bool supports_concepts() const { return supports_concepts_; }
  std::vector<ExternalSegmentResult> segment(const ImageTensor& image,
                                             const std::vector<std::string>& concepts) const;

 private:
  std::shared_ptr<SharedLibrary> lib_;
  void* handle_ = nullptr;
  bool supports_concepts_ = false;
};

class ExternalAttribution {
 public:
  ExternalAttribution(const std::string& module_path, const std::string& weights_path);
  ~ExternalAttribution();

  Grid<float> compute(const ImageTensor& x, int target) const;

 private:
  std::shared_ptr<SharedLibrary> lib_;
  void* handle_ = nullptr;
};

}  // namespace geoxplain::external
