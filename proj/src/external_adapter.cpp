#include "geoxplain/external_adapter.hpp"

#include <dlfcn.h>

#include "geoxplain/errors.hpp"

namespace geoxplain::external {

SharedLibrary::SharedLibrary(const std::string& path) : path_(path) {
  handle_ = dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (!handle_) {
    const char* why = dlerror();
    throw Error(ErrorCode::BackendFailure,
                "cannot load backend module '" + path + "': " + (why ? why : "unknown dlopen error"));
  }
}

SharedLibrary::~SharedLibrary() {
  if (handle_) dlclose(handle_);
}

void* SharedLibrary::symbol(const char* name) const {
  void* sym = dlsym(handle_, name);
  if (!sym)
    throw Error(ErrorCode::BackendFailure,
                "backend module '" + path_ + "' is missing symbol '" + name + "'");
  return sym;
}

void* SharedLibrary::optional_symbol(const char* name) const { return dlsym(handle_, name); }

namespace {

using CreateFn = void* (*)(const char*);
using DestroyFn = void (*)(void*);
using IntQueryFn = int (*)(void*);
using UnsignedQueryFn = unsigned (*)(void*);
using PredictFn = int (*)(void*, const float*, int, int, float*);
using InputGradFn = int (*)(void*, const float*, int, int, int, float*);
using ActivationShapeFn = int (*)(void*, int*, int*, int*);
using ActivationGradFn = int (*)(void*, const float*, int, int, int, float*, float*);
using EmitMaskFn = void (*)(void*, const unsigned char*, const char*);
using SegmentFn = int (*)(void*, const float*, int, int, const char* const*, int, EmitMaskFn,
                          void*);
using AttributionComputeFn = int (*)(void*, const float*, int, int, int, float*);

void check_rc(int rc, const std::string& what) {
  if (rc != 0)
    throw Error(ErrorCode::BackendFailure, what + " failed with code " + std::to_string(rc));
}

}  // namespace

ExternalClassifier::ExternalClassifier(const std::string& module_path,
                                       const std::string& weights_path)
    : lib_(std::make_shared<SharedLibrary>(module_path)) {
  auto create = reinterpret_cast<CreateFn>(lib_->symbol("gx_classifier_create"));
  handle_ = create(weights_path.c_str());
  if (!handle_)
    throw Error(ErrorCode::BackendFailure,
                "gx_classifier_create returned null for weights '" + weights_path + "'");
  num_classes_ = reinterpret_cast<IntQueryFn>(lib_->symbol("gx_classifier_num_classes"))(handle_);
  input_side_ = reinterpret_cast<IntQueryFn>(lib_->symbol("gx_classifier_input_side"))(handle_);
  unsigned caps =
      reinterpret_cast<UnsignedQueryFn>(lib_->symbol("gx_classifier_capabilities"))(handle_);
  caps_.probabilities = (caps & 1u) != 0;
  caps_.input_gradients = (caps & 2u) != 0;
  caps_.activation_maps = (caps & 4u) != 0;
  if (num_classes_ < 2 || input_side_ < 1)
    throw Error(ErrorCode::BackendFailure, "external classifier reported invalid shape");
}

ExternalClassifier::~ExternalClassifier() {
  if (handle_) {
    auto destroy = reinterpret_cast<DestroyFn>(lib_->optional_symbol("gx_classifier_destroy"));
    if (destroy) destroy(handle_);
  }
}

std::vector<float> ExternalClassifier::predict_logits(const ImageTensor& x) const {
  auto predict = reinterpret_cast<PredictFn>(lib_->symbol("gx_classifier_predict_logits"));
  std::vector<float> logits(num_classes_, 0.0f);
  check_rc(predict(handle_, x.values.data(), x.height, x.width, logits.data()),
           "gx_classifier_predict_logits");
  return logits;
}

std::vector<float> ExternalClassifier::input_gradient(const ImageTensor& x, int target) const {
  if (!caps_.input_gradients) return ClassifierAdapter::input_gradient(x, target);
  auto fn = reinterpret_cast<InputGradFn>(lib_->symbol("gx_classifier_input_gradient"));
  std::vector<float> grad(x.values.size(), 0.0f);
  check_rc(fn(handle_, x.values.data(), x.height, x.width, target, grad.data()),
           "gx_classifier_input_gradient");
  return grad;
}

classifier::ActivationTap ExternalClassifier::activation_gradients(const ImageTensor& x,
                                                                   int target) const {
  if (!caps_.activation_maps) return ClassifierAdapter::activation_gradients(x, target);
  auto shape = reinterpret_cast<ActivationShapeFn>(lib_->symbol("gx_classifier_activation_shape"));
  classifier::ActivationTap tap;
  check_rc(shape(handle_, &tap.channels, &tap.rows, &tap.cols), "gx_classifier_activation_shape");
  const std::size_t n = static_cast<std::size_t>(tap.channels) * tap.rows * tap.cols;
  tap.activations.resize(n);
  tap.gradients.resize(n);
  auto fn =
      reinterpret_cast<ActivationGradFn>(lib_->symbol("gx_classifier_activation_gradients"));
  check_rc(fn(handle_, x.values.data(), x.height, x.width, target, tap.activations.data(),
              tap.gradients.data()),
           "gx_classifier_activation_gradients");
  return tap;
}

ExternalSegmenter::ExternalSegmenter(const std::string& module_path,
                                     const std::string& weights_path)
    : lib_(std::make_shared<SharedLibrary>(module_path)) {
  auto create = reinterpret_cast<CreateFn>(lib_->symbol("gx_segmenter_create"));
  handle_ = create(weights_path.c_str());
  if (!handle_)
    throw Error(ErrorCode::BackendFailure,
                "gx_segmenter_create returned null for weights '" + weights_path + "'");
  supports_concepts_ =
      reinterpret_cast<IntQueryFn>(lib_->symbol("gx_segmenter_supports_concepts"))(handle_) != 0;
}

ExternalSegmenter::~ExternalSegmenter() {
  if (handle_) {
    auto destroy = reinterpret_cast<DestroyFn>(lib_->optional_symbol("gx_segmenter_destroy"));
    if (destroy) destroy(handle_);
  }
}

std::vector<ExternalSegmentResult> ExternalSegmenter::segment(
    const ImageTensor& image, const std::vector<std::string>& concepts) const {
  struct EmitContext {
    int rows, cols;
    std::vector<ExternalSegmentResult> out;
  } ctx{image.height, image.width, {}};

  EmitMaskFn emit = [](void* raw, const unsigned char* bits, const char* concept_hint) {
    auto* c = static_cast<EmitContext*>(raw);
    ExternalSegmentResult result;
    result.bits = BitGrid(c->rows, c->cols);
    const std::size_t n = static_cast<std::size_t>(c->rows) * c->cols;
    for (std::size_t i = 0; i < n; ++i) result.bits[i] = bits[i] ? 1 : 0;
    if (concept_hint) result.concept_hint = concept_hint;
    c->out.push_back(std::move(result));
  };

  std::vector<const char*> concept_ptrs;
  concept_ptrs.reserve(concepts.size());
  for (const auto& s : concepts) concept_ptrs.push_back(s.c_str());

  auto fn = reinterpret_cast<SegmentFn>(lib_->symbol("gx_segmenter_segment"));
  check_rc(fn(handle_, image.values.data(), image.height, image.width,
              concept_ptrs.empty() ? nullptr : concept_ptrs.data(),
              static_cast<int>(concept_ptrs.size()), emit, &ctx),
           "gx_segmenter_segment");
  return std::move(ctx.out);
}

ExternalAttribution::ExternalAttribution(const std::string& module_path,
                                         const std::string& weights_path)
    : lib_(std::make_shared<SharedLibrary>(module_path)) {
  auto create = reinterpret_cast<CreateFn>(lib_->symbol("gx_attribution_create"));
  handle_ = create(weights_path.c_str());
  if (!handle_)
    throw Error(ErrorCode::BackendFailure,
                "gx_attribution_create returned null for weights '" + weights_path + "'");
}

ExternalAttribution::~ExternalAttribution() {
  if (handle_) {
    auto destroy = reinterpret_cast<DestroyFn>(lib_->optional_symbol("gx_attribution_destroy"));
    if (destroy) destroy(handle_);
  }
}

Grid<float> ExternalAttribution::compute(const ImageTensor& x, int target) const {
  auto fn = reinterpret_cast<AttributionComputeFn>(lib_->symbol("gx_attribution_compute"));
  Grid<float> map(x.height, x.width);
  check_rc(fn(handle_, x.values.data(), x.height, x.width, target, map.data()),
           "gx_attribution_compute");
  return map;
}

}  // namespace geoxplain::external
