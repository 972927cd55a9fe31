#include "geoxplain/toy_cnn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "geoxplain/errors.hpp"
#include "geoxplain/kernels.hpp"
#include "geoxplain/rng.hpp"

namespace geoxplain::classifier {

namespace k = geoxplain::kernels;

void ToyCnn::Tensors::resize_like(const Spec& spec) {
  w1.resize(static_cast<std::size_t>(spec.c1) * 3 * 9);
  b1.resize(spec.c1);
  w2.resize(static_cast<std::size_t>(spec.c2) * spec.c1 * 9);
  b2.resize(spec.c2);
  w3.resize(static_cast<std::size_t>(spec.c3) * spec.c2 * 9);
  b3.resize(spec.c3);
  wfc.resize(static_cast<std::size_t>(spec.num_classes) * spec.c3);
  bfc.resize(spec.num_classes);
}

void ToyCnn::Tensors::fill_zero() {
  for (auto* t : {&w1, &b1, &w2, &b2, &w3, &b3, &wfc, &bfc}) std::fill(t->begin(), t->end(), 0.0f);
}

namespace {

void he_init(std::vector<float>& weights, int fan_in, Pcg32& rng) {
  const double stddev = std::sqrt(2.0 / fan_in);
  for (float& w : weights) w = static_cast<float>(rng.normal() * stddev);
}

}  // namespace

ToyCnn::ToyCnn(const Spec& spec, std::uint64_t init_seed) : spec_(spec) {
  if (spec.input_side % 4 != 0 || spec.input_side < 8)
    throw Error(ErrorCode::ConfigError, "toy-cnn input side must be a multiple of 4 and >= 8");
  if (spec.num_classes < 2)
    throw Error(ErrorCode::ConfigError, "toy-cnn needs at least 2 classes");
  params_.resize_like(spec_);
  params_.fill_zero();
  Pcg32 rng(init_seed);
  he_init(params_.w1, 3 * 9, rng);
  he_init(params_.w2, spec.c1 * 9, rng);
  he_init(params_.w3, spec.c2 * 9, rng);
  he_init(params_.wfc, spec.c3, rng);
}

struct ToyCnn::Workspace {
  // Post-activation (ReLU) buffers and pooling winners per stage.
  std::vector<float> input;            // 3 x S x S
  std::vector<float> a1, p1, a2, p2, a3;
  std::vector<std::int32_t> arg1, arg2;
  std::vector<float> gap;              // c3
  std::vector<float> logits;
};

void ToyCnn::forward(const ImageTensor& x, Workspace& ws) const {
  if (x.height != spec_.input_side || x.width != spec_.input_side)
    throw Error(ErrorCode::ShapeMismatch,
                "toy-cnn expects " + std::to_string(spec_.input_side) + "x" +
                    std::to_string(spec_.input_side) + " input");
  const int s = spec_.input_side;
  const int s2 = s / 2;
  const int s4 = s / 4;
  ws.input = x.values;

  std::vector<float> z(static_cast<std::size_t>(spec_.c1) * s * s);
  k::conv2d3x3_forward(ws.input.data(), 3, s, s, params_.w1.data(), params_.b1.data(), spec_.c1,
                       z.data());
  ws.a1.resize(z.size());
  k::relu_forward(z.data(), z.size(), ws.a1.data());
  ws.p1.resize(static_cast<std::size_t>(spec_.c1) * s2 * s2);
  ws.arg1.resize(ws.p1.size());
  k::maxpool2_forward(ws.a1.data(), spec_.c1, s, s, ws.p1.data(), ws.arg1.data());

  z.resize(static_cast<std::size_t>(spec_.c2) * s2 * s2);
  k::conv2d3x3_forward(ws.p1.data(), spec_.c1, s2, s2, params_.w2.data(), params_.b2.data(),
                       spec_.c2, z.data());
  ws.a2.resize(z.size());
  k::relu_forward(z.data(), z.size(), ws.a2.data());
  ws.p2.resize(static_cast<std::size_t>(spec_.c2) * s4 * s4);
  ws.arg2.resize(ws.p2.size());
  k::maxpool2_forward(ws.a2.data(), spec_.c2, s2, s2, ws.p2.data(), ws.arg2.data());

  z.resize(static_cast<std::size_t>(spec_.c3) * s4 * s4);
  k::conv2d3x3_forward(ws.p2.data(), spec_.c2, s4, s4, params_.w3.data(), params_.b3.data(),
                       spec_.c3, z.data());
  ws.a3.resize(z.size());
  k::relu_forward(z.data(), z.size(), ws.a3.data());

  const std::size_t plane3 = static_cast<std::size_t>(s4) * s4;
  ws.gap.assign(spec_.c3, 0.0f);
  for (int ch = 0; ch < spec_.c3; ++ch) {
    double acc = 0.0;
    const float* p = ws.a3.data() + ch * plane3;
    for (std::size_t i = 0; i < plane3; ++i) acc += p[i];
    ws.gap[ch] = static_cast<float>(acc / static_cast<double>(plane3));
  }

  ws.logits.assign(spec_.num_classes, 0.0f);
  for (int n = 0; n < spec_.num_classes; ++n) {
    double acc = params_.bfc[n];
    const float* w = params_.wfc.data() + static_cast<std::size_t>(n) * spec_.c3;
    for (int ch = 0; ch < spec_.c3; ++ch) acc += w[ch] * ws.gap[ch];
    ws.logits[n] = static_cast<float>(acc);
  }
}

void ToyCnn::backward(const Workspace& ws, const std::vector<float>& dlogits, Tensors& grads,
                      std::vector<float>* input_grad) const {
  const int s = spec_.input_side;
  const int s2 = s / 2;
  const int s4 = s / 4;
  const std::size_t plane3 = static_cast<std::size_t>(s4) * s4;

  // Linear head.
  std::vector<float> dgap(spec_.c3, 0.0f);
  for (int n = 0; n < spec_.num_classes; ++n) {
    const float g = dlogits[n];
    grads.bfc[n] += g;
    const float* w = params_.wfc.data() + static_cast<std::size_t>(n) * spec_.c3;
    float* dw = grads.wfc.data() + static_cast<std::size_t>(n) * spec_.c3;
    for (int ch = 0; ch < spec_.c3; ++ch) {
      dw[ch] += g * ws.gap[ch];
      dgap[ch] += g * w[ch];
    }
  }

  // Global average pooling spreads each channel gradient uniformly.
  std::vector<float> da3(ws.a3.size());
  const float inv_plane = 1.0f / static_cast<float>(plane3);
  for (int ch = 0; ch < spec_.c3; ++ch) {
    const float g = dgap[ch] * inv_plane;
    float* p = da3.data() + ch * plane3;
    for (std::size_t i = 0; i < plane3; ++i) p[i] = g;
  }

  std::vector<float> dz3(da3.size());
  k::relu_backward(ws.a3.data(), da3.data(), da3.size(), dz3.data());
  std::vector<float> dw3(params_.w3.size());
  std::vector<float> db3(params_.b3.size());
  k::conv2d3x3_backward_params(ws.p2.data(), spec_.c2, s4, s4, dz3.data(), spec_.c3, dw3.data(),
                               db3.data());
  for (std::size_t i = 0; i < dw3.size(); ++i) grads.w3[i] += dw3[i];
  for (std::size_t i = 0; i < db3.size(); ++i) grads.b3[i] += db3[i];
  std::vector<float> dp2(ws.p2.size());
  k::conv2d3x3_backward_data(dz3.data(), spec_.c3, s4, s4, params_.w3.data(), spec_.c2, dp2.data());

  std::vector<float> da2(ws.a2.size());
  k::maxpool2_backward(dp2.data(), spec_.c2, s2, s2, ws.arg2.data(), da2.data());
  std::vector<float> dz2(da2.size());
  k::relu_backward(ws.a2.data(), da2.data(), da2.size(), dz2.data());
  std::vector<float> dw2(params_.w2.size());
  std::vector<float> db2(params_.b2.size());
  k::conv2d3x3_backward_params(ws.p1.data(), spec_.c1, s2, s2, dz2.data(), spec_.c2, dw2.data(),
                               db2.data());
  for (std::size_t i = 0; i < dw2.size(); ++i) grads.w2[i] += dw2[i];
  for (std::size_t i = 0; i < db2.size(); ++i) grads.b2[i] += db2[i];
  std::vector<float> dp1(ws.p1.size());
  k::conv2d3x3_backward_data(dz2.data(), spec_.c2, s2, s2, params_.w2.data(), spec_.c1, dp1.data());

  std::vector<float> da1(ws.a1.size());
  k::maxpool2_backward(dp1.data(), spec_.c1, s, s, ws.arg1.data(), da1.data());
  std::vector<float> dz1(da1.size());
  k::relu_backward(ws.a1.data(), da1.data(), da1.size(), dz1.data());
  std::vector<float> dw1(params_.w1.size());
  std::vector<float> db1(params_.b1.size());
  k::conv2d3x3_backward_params(ws.input.data(), 3, s, s, dz1.data(), spec_.c1, dw1.data(),
                               db1.data());
  for (std::size_t i = 0; i < dw1.size(); ++i) grads.w1[i] += dw1[i];
  for (std::size_t i = 0; i < db1.size(); ++i) grads.b1[i] += db1[i];

  if (input_grad) {
    input_grad->resize(ws.input.size());
    k::conv2d3x3_backward_data(dz1.data(), spec_.c1, s, s, params_.w1.data(), 3,
                               input_grad->data());
  }
}

std::vector<float> ToyCnn::predict_logits(const ImageTensor& x) const {
  Workspace ws;
  forward(x, ws);
  return ws.logits;
}

std::vector<float> ToyCnn::input_gradient(const ImageTensor& x, int target) const {
  if (target < 0 || target >= spec_.num_classes)
    throw Error(ErrorCode::ShapeMismatch, "target class out of range");
  Workspace ws;
  forward(x, ws);
  std::vector<float> dlogits(spec_.num_classes, 0.0f);
  dlogits[target] = 1.0f;
  Tensors grads;
  grads.resize_like(spec_);
  grads.fill_zero();
  std::vector<float> input_grad;
  backward(ws, dlogits, grads, &input_grad);
  return input_grad;
}

ActivationTap ToyCnn::activation_gradients(const ImageTensor& x, int target) const {
  if (target < 0 || target >= spec_.num_classes)
    throw Error(ErrorCode::ShapeMismatch, "target class out of range");
  Workspace ws;
  forward(x, ws);
  const int s4 = spec_.input_side / 4;
  const std::size_t plane3 = static_cast<std::size_t>(s4) * s4;

  ActivationTap tap;
  tap.channels = spec_.c3;
  tap.rows = s4;
  tap.cols = s4;
  tap.activations = ws.a3;
  tap.gradients.resize(ws.a3.size());
  // d logit_target / d a3: through the linear head and the average pool.
  const float inv_plane = 1.0f / static_cast<float>(plane3);
  const float* w = params_.wfc.data() + static_cast<std::size_t>(target) * spec_.c3;
  for (int ch = 0; ch < spec_.c3; ++ch) {
    const float g = w[ch] * inv_plane;
    float* p = tap.gradients.data() + ch * plane3;
    for (std::size_t i = 0; i < plane3; ++i) p[i] = g;
  }
  return tap;
}

double ToyCnn::sample_gradients(const ImageTensor& x, int label, double label_smoothing,
                                Tensors& grads, std::vector<float>* input_grad) const {
  Workspace ws;
  forward(x, ws);
  const int n = spec_.num_classes;
  std::vector<float> probs = softmax(ws.logits);

  double loss = 0.0;
  std::vector<float> dlogits(n);
  const double eps = label_smoothing;
  for (int i = 0; i < n; ++i) {
    const double q = (i == label ? 1.0 - eps : 0.0) + eps / n;
    loss -= q * std::log(std::max(1e-12, static_cast<double>(probs[i])));
    dlogits[i] = static_cast<float>(probs[i] - q);
  }
  backward(ws, dlogits, grads, input_grad);
  return loss;
}

namespace {
constexpr std::uint32_t kMagic = 0x47585443;  // "GXTC"
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

void write_tensor(std::ofstream& out, const std::vector<float>& t) {
  write_u32(out, static_cast<std::uint32_t>(t.size()));
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
}

void read_tensor(std::ifstream& in, std::vector<float>& t) {
  std::uint32_t n = read_u32(in);
  if (n != t.size()) throw Error(ErrorCode::SchemaError, "weights file tensor size mismatch");
  in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(n * sizeof(float)));
}
}  // namespace

void ToyCnn::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot open for write: " + path.string());
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(spec_.input_side));
  write_u32(out, static_cast<std::uint32_t>(spec_.num_classes));
  write_u32(out, static_cast<std::uint32_t>(spec_.c1));
  write_u32(out, static_cast<std::uint32_t>(spec_.c2));
  write_u32(out, static_cast<std::uint32_t>(spec_.c3));
  for (const auto* t : {&params_.w1, &params_.b1, &params_.w2, &params_.b2, &params_.w3,
                        &params_.b3, &params_.wfc, &params_.bfc})
    write_tensor(out, *t);
  if (!out) throw Error(ErrorCode::MissingFile, "write failed: " + path.string());
}

std::unique_ptr<ToyCnn> ToyCnn::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  if (read_u32(in) != kMagic) throw Error(ErrorCode::SchemaError, "not a toy-cnn weights file");
  if (read_u32(in) != kVersion)
    throw Error(ErrorCode::SchemaError, "unsupported toy-cnn weights version");
  Spec spec;
  spec.input_side = static_cast<int>(read_u32(in));
  spec.num_classes = static_cast<int>(read_u32(in));
  spec.c1 = static_cast<int>(read_u32(in));
  spec.c2 = static_cast<int>(read_u32(in));
  spec.c3 = static_cast<int>(read_u32(in));
  auto model = std::make_unique<ToyCnn>(spec, 0);
  for (auto* t : {&model->params_.w1, &model->params_.b1, &model->params_.w2, &model->params_.b2,
                  &model->params_.w3, &model->params_.b3, &model->params_.wfc, &model->params_.bfc})
    read_tensor(in, *t);
  if (!in) throw Error(ErrorCode::SchemaError, "truncated weights file: " + path.string());
  return model;
}

}  // namespace geoxplain::classifier
