#pragma once

#include <cstddef>
#include <cstdint>

namespace geoxplain::kernels {

// Data-parallel inner loops of the pipeline. All tensors are planar CHW,
// row-major within a channel. The `serial` namespace holds the reference
// implementations; the top-level functions run the same arithmetic with
// OpenMP across independent output elements and must produce bitwise
// identical results (every output element keeps its serial accumulation
// order). tools/bench_kernels.cpp compares the two.

namespace serial {

// 3x3 convolution, stride 1, zero padding 1. weights: [cout][cin][3][3].
void conv2d3x3_forward(const float* in, int cin, int h, int w, const float* weights,
                       const float* bias, int cout, float* out);
void conv2d3x3_backward_data(const float* dout, int cout, int h, int w, const float* weights,
                             int cin, float* din);
void conv2d3x3_backward_params(const float* in, int cin, int h, int w, const float* dout,
                               int cout, float* dweights, float* dbias);

void relu_forward(const float* in, std::size_t n, float* out);
void relu_backward(const float* in, const float* dout, std::size_t n, float* din);

// 2x2 max pooling, stride 2; argmax records the within-plane flat index of
// each window's winner for the backward pass.
void maxpool2_forward(const float* in, int channels, int h, int w, float* out,
                      std::int32_t* argmax);
void maxpool2_backward(const float* dout, int channels, int h, int w, const std::int32_t* argmax,
                       float* din);

// Half-pixel bilinear resampling; exact copy when shapes match.
void resize_bilinear(const float* in, int channels, int h, int w, float* out, int oh, int ow);

// out(r,c) = max(0, sum_k weights[k] * maps[k](r,c))  -- CAM combination.
void weighted_channel_sum_relu(const float* maps, int channels, int h, int w,
                               const float* weights, float* out);

// Writes fill[c] into every pixel whose region bit matches `fill_where_set`.
void fill_region(float* chw, int channels, int h, int w, const std::uint8_t* region,
                 bool fill_where_set, const float* fill);

}  // namespace serial

void conv2d3x3_forward(const float* in, int cin, int h, int w, const float* weights,
                       const float* bias, int cout, float* out);
void conv2d3x3_backward_data(const float* dout, int cout, int h, int w, const float* weights,
                             int cin, float* din);
void conv2d3x3_backward_params(const float* in, int cin, int h, int w, const float* dout,
                               int cout, float* dweights, float* dbias);
void relu_forward(const float* in, std::size_t n, float* out);
void relu_backward(const float* in, const float* dout, std::size_t n, float* din);
void maxpool2_forward(const float* in, int channels, int h, int w, float* out,
                      std::int32_t* argmax);
void maxpool2_backward(const float* dout, int channels, int h, int w, const std::int32_t* argmax,
                       float* din);
void resize_bilinear(const float* in, int channels, int h, int w, float* out, int oh, int ow);
void weighted_channel_sum_relu(const float* maps, int channels, int h, int w,
                               const float* weights, float* out);
void fill_region(float* chw, int channels, int h, int w, const std::uint8_t* region,
                 bool fill_where_set, const float* fill);

}  // namespace geoxplain::kernels
