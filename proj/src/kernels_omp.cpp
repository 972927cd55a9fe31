#include <algorithm>
#include <cmath>

#include "geoxplain/kernels.hpp"
#include "geoxplain/parallel.hpp"

// OpenMP variants. Parallelism is only ever across independent output
// elements; the per-element accumulation order matches the serial reference
// exactly, so results are bitwise identical for any thread count.

namespace geoxplain::kernels {

void conv2d3x3_forward(const float* in, int cin, int h, int w, const float* weights,
                       const float* bias, int cout, float* out) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const bool par = par::enabled();
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int co = 0; co < cout; ++co) {
    for (int r = 0; r < h; ++r) {
      float* out_row = out + co * plane + static_cast<std::size_t>(r) * w;
      const float* wco = weights + static_cast<std::size_t>(co) * cin * 9;
      for (int c = 0; c < w; ++c) {
        float acc = bias ? bias[co] : 0.0f;
        for (int ci = 0; ci < cin; ++ci) {
          const float* in_plane = in + ci * plane;
          const float* k = wco + ci * 9;
          for (int kr = 0; kr < 3; ++kr) {
            int rr = r + kr - 1;
            if (rr < 0 || rr >= h) continue;
            for (int kc = 0; kc < 3; ++kc) {
              int cc = c + kc - 1;
              if (cc < 0 || cc >= w) continue;
              acc += in_plane[rr * w + cc] * k[kr * 3 + kc];
            }
          }
        }
        out_row[c] = acc;
      }
    }
  }
}

void conv2d3x3_backward_data(const float* dout, int cout, int h, int w, const float* weights,
                             int cin, float* din) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const bool par = par::enabled();
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int ci = 0; ci < cin; ++ci) {
    for (int r = 0; r < h; ++r) {
      float* din_row = din + ci * plane + static_cast<std::size_t>(r) * w;
      for (int c = 0; c < w; ++c) {
        float acc = 0.0f;
        for (int co = 0; co < cout; ++co) {
          const float* dout_plane = dout + co * plane;
          const float* k = weights + (static_cast<std::size_t>(co) * cin + ci) * 9;
          for (int kr = 0; kr < 3; ++kr) {
            int rr = r - (kr - 1);
            if (rr < 0 || rr >= h) continue;
            for (int kc = 0; kc < 3; ++kc) {
              int cc = c - (kc - 1);
              if (cc < 0 || cc >= w) continue;
              acc += dout_plane[rr * w + cc] * k[kr * 3 + kc];
            }
          }
        }
        din_row[c] = acc;
      }
    }
  }
}

void conv2d3x3_backward_params(const float* in, int cin, int h, int w, const float* dout,
                               int cout, float* dweights, float* dbias) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const bool par = par::enabled();
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int co = 0; co < cout; ++co) {
    for (int ci = 0; ci < cin; ++ci) {
      const float* dout_plane = dout + co * plane;
      const float* in_plane = in + ci * plane;
      float* dw = dweights + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int kr = 0; kr < 3; ++kr) {
        for (int kc = 0; kc < 3; ++kc) {
          float acc = 0.0f;
          for (int r = 0; r < h; ++r) {
            int rr = r + kr - 1;
            if (rr < 0 || rr >= h) continue;
            for (int c = 0; c < w; ++c) {
              int cc = c + kc - 1;
              if (cc < 0 || cc >= w) continue;
              acc += dout_plane[r * w + c] * in_plane[rr * w + cc];
            }
          }
          dw[kr * 3 + kc] = acc;
        }
      }
      if (dbias && ci == 0) {
        float acc = 0.0f;
        for (std::size_t i = 0; i < plane; ++i) acc += dout_plane[i];
        dbias[co] = acc;
      }
    }
  }
}

void relu_forward(const float* in, std::size_t n, float* out) {
  const bool par = par::enabled();
  const std::int64_t count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t i = 0; i < count; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

void relu_backward(const float* in, const float* dout, std::size_t n, float* din) {
  const bool par = par::enabled();
  const std::int64_t count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t i = 0; i < count; ++i) din[i] = in[i] > 0.0f ? dout[i] : 0.0f;
}

void maxpool2_forward(const float* in, int channels, int h, int w, float* out,
                      std::int32_t* argmax) {
  const int oh = h / 2;
  const int ow = w / 2;
  const std::size_t in_plane = static_cast<std::size_t>(h) * w;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  const bool par = par::enabled();
#pragma omp parallel for schedule(static) if (par)
  for (int ch = 0; ch < channels; ++ch) {
    const float* src = in + ch * in_plane;
    float* dst = out + ch * out_plane;
    std::int32_t* arg = argmax ? argmax + ch * out_plane : nullptr;
    for (int r = 0; r < oh; ++r) {
      for (int c = 0; c < ow; ++c) {
        int base = (2 * r) * w + 2 * c;
        int best_idx = base;
        float best = src[base];
        const int candidates[3] = {base + 1, base + w, base + w + 1};
        for (int idx : candidates) {
          if (src[idx] > best) {
            best = src[idx];
            best_idx = idx;
          }
        }
        dst[r * ow + c] = best;
        if (arg) arg[r * ow + c] = best_idx;
      }
    }
  }
}

void maxpool2_backward(const float* dout, int channels, int h, int w, const std::int32_t* argmax,
                       float* din) {
  const int oh = h / 2;
  const int ow = w / 2;
  const std::size_t in_plane = static_cast<std::size_t>(h) * w;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  const bool par = par::enabled();
#pragma omp parallel for schedule(static) if (par)
  for (int ch = 0; ch < channels; ++ch) {
    float* dst = din + ch * in_plane;
    std::fill(dst, dst + in_plane, 0.0f);
    const float* src = dout + ch * out_plane;
    const std::int32_t* arg = argmax + ch * out_plane;
    for (std::size_t i = 0; i < out_plane; ++i) dst[arg[i]] += src[i];
  }
}

void resize_bilinear(const float* in, int channels, int h, int w, float* out, int oh, int ow) {
  const std::size_t in_plane = static_cast<std::size_t>(h) * w;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  const double scale_r = static_cast<double>(h) / oh;
  const double scale_c = static_cast<double>(w) / ow;
  const bool par = par::enabled();
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int ch = 0; ch < channels; ++ch) {
    for (int r = 0; r < oh; ++r) {
      const float* src = in + ch * in_plane;
      float* dst = out + ch * out_plane;
      double sr = (r + 0.5) * scale_r - 0.5;
      if (sr < 0.0) sr = 0.0;
      if (sr > h - 1) sr = h - 1;
      int r0 = static_cast<int>(sr);
      int r1 = std::min(r0 + 1, h - 1);
      double fr = sr - r0;
      for (int c = 0; c < ow; ++c) {
        double sc = (c + 0.5) * scale_c - 0.5;
        if (sc < 0.0) sc = 0.0;
        if (sc > w - 1) sc = w - 1;
        int c0 = static_cast<int>(sc);
        int c1 = std::min(c0 + 1, w - 1);
        double fc = sc - c0;
        double top = src[r0 * w + c0] * (1.0 - fc) + src[r0 * w + c1] * fc;
        double bot = src[r1 * w + c0] * (1.0 - fc) + src[r1 * w + c1] * fc;
        dst[r * ow + c] = static_cast<float>(top * (1.0 - fr) + bot * fr);
      }
    }
  }
}

void weighted_channel_sum_relu(const float* maps, int channels, int h, int w,
                               const float* weights, float* out) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::int64_t count = static_cast<std::int64_t>(plane);
  const bool par = par::enabled();
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t i = 0; i < count; ++i) {
    float acc = 0.0f;
    for (int ch = 0; ch < channels; ++ch) acc += weights[ch] * maps[ch * plane + i];
    out[i] = acc > 0.0f ? acc : 0.0f;
  }
}

void fill_region(float* chw, int channels, int h, int w, const std::uint8_t* region,
                 bool fill_where_set, const float* fill) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const bool par = par::enabled();
#pragma omp parallel for schedule(static) if (par)
  for (int ch = 0; ch < channels; ++ch) {
    float* dst = chw + ch * plane;
    const float value = fill[ch];
    for (std::size_t i = 0; i < plane; ++i) {
      if ((region[i] != 0) == fill_where_set) dst[i] = value;
    }
  }
}

}  // namespace geoxplain::kernels
