// Compares the serial reference kernels against the OpenMP versions on
// pipeline-sized problems and checks that outputs stay bitwise identical.

#include <omp.h>

#include <cstdio>
#include <cstring>
#include <vector>

#include "geoxplain/kernels.hpp"
#include "geoxplain/parallel.hpp"
#include "geoxplain/rng.hpp"

namespace k = geoxplain::kernels;

namespace {

std::vector<float> random_buffer(std::size_t n, std::uint64_t seed) {
  geoxplain::Pcg32 rng(seed);
  std::vector<float> buf(n);
  for (float& v : buf) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return buf;
}

struct BenchResult {
  double serial_ms = 0.0;
  double parallel_ms = 0.0;
  bool identical = true;
};

template <typename SerialFn, typename ParallelFn>
BenchResult run(int repeats, std::size_t out_elems, SerialFn serial, ParallelFn parallel) {
  std::vector<float> out_serial(out_elems, 0.0f), out_parallel(out_elems, 0.0f);
  BenchResult result;

  double t0 = omp_get_wtime();
  for (int i = 0; i < repeats; ++i) serial(out_serial.data());
  result.serial_ms = (omp_get_wtime() - t0) * 1000.0 / repeats;

  t0 = omp_get_wtime();
  for (int i = 0; i < repeats; ++i) parallel(out_parallel.data());
  result.parallel_ms = (omp_get_wtime() - t0) * 1000.0 / repeats;

  result.identical =
      std::memcmp(out_serial.data(), out_parallel.data(), out_elems * sizeof(float)) == 0;
  return result;
}

void print_row(const char* name, const BenchResult& r) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx   %s\n", name, r.serial_ms, r.parallel_ms,
              r.serial_ms / r.parallel_ms, r.identical ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int repeats = 5;
  if (argc > 1) repeats = std::max(1, std::atoi(argv[1]));

  std::printf("threads: %d, repeats: %d\n", geoxplain::par::max_threads(), repeats);
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  {
    const int cin = 16, cout = 16, h = 56, w = 56;
    auto in = random_buffer(static_cast<std::size_t>(cin) * h * w, 1);
    auto weights = random_buffer(static_cast<std::size_t>(cout) * cin * 9, 2);
    auto bias = random_buffer(cout, 3);
    const std::size_t out_elems = static_cast<std::size_t>(cout) * h * w;
    print_row("conv2d3x3_forward 16x56x56",
              run(repeats, out_elems,
                  [&](float* out) {
                    k::serial::conv2d3x3_forward(in.data(), cin, h, w, weights.data(), bias.data(),
                                                 cout, out);
                  },
                  [&](float* out) {
                    k::conv2d3x3_forward(in.data(), cin, h, w, weights.data(), bias.data(), cout,
                                         out);
                  }));
    auto dout = random_buffer(out_elems, 4);
    print_row("conv2d3x3_backward_data",
              run(repeats, static_cast<std::size_t>(cin) * h * w,
                  [&](float* out) {
                    k::serial::conv2d3x3_backward_data(dout.data(), cout, h, w, weights.data(),
                                                       cin, out);
                  },
                  [&](float* out) {
                    k::conv2d3x3_backward_data(dout.data(), cout, h, w, weights.data(), cin, out);
                  }));
  }

  {
    const int channels = 3, h = 640, w = 640, oh = 224, ow = 224;
    auto in = random_buffer(static_cast<std::size_t>(channels) * h * w, 5);
    const std::size_t out_elems = static_cast<std::size_t>(channels) * oh * ow;
    print_row("resize_bilinear 640->224",
              run(repeats, out_elems,
                  [&](float* out) {
                    k::serial::resize_bilinear(in.data(), channels, h, w, out, oh, ow);
                  },
                  [&](float* out) { k::resize_bilinear(in.data(), channels, h, w, out, oh, ow); }));
  }

  {
    const int channels = 16, h = 224, w = 224;
    auto maps = random_buffer(static_cast<std::size_t>(channels) * h * w, 6);
    auto weights = random_buffer(channels, 7);
    print_row("weighted_channel_sum_relu",
              run(repeats, static_cast<std::size_t>(h) * w,
                  [&](float* out) {
                    k::serial::weighted_channel_sum_relu(maps.data(), channels, h, w,
                                                         weights.data(), out);
                  },
                  [&](float* out) {
                    k::weighted_channel_sum_relu(maps.data(), channels, h, w, weights.data(), out);
                  }));
  }

  {
    const int h = 224, w = 224;
    auto image = random_buffer(static_cast<std::size_t>(3) * h * w, 8);
    std::vector<std::uint8_t> region(static_cast<std::size_t>(h) * w);
    geoxplain::Pcg32 rng(9);
    for (auto& bit : region) bit = rng.bounded(2) ? 1 : 0;
    const float fill[3] = {0.4f, 0.5f, 0.6f};
    print_row("fill_region 224x224",
              run(repeats, image.size(),
                  [&](float* out) {
                    std::memcpy(out, image.data(), image.size() * sizeof(float));
                    k::serial::fill_region(out, 3, h, w, region.data(), true, fill);
                  },
                  [&](float* out) {
                    std::memcpy(out, image.data(), image.size() * sizeof(float));
                    k::fill_region(out, 3, h, w, region.data(), true, fill);
                  }));
  }

  return 0;
}
