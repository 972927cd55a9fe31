#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geoxplain/attribution.hpp"
#include "geoxplain/errors.hpp"
#include "geoxplain/rng.hpp"
#include "geoxplain/toy_cnn.hpp"

using namespace geoxplain;
using namespace geoxplain::attribution;

namespace {

Grid<float> random_map(int rows, int cols, std::uint64_t seed) {
  Grid<float> map(rows, cols);
  Pcg32 rng(seed);
  for (std::size_t i = 0; i < map.size(); ++i) map[i] = static_cast<float>(rng.uniform(0.0, 1.0));
  return map;
}

AttributionMap wrap(Grid<float> values) {
  AttributionMap map;
  map.values = std::move(values);
  map.method = "test";
  return map;
}

// Independent oracle: sort pixel indices by (value desc, index asc), take k.
BitGrid sort_and_take_k(const Grid<float>& values, double p) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  });
  const std::size_t k =
      static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  BitGrid bits(values.rows(), values.cols());
  for (std::size_t i = 0; i < k; ++i) bits[order[i]] = 1;
  return bits;
}

// Fixed-activation adapter for exercising the CAM path without training.
class CannedTapAdapter : public classifier::ClassifierAdapter {
 public:
  CannedTapAdapter(classifier::ActivationTap tap, int side) : tap_(std::move(tap)), side_(side) {}
  std::string name() const override { return "canned"; }
  int num_classes() const override { return 2; }
  int input_side() const override { return side_; }
  classifier::Capabilities capabilities() const override {
    return {.probabilities = true, .activation_maps = true};
  }
  std::vector<float> predict_logits(const ImageTensor&) const override { return {0.0f, 1.0f}; }
  classifier::ActivationTap activation_gradients(const ImageTensor&, int) const override {
    return tap_;
  }

 private:
  classifier::ActivationTap tap_;
  int side_;
};

}  // namespace

TEST_CASE("normalize_map rescales {0,5,10} to {0,0.5,1}") {
  Grid<float> values(1, 3);
  values[0] = 0.0f;
  values[1] = 5.0f;
  values[2] = 10.0f;
  auto map = normalize_map(wrap(std::move(values)));
  CHECK(map.values[0] == 0.0f);
  CHECK(map.values[1] == doctest::Approx(0.5f));
  CHECK(map.values[2] == 1.0f);
}

TEST_CASE("normalize_map sends constant maps to all zeros") {
  Grid<float> values(4, 4);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = 0.7f;
  auto map = normalize_map(wrap(std::move(values)));
  for (std::size_t i = 0; i < map.values.size(); ++i) CHECK(map.values[i] == 0.0f);
}

TEST_CASE("normalize_map is idempotent on 100 random maps") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto once = normalize_map(wrap(random_map(6, 7, seed)));
    auto twice = normalize_map(once);
    CHECK(twice.values == once.values);
    float max_value = 0.0f;
    for (std::size_t i = 0; i < once.values.size(); ++i) {
      CHECK(once.values[i] >= 0.0f);
      CHECK(once.values[i] <= 1.0f);
      max_value = std::max(max_value, once.values[i]);
    }
    CHECK(max_value == 1.0f);
  }
}

TEST_CASE("normalize_map rejects non-finite values") {
  Grid<float> values(2, 2);
  values[3] = std::numeric_limits<float>::quiet_NaN();
  try {
    normalize_map(wrap(std::move(values)));
    FAIL("expected NonFiniteValues");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteValues);
  }
}

TEST_CASE("threshold_top_p selects everything at p=100") {
  auto map = normalize_map(wrap(random_map(5, 5, 1)));
  auto mask = threshold_top_p(map, 100.0);
  CHECK(popcount(mask.bits) == 25);
}

TEST_CASE("threshold_top_p 2x2 p=25 keeps only the maximum") {
  Grid<float> values(2, 2);
  values.at(0, 0) = 0.1f;
  values.at(0, 1) = 0.2f;
  values.at(1, 0) = 0.3f;
  values.at(1, 1) = 0.4f;
  auto map = wrap(std::move(values));
  auto mask = threshold_top_p(map, 25.0);
  CHECK(mask.bits == sort_and_take_k(map.values, 25.0));  // oracle agreement
  CHECK(popcount(mask.bits) == 1);
  CHECK(mask.bits.at(1, 1) == 1);
}

TEST_CASE("threshold_top_p resolves ties in row-major order") {
  Grid<float> values(4, 4, 0.5f);
  auto mask = threshold_top_p(wrap(std::move(values)), 50.0);
  CHECK(popcount(mask.bits) == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(mask.bits[i] == 1);
  for (std::size_t i = 8; i < 16; ++i) CHECK(mask.bits[i] == 0);
}

TEST_CASE("threshold_top_p rejects percentiles outside (0, 100]") {
  auto map = wrap(random_map(3, 3, 2));
  CHECK_THROWS_AS(threshold_top_p(map, 0.0), Error);
  CHECK_THROWS_AS(threshold_top_p(map, -5.0), Error);
  CHECK_THROWS_AS(threshold_top_p(map, 100.5), Error);
}

TEST_CASE("threshold contract: cardinality, dominance and nesting over random maps") {
  const double percentiles[4] = {1.0, 20.0, 50.0, 100.0};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto map = normalize_map(wrap(random_map(8, 8, 100 + seed)));
    BitGrid previous;
    for (double p : percentiles) {
      auto mask = threshold_top_p(map, p);
      const auto expected_k =
          static_cast<std::int64_t>(std::ceil(p / 100.0 * static_cast<double>(map.values.size())));
      CHECK(popcount(mask.bits) == expected_k);
      CHECK(mask.bits == sort_and_take_k(map.values, p));

      // Value dominance outside the cutoff tie class.
      float min_selected = 2.0f, max_unselected = -1.0f;
      for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        if (mask.bits[i]) min_selected = std::min(min_selected, map.values[i]);
        else max_unselected = std::max(max_unselected, map.values[i]);
      }
      if (max_unselected >= 0.0f) CHECK(min_selected >= max_unselected);

      // Monotone nesting in p.
      if (!previous.empty()) {
        for (std::size_t i = 0; i < mask.bits.size(); ++i) {
          if (previous[i]) CHECK(mask.bits[i]);
        }
      }
      previous = mask.bits;
    }
  }
}

TEST_CASE("stub backend peaks at the image center after normalization") {
  classifier::StubClassifier stub({0.0f, 1.0f}, 16);
  ImageTensor x(16, 16, Normalization::standardized);
  auto map = compute_attribution(stub, x, 0, "stub", {});
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (map.values[i] > map.values[argmax]) argmax = i;
  }
  // Center of a 16x16 grid with the bump at (7.5, 7.5): ties resolve to the
  // first of the four central pixels in row-major order.
  CHECK(argmax / 16 >= 7);
  CHECK(argmax / 16 <= 8);
  CHECK(argmax % 16 >= 7);
  CHECK(argmax % 16 <= 8);
  CHECK(map.values[argmax] == 1.0f);
}

TEST_CASE("refcam localizes a canned activation bump") {
  // One channel, activations concentrated in the top-left quadrant,
  // uniformly positive gradient: the CAM must peak inside that quadrant.
  classifier::ActivationTap tap;
  tap.channels = 1;
  tap.rows = 4;
  tap.cols = 4;
  tap.activations.assign(16, 0.0f);
  tap.activations[0] = 1.0f;
  tap.activations[1] = 0.8f;
  tap.activations[4] = 0.9f;
  tap.activations[5] = 0.7f;
  tap.gradients.assign(16, 0.25f);
  CannedTapAdapter model(tap, 16);
  ImageTensor x(16, 16, Normalization::standardized);
  auto map = compute_attribution(model, x, 0, "refcam", {});
  CHECK(map.values.rows() == 16);
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (map.values[i] > map.values[argmax]) argmax = i;
  }
  CHECK(argmax / 16 < 8);
  CHECK(argmax % 16 < 8);
}

TEST_CASE("refcam requires the activation-maps capability") {
  classifier::StubClassifier stub({0.0f, 1.0f}, 8);
  ImageTensor x(8, 8, Normalization::standardized);
  try {
    compute_attribution(stub, x, 0, "refcam", {});
    FAIL("expected CapabilityMissing");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CapabilityMissing);
  }
}

TEST_CASE("smoothgrad with zero noise and one sample equals the plain-gradient map") {
  classifier::ToyCnn::Spec spec;
  spec.input_side = 8;
  spec.num_classes = 2;
  spec.c1 = 4;
  spec.c2 = 4;
  spec.c3 = 4;
  classifier::ToyCnn model(spec, 33);
  ImageTensor x(8, 8, Normalization::standardized);
  Pcg32 rng(5);
  for (float& v : x.values) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  AttributionConfig config;
  config.smoothgrad_noise = 0.0;
  config.smoothgrad_samples = 1;
  auto map = compute_attribution(model, x, 1, "smoothgrad", config);

  // Plain-gradient oracle straight from the adapter.
  std::vector<float> grad = model.input_gradient(x, 1);
  Grid<float> plain(8, 8);
  for (std::size_t i = 0; i < plain.size(); ++i)
    plain[i] = static_cast<float>(
        (std::fabs(grad[i]) + std::fabs(grad[64 + i]) + std::fabs(grad[128 + i])) / 3.0);
  Grid<float> expected = normalize_values(std::move(plain));
  for (std::size_t i = 0; i < expected.size(); ++i)
    CHECK(map.values[i] == doctest::Approx(expected[i]).epsilon(1e-6));
}

TEST_CASE("published CAM variants route to the external slot") {
  classifier::StubClassifier stub({0.0f, 1.0f}, 8);
  ImageTensor x(8, 8, Normalization::standardized);
  for (const char* method : {"gradcam", "gradcampp", "scorecam"}) {
    try {
      compute_attribution(stub, x, 0, method, {});
      FAIL("expected BackendFailure for ", method);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BackendFailure);
      CHECK(std::string(e.what()).find("refcam") != std::string::npos);
    }
  }
  CHECK_THROWS_AS(compute_attribution(stub, x, 0, "no-such-method", {}), Error);
}
