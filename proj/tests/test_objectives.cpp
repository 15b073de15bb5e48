// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "blur.hpp"
#include "errors.hpp"
#include "objectives.hpp"
#include "test_util.hpp"

using namespace sardiff;
using sardiff::testing::random_normal;
using sardiff::testing::random_uniform;

namespace {

// Normalised 21-tap, sigma 3 Gaussian: centre and the two taps next to it.
constexpr double kTap0 = 0.1330390063453629;
constexpr double kTap1 = 0.12584950778634327;
constexpr double kTap2 = 0.10652930842761864;

// Mirror about the edge samples: -1 -> 1, n -> n - 2.
int mirror(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

// Brute-force 2-D convolution with the full outer-product kernel.
ImageTensor direct_blur(const ImageTensor& img, const BlurSpec& spec) {
  const int r = spec.kernel_size / 2;
  std::vector<double> g(spec.kernel_size);
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += g[i + r] = std::exp(-(i * i) / (2 * spec.sigma * spec.sigma));
  ImageTensor out(img.n(), img.c(), img.h(), img.w());
  for (int n = 0; n < img.n(); ++n)
    for (int c = 0; c < img.c(); ++c)
      for (int y = 0; y < img.h(); ++y)
        for (int x = 0; x < img.w(); ++x) {
          double acc = 0;
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx)
              acc += g[dy + r] * g[dx + r] / (sum * sum) *
                     img.at(n, c, mirror(y + dy, img.h()), mirror(x + dx, img.w()));
          out.at(n, c, y, x) = static_cast<float>(acc);
        }
  return out;
}

double plain_mse(const ImageTensor& a, const ImageTensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("kernel taps") {
  const auto taps = gaussian_taps(BlurSpec{});
  REQUIRE(taps.size() == 21);
  CHECK(std::abs(std::accumulate(taps.begin(), taps.end(), 0.0) - 1.0) <= 1e-9);
  CHECK(taps[10] == doctest::Approx(kTap0).epsilon(1e-14));
  CHECK(taps[9] == doctest::Approx(kTap1).epsilon(1e-14));
  CHECK(taps[8] == doctest::Approx(kTap2).epsilon(1e-14));
  for (int i = 0; i < 21; ++i) {
    CHECK(taps[i] >= 0);
    CHECK(taps[i] == taps[20 - i]);
  }
  for (int k : {1, 3, 5, 31}) {
    const auto t = gaussian_taps(BlurSpec{k, 1.7});
    CHECK(std::abs(std::accumulate(t.begin(), t.end(), 0.0) - 1.0) <= 1e-9);
  }
}

TEST_CASE("blur spec validation") {
  CHECK_THROWS_AS(gaussian_taps(BlurSpec{20, 3.0}), ParameterError);
  CHECK_THROWS_AS(gaussian_taps(BlurSpec{0, 3.0}), ParameterError);
  CHECK_THROWS_AS(gaussian_taps(BlurSpec{5, 0.0}), ParameterError);
  CHECK_THROWS_AS(gaussian_blur(ImageTensor(1, 3, 8, 8), BlurSpec{4, 1.0}), ParameterError);
}

TEST_CASE("reflect index") {
  CHECK(reflect_index(-1, 5) == 1);
  CHECK(reflect_index(-2, 5) == 2);
  CHECK(reflect_index(5, 5) == 3);
  CHECK(reflect_index(6, 5) == 2);
  CHECK(reflect_index(0, 1) == 0);
  for (int i = -40; i < 40; ++i) CHECK(reflect_index(i, 7) == mirror(i, 7));
}

TEST_CASE("constant images are fixed points") {
  for (int size : {4, 16, 64}) {
    const ImageTensor img(2, 3, size, size, 0.37f);
    const auto out = gaussian_blur(img, BlurSpec{});
    for (float v : out.storage()) CHECK(std::abs(v - 0.37f) <= 1e-6);
  }
}

TEST_CASE("impulse response is the kernel") {
  ImageTensor img(1, 1, 41, 41);
  img.at(0, 0, 20, 20) = 1.0f;
  const auto out = gaussian_blur(img, BlurSpec{});
  CHECK(out.at(0, 0, 20, 20) == doctest::Approx(kTap0 * kTap0).epsilon(1e-6));
  CHECK(out.at(0, 0, 20, 21) == doctest::Approx(kTap0 * kTap1).epsilon(1e-6));
  CHECK(out.at(0, 0, 22, 19) == doctest::Approx(kTap2 * kTap1).epsilon(1e-6));
  const auto taps = gaussian_taps(BlurSpec{});
  for (int dy = -10; dy <= 10; ++dy)
    for (int dx = -10; dx <= 10; ++dx)
      CHECK(std::abs(out.at(0, 0, 20 + dy, 20 + dx) - taps[dy + 10] * taps[dx + 10]) <= 1e-7);
  CHECK(out.at(0, 0, 0, 0) == 0.0f);
}

TEST_CASE("separable blur equals direct 2-D convolution") {
  const auto img = random_uniform<float>(2, 3, 16, 16, 5);
  for (const BlurSpec spec : {BlurSpec{}, BlurSpec{5, 1.0}, BlurSpec{9, 2.0}}) {
    const auto a = gaussian_blur(img, spec);
    const auto b = direct_blur(img, spec);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-6);
  }
  // Non-square, and a radius larger than the image.
  const auto tall = random_uniform<float>(1, 1, 12, 5, 6);
  const auto a = gaussian_blur(tall, BlurSpec{});
  const auto b = direct_blur(tall, BlurSpec{});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-6);
}

TEST_CASE("blur is linear and its adjoint is exact") {
  const auto x = random_normal<double>(1, 2, 13, 11, 7);
  const auto y = random_normal<double>(1, 2, 13, 11, 8);
  const BlurSpec spec{};
  Tensor<double> mix(1, 2, 13, 11);
  for (std::size_t i = 0; i < x.size(); ++i) mix[i] = 2.5 * x[i] - 0.75 * y[i];
  const auto bm = gaussian_blur(mix, spec), bx = gaussian_blur(x, spec), by = gaussian_blur(y, spec);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(bm[i] - (2.5 * bx[i] - 0.75 * by[i])) <= 1e-6);

  const auto aty = gaussian_blur_adjoint(y, spec);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lhs += bx[i] * y[i];
    rhs += x[i] * aty[i];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("simple loss") {
  const auto a = random_normal<float>(2, 3, 8, 8, 1);
  const auto b = random_normal<float>(2, 3, 8, 8, 2);
  CHECK(simple_loss(a, a) == 0.0);
  CHECK(simple_loss(ImageTensor(1, 3, 4, 4, 0.0f), ImageTensor(1, 3, 4, 4, 1.0f)) == 1.0);
  CHECK(std::abs(simple_loss(a, b) - plain_mse(a, b)) <= 1e-7);
  CHECK(simple_loss(a, b) > 0);
  CHECK_THROWS_AS(simple_loss(a, ImageTensor(2, 3, 8, 7)), ShapeError);
}

TEST_CASE("colour loss") {
  const auto a = random_uniform<float>(1, 3, 16, 16, 3);
  CHECK(color_loss(a, a, BlurSpec{}) == 0.0);
  // Constant images: blur preserves DC, so the loss is the squared offset.
  CHECK(color_loss(ImageTensor(1, 3, 16, 16, 0.2f), ImageTensor(1, 3, 16, 16, -0.5f), BlurSpec{}) ==
        doctest::Approx(0.49).epsilon(1e-6));
  CHECK(color_loss(ImageTensor(1, 3, 16, 16, 0.2f), ImageTensor(1, 3, 16, 16, -0.5f), BlurSpec{3, 0.5}) ==
        doctest::Approx(0.49).epsilon(1e-6));
  // A single-pixel spike is mostly blurred away.
  ImageTensor spike = a;
  spike.at(0, 1, 8, 8) += 1.0f;
  const double c = color_loss(a, spike, BlurSpec{});
  CHECK(c > 0);
  CHECK(c < plain_mse(a, spike));
  CHECK(c == doctest::Approx(plain_mse(gaussian_blur(a, BlurSpec{}), gaussian_blur(spike, BlurSpec{}))));
  CHECK_THROWS_AS(color_loss(a, ImageTensor(1, 3, 16, 15), BlurSpec{}), ShapeError);
}

TEST_CASE("colour loss never exceeds the plain MSE") {
  for (int i = 0; i < 50; ++i) {
    const auto x = random_uniform<float>(1, 3, 16, 16, 100 + i);
    const auto y = random_uniform<float>(1, 3, 16, 16, 200 + i);
    CHECK(color_loss(x, y, BlurSpec{}) <= plain_mse(x, y) + 1e-6);
    CHECK(color_loss(x, y, BlurSpec{5, 1.0}) <= plain_mse(x, y) + 1e-6);
  }
}

TEST_CASE("training loss with the true noise is zero") {
  const auto sched = make_linear_schedule(1000, 1e-4, 0.02);
  const auto x0 = random_uniform<float>(2, 3, 16, 16, 9);
  const auto eps = random_normal<float>(2, 3, 16, 16, 10);
  const ImageTensor cond(2, 1, 16, 16);
  const std::vector<int> t{1, 600};
  // Returns exactly the eps used to build x_t.
  struct Truth final : NoisePredictor {
    const ImageTensor& eps;
    explicit Truth(const ImageTensor& e) : eps(e) {}
    ImageTensor predict(const ImageTensor&, std::span<const int>, const ImageTensor&) const override {
      return eps;
    }
  } truth(eps);
  const auto l = training_loss(truth, x0, cond, t, eps, sched, BlurSpec{}, 1.0);
  CHECK(l.simple == 0.0);
  CHECK(l.color <= 1e-9);
  CHECK(l.total == l.simple + l.color_weight * l.color);
}

TEST_CASE("loss breakdown total is simple plus weighted colour") {
  const auto sched = make_linear_schedule(1000, 1e-4, 0.02);
  const auto x0 = random_uniform<float>(2, 3, 16, 16, 11);
  const auto eps = random_normal<float>(2, 3, 16, 16, 12);
  const auto eps_hat = random_normal<float>(2, 3, 16, 16, 13);
  const std::vector<int> t{10, 300};
  const auto xt = q_sample(x0, t, eps, sched);
  for (double w : {0.0, 1.0, 0.25}) {
    const auto l = loss_from_prediction(x0, xt, t, eps, eps_hat, sched, BlurSpec{}, w);
    CHECK(l.color_weight == w);
    CHECK(l.total == l.simple + w * l.color);
    CHECK(l.color > 0);
    if (w == 0.0) CHECK(l.total == l.simple);
  }
}

TEST_CASE("U-Net loss agrees with the predictor path") {
  UNetConfig cfg;
  cfg.base_channels = 8;
  cfg.time_dim = 16;
  cfg.norm_groups = 4;
  const UNet<float> net(cfg, 3);
  const UNetPredictor predictor(net);
  const auto sched = make_linear_schedule(1000, 1e-4, 0.02);
  const auto x0 = random_uniform<float>(2, 3, 16, 16, 14);
  const auto cond = random_uniform<float>(2, 1, 16, 16, 15);
  const auto eps = random_normal<float>(2, 3, 16, 16, 16);
  const std::vector<int> t{5, 700};
  const auto a = training_loss(predictor, x0, cond, t, eps, sched, BlurSpec{}, 1.0);
  const auto b = training_loss<float>(net, x0, cond, t, eps, sched, BlurSpec{}, 1.0, nullptr);
  CHECK(b.simple == doctest::Approx(a.simple).epsilon(1e-5));
  CHECK(b.color == doctest::Approx(a.color).epsilon(1e-4));
}
