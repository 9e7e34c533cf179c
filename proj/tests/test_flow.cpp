#include <doctest.h>

#include <cstring>
#include <random>

#include "nvc/flow.hpp"
#include "test_support.hpp"

using namespace nvc;
using namespace nvc::flow;

TEST_CASE("image pyramid: extents halve per level") {
  const Tensor frame({1, 3, 64, 64}, 0.5f);
  const ImagePyramid p = build_image_pyramid(frame, 4);
  REQUIRE(p.levels.size() == 4);
  CHECK(p.levels[0].shape() == Shape{1, 3, 64, 64});
  CHECK(p.levels[1].shape() == Shape{1, 3, 32, 32});
  CHECK(p.levels[2].shape() == Shape{1, 3, 16, 16});
  CHECK(p.levels[3].shape() == Shape{1, 3, 8, 8});
  CHECK(p.pad_bottom == 0);
  CHECK(p.pad_right == 0);
}

TEST_CASE("image pyramid: constant input stays constant at every level") {
  const Tensor frame({1, 3, 32, 32}, 0.63f);
  const ImagePyramid p = build_image_pyramid(frame, 3);
  for (const Tensor& level : p.levels) {
    for (float v : level.vec()) CHECK(v == doctest::Approx(0.63f).epsilon(1e-6));
  }
}

TEST_CASE("image pyramid: single level returns the input") {
  std::mt19937_64 rng(61);
  const Tensor frame = test::random_tensor(rng, {1, 3, 17, 23});
  const ImagePyramid p = build_image_pyramid(frame, 1);
  REQUIRE(p.levels.size() == 1);
  CHECK(std::memcmp(p.levels[0].data(), frame.data(), size_t(frame.numel()) * 4) == 0);
}

TEST_CASE("image pyramid: non-divisible extents are edge-padded and recorded") {
  const Tensor frame({1, 3, 34, 45}, 0.2f);
  const ImagePyramid p = build_image_pyramid(frame, 4);
  CHECK(p.levels[0].shape() == Shape{1, 3, 40, 48});
  CHECK(p.pad_bottom == 6);
  CHECK(p.pad_right == 3);
  CHECK(p.levels[3].shape() == Shape{1, 3, 5, 6});
}

TEST_CASE("upsample_flow: doubles extents and displacement magnitudes") {
  Tensor f({1, 2, 8, 8});
  for (int64_t i = 0; i < 64; ++i) f.plane(0, 0)[i] = 1.0f;  // u = 1, v = 0
  const Tensor up = upsample_flow(f);
  CHECK(up.shape() == Shape{1, 2, 16, 16});
  for (int64_t i = 0; i < 256; ++i) {
    CHECK(up.plane(0, 0)[i] == doctest::Approx(2.0f).epsilon(1e-6));
    CHECK(up.plane(0, 1)[i] == doctest::Approx(0.0f));
  }
}

TEST_CASE("upsample_flow: zero flow stays zero") {
  const Tensor f({1, 2, 6, 6});
  const Tensor up = upsample_flow(f);
  for (float v : up.vec()) CHECK(v == 0.0f);
}

TEST_CASE("upsample_flow: mean magnitude doubles on piecewise-constant fields") {
  // Left half (2, 0), right half (4, 0); the seam blend conserves the sum.
  Tensor f({1, 2, 8, 8});
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) f.at(0, 0, y, x) = x < 4 ? 2.0f : 4.0f;
  }
  const Tensor up = upsample_flow(f);
  double mean_in = 0.0, mean_out = 0.0;
  for (int64_t i = 0; i < 64; ++i) mean_in += f.plane(0, 0)[i];
  for (int64_t i = 0; i < 256; ++i) mean_out += up.plane(0, 0)[i];
  mean_in /= 64.0;
  mean_out /= 256.0;
  CHECK(std::fabs(mean_out - 2.0 * mean_in) <= 1e-5);
}

TEST_CASE("estimate_flow: zero-initialized estimator gives exactly zero flow") {
  nn::Init init(77);
  FlowEstimator net(init);
  net.visit_params("flow", [](const std::string&, Parameter& p) {
    std::fill(p.value.vec().begin(), p.value.vec().end(), 0.0f);
  });
  std::mt19937_64 rng(62);
  const Tensor frame = test::random_tensor(rng, {1, 3, 64, 64}, 0.0f, 1.0f);
  const Tensor flow = net.estimate(frame, frame);
  CHECK(flow.shape() == Shape{1, 2, 64, 64});
  for (float v : flow.vec()) CHECK(v == 0.0f);
}

TEST_CASE("estimate_flow: output extents equal input extents despite padding") {
  nn::Init init(78);
  FlowEstimator net(init);
  std::mt19937_64 rng(63);
  const Tensor cur = test::random_tensor(rng, {1, 3, 67, 75}, 0.0f, 1.0f);
  const Tensor ref = test::random_tensor(rng, {1, 3, 67, 75}, 0.0f, 1.0f);
  const Tensor flow = net.estimate(cur, ref);
  CHECK(flow.shape() == Shape{1, 2, 67, 75});
  CHECK(flow.all_finite());
}

TEST_CASE("estimate_flow: mismatched extents are a contract violation") {
  nn::Init init(79);
  FlowEstimator net(init);
  const Tensor a({1, 3, 64, 64}, 0.5f);
  const Tensor b({1, 3, 64, 72}, 0.5f);
  CHECK_THROWS_AS(net.estimate(a, b), ContractError);
}

TEST_CASE("estimate_flow: deterministic for fixed weights and inputs") {
  nn::Init init(80);
  FlowEstimator net(init);
  std::mt19937_64 rng(64);
  const Tensor cur = test::random_tensor(rng, {1, 3, 64, 64}, 0.0f, 1.0f);
  const Tensor ref = test::random_tensor(rng, {1, 3, 64, 64}, 0.0f, 1.0f);
  const Tensor f1 = net.estimate(cur, ref);
  const Tensor f2 = net.estimate(cur, ref);
  CHECK(std::memcmp(f1.data(), f2.data(), size_t(f1.numel()) * 4) == 0);
}

TEST_CASE("estimate_flow: differentiable end to end on a 16x16 instance") {
  nn::Init init(81);
  FlowEstimator net(init, 2);
  std::mt19937_64 rng(65);
  Tensor cur = test::random_tensor(rng, {1, 3, 16, 16}, 0.2f, 0.8f);
  const Tensor ref = test::random_tensor(rng, {1, 3, 16, 16}, 0.2f, 0.8f);

  std::mt19937_64 prng(66);
  const Tensor projection = test::random_tensor(prng, {1, 2, 16, 16}, 0.2f, 1.0f);
  Tape t;
  const Value vc = t.leaf(cur);
  const Value flow = net.estimate(t, vc, t.leaf(ref));
  t.backward(ad::sum(t, ad::mul(t, flow, t.leaf(projection))));
  const Tensor analytic = t.grad(vc);

  auto eval = [&]() {
    Tape t2;
    const Value f2 = net.estimate(t2, t2.leaf(cur), t2.leaf(ref));
    const Tensor& o = t2.value(f2);
    double acc = 0.0;
    for (int64_t i = 0; i < o.numel(); ++i) {
      acc += double(o.data()[i]) * projection.data()[i];
    }
    return acc;
  };
  // The composition is piecewise smooth: bilinear warping has one-sided
  // derivatives on a sparse set of sample positions, so the check is
  // quantile-based rather than worst-case.
  const auto r = test::gradcheck(cur, eval, analytic, 5e-3, 0.1);
  CHECK(r.checked > 50);
  CHECK(r.quantile(0.5) <= 1e-2);
  CHECK(r.quantile(0.75) <= 2e-2);
  CHECK(r.quantile(0.95) <= 0.1);
}

TEST_CASE("estimate_flow: gradients reach the level weights") {
  nn::Init init(82);
  FlowEstimator net(init, 2);
  std::mt19937_64 rng(67);
  const Tensor cur = test::random_tensor(rng, {1, 3, 16, 16}, 0.0f, 1.0f);
  const Tensor ref = test::random_tensor(rng, {1, 3, 16, 16}, 0.0f, 1.0f);
  Tape t;
  const Value flow = net.estimate(t, t.leaf(cur), t.leaf(ref));
  t.backward(ad::sum(t, ad::mul(t, flow, flow)));
  int nonzero_params = 0;
  net.visit_params("flow", [&](const std::string&, Parameter& p) {
    for (float g : p.grad.vec()) {
      if (g != 0.0f) {
        ++nonzero_params;
        break;
      }
    }
  });
  CHECK(nonzero_params > 10);
}

TEST_CASE("flow_to_color: deterministic RGB in [0,1] with white at zero flow") {
  Tensor f({1, 2, 8, 8});
  f.at(0, 0, 2, 2) = 3.0f;
  f.at(0, 1, 5, 5) = -2.0f;
  const Tensor rgb = flow_to_color(f);
  CHECK(rgb.shape() == Shape{1, 3, 8, 8});
  for (float v : rgb.vec()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  // zero-flow pixels render white
  CHECK(rgb.at(0, 0, 0, 0) == doctest::Approx(1.0f));
  CHECK(rgb.at(0, 1, 0, 0) == doctest::Approx(1.0f));
  CHECK(rgb.at(0, 2, 0, 0) == doctest::Approx(1.0f));
}
