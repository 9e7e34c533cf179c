#include <doctest.h>

#include <cstring>

#include "nvc/ops.hpp"
#include "nvc/weights.hpp"
#include "test_support.hpp"

using namespace nvc;
using test::conv2d_reference;
using test::gradcheck;
using test::random_tensor;

TEST_CASE("conv2d: identity 1x1 kernel") {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor(rng, {1, 1, 5, 7});
  Tensor w({1, 1, 1, 1});
  w.data()[0] = 1.0f;
  const Tensor y = kernels::conv2d(x, w, {0.0f}, 1, 0);
  REQUIRE(y.shape() == x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d: all-ones 3x3 kernel on constant image") {
  const float c = 0.37f;
  const Tensor x({1, 1, 6, 6}, c);
  const Tensor w({1, 1, 3, 3}, 1.0f);
  const Tensor y = kernels::conv2d(x, w, {}, 1, 1);
  // Interior pixel sees 9 taps of value c.
  CHECK(y.at(0, 0, 3, 3) == doctest::Approx(9.0f * c).epsilon(1e-6));
  // Corner sees only 4 in-bounds taps.
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(4.0f * c).epsilon(1e-6));
}

TEST_CASE("conv2d: matches the nested-loop oracle on a fixed case") {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor(rng, {2, 3, 5, 5});
  const Tensor w = random_tensor(rng, {4, 3, 3, 3});
  const Tensor y = kernels::conv2d(x, w, {}, 1, 0);
  const Tensor ref = conv2d_reference(x, w, {}, 1, 0);
  REQUIRE(y.shape() == ref.shape());
  for (int64_t i = 0; i < y.numel(); ++i) {
    CHECK(std::fabs(y.data()[i] - ref.data()[i]) < 1e-5);
  }
}

TEST_CASE("conv2d: oracle equivalence over random small shapes") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> ext(1, 8), chan(1, 4), kk(1, 3);
  std::uniform_int_distribution<int> st(1, 2), pd(0, 2), batch(1, 2);
  int cases = 0;
  while (cases < 220) {
    const int k = kk(rng);
    const int h = ext(rng), w = ext(rng);
    const int stride = st(rng), pad = pd(rng);
    if (h + 2 * pad < k || w + 2 * pad < k) continue;
    const Tensor x = random_tensor(rng, {batch(rng), chan(rng), h, w});
    const Tensor wt = random_tensor(rng, {chan(rng), x.shape().c, k, k});
    std::vector<float> bias(size_t(wt.shape().n));
    for (auto& b : bias) b = random_tensor(rng, {1, 1, 1, 1}).data()[0];
    const Tensor got = kernels::conv2d(x, wt, bias, stride, pad);
    const Tensor ref = conv2d_reference(x, wt, bias, stride, pad);
    REQUIRE(got.shape() == ref.shape());
    for (int64_t i = 0; i < got.numel(); ++i) {
      REQUIRE(std::fabs(got.data()[i] - ref.data()[i]) < 1e-5);
    }
    ++cases;
  }
  CHECK(cases >= 200);
}

TEST_CASE("conv2d: shape mismatch raises a contract error with both shapes") {
  const Tensor x({1, 3, 4, 4});
  const Tensor w({2, 4, 3, 3});
  try {
    (void)kernels::conv2d(x, w, {}, 1, 1);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(1,3,4,4)") != std::string::npos);
    CHECK(msg.find("(2,4,3,3)") != std::string::npos);
  }
}

TEST_CASE("tconv2d inverts conv2d extents") {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor(rng, {1, 3, 8, 10});
  const Tensor w = random_tensor(rng, {3, 5, 4, 4});
  const Tensor y = kernels::tconv2d(x, w, {}, 2, 1);
  CHECK(y.shape() == Shape{1, 5, 16, 20});
}

TEST_CASE("resize: constants are preserved exactly") {
  const Tensor x({1, 3, 9, 13}, 0.7f);
  for (auto mode : {kernels::ResizeMode::kBilinear, kernels::ResizeMode::kBicubic}) {
    for (auto [oh, ow] :
         {std::pair{4, 5}, std::pair{18, 26}, std::pair{36, 52}, std::pair{9, 13}}) {
      const Tensor y = kernels::resize(x, oh, ow, mode);
      for (float v : y.vec()) CHECK(v == doctest::Approx(0.7f).epsilon(1e-6));
    }
  }
}

TEST_CASE("resize: same-size resize is the identity") {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor(rng, {1, 2, 7, 9}, 0.0f, 1.0f);
  for (auto mode : {kernels::ResizeMode::kBilinear, kernels::ResizeMode::kBicubic}) {
    const Tensor y = kernels::resize(x, 7, 9, mode);
    for (int64_t i = 0; i < x.numel(); ++i) {
      CHECK(std::fabs(y.data()[i] - x.data()[i]) <= 1e-6);
    }
  }
}

TEST_CASE("resize: bilinear 2x upsample of a horizontal ramp stays a ramp") {
  // ramp(x) = x / (W - 1); compare against the closed-form interpolant.
  const int w = 16, h = 4;
  Tensor x({1, 1, h, w});
  for (int y = 0; y < h; ++y) {
    for (int i = 0; i < w; ++i) x.at(0, 0, y, i) = float(i) / (w - 1);
  }
  const Tensor up = kernels::resize(x, h, 2 * w, kernels::ResizeMode::kBilinear);
  CHECK(up.at(0, 0, 1, 0) == doctest::Approx(0.0f).epsilon(1e-6));
  CHECK(up.at(0, 0, 1, 2 * w - 1) == doctest::Approx(1.0f).epsilon(1e-6));
  for (int i = 0; i < 2 * w; ++i) {
    const double src = (i + 0.5) * 0.5 - 0.5;
    const double expected = std::clamp(src, 0.0, double(w - 1)) / (w - 1);
    CHECK(std::fabs(up.at(0, 0, 2, i) - expected) <= 1e-5);
  }
}

TEST_CASE("resize: bicubic down-up round trip on a smooth sinusoid") {
  const int n = 64;
  Tensor x({1, 1, n, n});
  for (int y = 0; y < n; ++y) {
    for (int i = 0; i < n; ++i) {
      x.at(0, 0, y, i) = 0.5f + 0.4f * std::sin(2.0f * float(M_PI) * y / n) *
                                    std::cos(2.0f * float(M_PI) * i / n);
    }
  }
  const Tensor down = kernels::resize(x, n / 4, n / 4, kernels::ResizeMode::kBicubic);
  const Tensor up = kernels::resize(down, n, n, kernels::ResizeMode::kBicubic);
  float max_err = 0.0f;
  for (int64_t i = 0; i < x.numel(); ++i) {
    max_err = std::max(max_err, std::fabs(up.data()[i] - x.data()[i]));
  }
  CHECK(max_err <= 0.05f);
}

TEST_CASE("warp: zero flow is a bit-exact identity") {
  std::mt19937_64 rng(6);
  const Tensor img = random_tensor(rng, {1, 3, 6, 8});
  const Tensor flow({1, 2, 6, 8});
  const Tensor out = kernels::warp_bilinear(img, flow);
  CHECK(std::memcmp(out.data(), img.data(), size_t(img.numel()) * 4) == 0);
}

TEST_CASE("warp: integer displacement shifts exactly on the interior") {
  std::mt19937_64 rng(7);
  const Tensor img = random_tensor(rng, {1, 1, 5, 8});
  Tensor flow({1, 2, 5, 8});
  for (int64_t i = 0; i < 5 * 8; ++i) flow.plane(0, 0)[i] = 1.0f;  // u = 1
  const Tensor out = kernels::warp_bilinear(img, flow);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x + 1 < 8; ++x) {
      CHECK(out.at(0, 0, y, x) == img.at(0, 0, y, x + 1));
    }
  }
}

TEST_CASE("warp: half-pixel flow on a linear ramp") {
  const int w = 12, h = 5;
  Tensor img({1, 1, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.at(0, 0, y, x) = 0.1f * x;
  }
  Tensor flow({1, 2, h, w});
  for (int64_t i = 0; i < int64_t(h) * w; ++i) flow.plane(0, 0)[i] = 0.5f;
  const Tensor out = kernels::warp_bilinear(img, flow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      CHECK(std::fabs(out.at(0, 0, y, x) - 0.1f * (x + 0.5f)) <= 1e-5);
    }
  }
}

TEST_CASE("warp: constant image is a fixed point even with wild flow") {
  std::mt19937_64 rng(8);
  const Tensor img({1, 2, 6, 6}, 0.42f);
  const Tensor flow = random_tensor(rng, {1, 2, 6, 6}, -20.0f, 20.0f);
  const Tensor out = kernels::warp_bilinear(img, flow);
  for (float v : out.vec()) CHECK(v == doctest::Approx(0.42f).epsilon(1e-6));
}

TEST_CASE("ops are deterministic across repeated execution") {
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor(rng, {1, 4, 16, 16});
  const Tensor w = random_tensor(rng, {8, 4, 3, 3});
  const Tensor y1 = kernels::conv2d(x, w, {}, 2, 1);
  const Tensor y2 = kernels::conv2d(x, w, {}, 2, 1);
  CHECK(std::memcmp(y1.data(), y2.data(), size_t(y1.numel()) * 4) == 0);
  const Tensor r1 = kernels::resize(x, 23, 9, kernels::ResizeMode::kBicubic);
  const Tensor r2 = kernels::resize(x, 23, 9, kernels::ResizeMode::kBicubic);
  CHECK(std::memcmp(r1.data(), r2.data(), size_t(r1.numel()) * 4) == 0);
}

TEST_CASE("backward: d sum(conv1x1(x, w)) / d w equals sum(x)") {
  std::mt19937_64 rng(10);
  const Tensor xt = random_tensor(rng, {1, 1, 4, 4});
  Parameter w(Tensor({1, 1, 1, 1}, 0.5f));
  Tape t;
  const Value x = t.leaf(xt);
  const Value y = ad::conv2d(t, x, t.param(w), Value{}, 1, 0);
  t.backward(ad::sum(t, y));
  double sum_x = 0.0;
  for (float v : xt.vec()) sum_x += v;
  CHECK(w.grad.data()[0] == doctest::Approx(sum_x).epsilon(1e-5));
}

TEST_CASE("backward: frozen parameter receives zero gradient") {
  std::mt19937_64 rng(11);
  Parameter w(random_tensor(rng, {2, 1, 3, 3}));
  w.frozen = true;
  Tape t;
  const Value x = t.leaf(random_tensor(rng, {1, 1, 6, 6}));
  const Value y = ad::conv2d(t, x, t.param(w), Value{}, 1, 1);
  t.backward(ad::sum(t, y));
  for (float g : w.grad.vec()) CHECK(g == 0.0f);
}

TEST_CASE("backward: non-scalar loss is rejected") {
  Tape t;
  const Value x = t.leaf(Tensor({1, 1, 2, 2}, 1.0f));
  CHECK_THROWS_AS(t.backward(x), ContractError);
}

namespace {

// Gradient-checks d loss / d subject where loss = sum(projection * wire(x)).
// The finite-difference side reads the wire output and projects in double;
// projecting through a float32 scalar node would quantize away the
// perturbation (float ULP at the loss magnitude exceeds eps * gradient).
void check_op_gradient(Tensor& subject,
                       const std::function<Value(Tape&, Value)>& wire,
                       double tol = 1e-2, double eps = 1e-2) {
  std::mt19937_64 rng(99);
  Tensor projection;

  Tape t;
  const Value in = t.leaf(subject);
  const Value out = wire(t, in);
  projection = test::random_tensor(rng, t.value(out).shape(), 0.2f, 1.0f);
  const Value loss = ad::sum(t, ad::mul(t, out, t.leaf(projection)));
  t.backward(loss);
  const Tensor analytic = t.grad(in);

  auto eval = [&]() {
    Tape t2;
    const Value out2 = wire(t2, t2.leaf(subject));
    const Tensor& o = t2.value(out2);
    double acc = 0.0;
    for (int64_t i = 0; i < o.numel(); ++i) {
      acc += double(o.data()[i]) * projection.data()[i];
    }
    return acc;
  };
  const auto r = test::gradcheck(subject, eval, analytic, eps);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_err <= tol);
}

}  // namespace

TEST_CASE("gradient checks: every differentiable op vs central differences") {
  std::mt19937_64 rng(12);

  SUBCASE("conv2d wrt input") {
    Tensor x = random_tensor(rng, {1, 2, 6, 6});
    Tensor w = random_tensor(rng, {3, 2, 3, 3});
    check_op_gradient(x, [&](Tape& t, Value in) {
      return ad::conv2d(t, in, t.leaf(w), Value{}, 2, 1);
    });
  }
  SUBCASE("conv2d wrt weights and bias") {
    Tensor x = random_tensor(rng, {1, 2, 6, 6});
    Tensor w = random_tensor(rng, {3, 2, 3, 3});
    Tensor b = random_tensor(rng, {1, 3, 1, 1});
    check_op_gradient(w, [&](Tape& t, Value win) {
      return ad::conv2d(t, t.leaf(x), win, t.leaf(b), 1, 1);
    });
    check_op_gradient(b, [&](Tape& t, Value bin) {
      return ad::conv2d(t, t.leaf(x), t.leaf(w), bin, 1, 1);
    });
  }
  SUBCASE("tconv2d wrt input and weights") {
    Tensor x = random_tensor(rng, {1, 3, 4, 4});
    Tensor w = random_tensor(rng, {3, 2, 4, 4});
    check_op_gradient(x, [&](Tape& t, Value in) {
      return ad::tconv2d(t, in, t.leaf(w), Value{}, 2, 1);
    });
    check_op_gradient(w, [&](Tape& t, Value win) {
      return ad::tconv2d(t, t.leaf(x), win, Value{}, 2, 1);
    });
  }
  SUBCASE("avg_pool2") {
    Tensor x = random_tensor(rng, {1, 2, 6, 6});
    check_op_gradient(x, [](Tape& t, Value in) { return ad::avg_pool2(t, in); });
  }
  SUBCASE("leaky_relu") {
    Tensor x = random_tensor(rng, {1, 2, 5, 5});
    for (auto& v : x.vec()) {
      if (std::fabs(v) < 0.2f) v = v < 0 ? v - 0.2f : v + 0.2f;
    }
    check_op_gradient(x, [](Tape& t, Value in) { return ad::leaky_relu(t, in); });
  }
  SUBCASE("warp_bilinear wrt image and flow") {
    Tensor img = random_tensor(rng, {1, 2, 8, 8}, 0.0f, 1.0f);
    Tensor smooth = kernels::resize(random_tensor(rng, {1, 2, 3, 3}, 0.0f, 1.0f),
                                    8, 8, kernels::ResizeMode::kBilinear);
    // Sample positions must stay inside one bilinear cell under the FD
    // step: integer part in {-1,0,1}, fractional part in [0.35, 0.65].
    Tensor flow({1, 2, 8, 8});
    std::uniform_int_distribution<int> whole(-1, 1);
    std::uniform_real_distribution<float> frac(0.35f, 0.65f);
    for (auto& v : flow.vec()) v = float(whole(rng)) + frac(rng);
    check_op_gradient(img, [&](Tape& t, Value in) {
      return ad::warp_bilinear(t, in, t.leaf(flow));
    });
    check_op_gradient(
        flow,
        [&](Tape& t, Value in) {
          return ad::warp_bilinear(t, t.leaf(smooth), in);
        },
        2e-2, 1e-3);
  }
  SUBCASE("resize bilinear and bicubic") {
    Tensor x = random_tensor(rng, {1, 2, 6, 6});
    check_op_gradient(x, [](Tape& t, Value in) {
      return ad::resize(t, in, 9, 4, kernels::ResizeMode::kBilinear);
    });
    check_op_gradient(x, [](Tape& t, Value in) {
      return ad::resize(t, in, 11, 13, kernels::ResizeMode::kBicubic);
    });
  }
  SUBCASE("pad_edge and crop") {
    Tensor x = random_tensor(rng, {1, 2, 5, 5});
    check_op_gradient(x, [](Tape& t, Value in) {
      return ad::pad_edge(t, in, 1, 2, 0, 3);
    });
    check_op_gradient(x, [](Tape& t, Value in) {
      return ad::crop(t, in, 1, 1, 3, 3);
    });
  }
  SUBCASE("elementwise add mul div") {
    Tensor a = random_tensor(rng, {1, 2, 4, 4}, 0.5f, 1.5f);
    Tensor b = random_tensor(rng, {1, 2, 4, 4}, 0.5f, 1.5f);
    check_op_gradient(a, [&](Tape& t, Value in) {
      return ad::mul(t, ad::add(t, in, t.leaf(b)), t.leaf(b));
    });
    check_op_gradient(a, [&](Tape& t, Value in) {
      return ad::div(t, in, t.leaf(b));
    });
    check_op_gradient(b, [&](Tape& t, Value in) {
      return ad::div(t, t.leaf(a), in);
    });
  }
  SUBCASE("concat and slice") {
    Tensor a = random_tensor(rng, {1, 2, 4, 4});
    Tensor b = random_tensor(rng, {1, 3, 4, 4});
    check_op_gradient(a, [&](Tape& t, Value in) {
      return ad::slice_channels(t, ad::concat_channels(t, {in, t.leaf(b)}), 1, 4);
    });
  }
  SUBCASE("scalar reductions and unary maps") {
    Tensor x = random_tensor(rng, {1, 2, 4, 4}, 0.4f, 1.6f);
    check_op_gradient(x, [](Tape& t, Value in) { return ad::mean_hw(t, in); });
    check_op_gradient(x, [](Tape& t, Value in) { return ad::pow_const(t, in, 0.31f); });
    check_op_gradient(x, [](Tape& t, Value in) { return ad::log_(t, in); });
    check_op_gradient(x, [](Tape& t, Value in) { return ad::exp_(t, in); });
    check_op_gradient(x, [](Tape& t, Value in) { return ad::softplus(t, in); });
    check_op_gradient(x, [](Tape& t, Value in) { return ad::clamp_min(t, in, 0.6f); });
  }
  SUBCASE("broadcast_chw") {
    Tensor x = random_tensor(rng, {1, 3, 1, 1});
    check_op_gradient(x, [](Tape& t, Value in) {
      return ad::broadcast_chw(t, in, 2, 4, 4);
    });
  }
  SUBCASE("sep_blur_valid") {
    Tensor x = random_tensor(rng, {1, 2, 9, 9});
    check_op_gradient(x, [](Tape& t, Value in) {
      return ad::sep_blur_valid(t, in, {0.25f, 0.5f, 0.25f});
    });
  }
  SUBCASE("finite differences on a random composite graph") {
    // Smooth activations only; FD near a relu kink is meaningless.
    Tensor x = random_tensor(rng, {1, 2, 6, 6}, 0.3f, 0.9f);
    Tensor w = random_tensor(rng, {2, 2, 3, 3});
    check_op_gradient(x, [&](Tape& t, Value in) {
      Value h = ad::softplus(t, ad::conv2d(t, in, t.leaf(w), Value{}, 1, 1));
      h = ad::avg_pool2(t, h);
      return ad::mul(t, h, h);
    });
  }
}

TEST_CASE("weights file round trip with FNV-1a integrity") {
  std::mt19937_64 rng(13);
  Parameter a(random_tensor(rng, {2, 3, 3, 3}));
  Parameter b(random_tensor(rng, {1, 4, 1, 1}));
  const weights::NamedParams params{{"net.a", &a}, {"net.b", &b}};
  const auto bytes = weights::serialize(params);

  Parameter a2(Tensor({2, 3, 3, 3}));
  Parameter b2(Tensor({1, 4, 1, 1}));
  const weights::NamedParams loaded{{"net.a", &a2}, {"net.b", &b2}};
  weights::load_bytes(std::span(bytes.data(), bytes.size()), loaded);
  CHECK(std::memcmp(a2.value.data(), a.value.data(), size_t(a.value.numel()) * 4) == 0);
  CHECK(std::memcmp(b2.value.data(), b.value.data(), size_t(b.value.numel()) * 4) == 0);

  SUBCASE("flipping a payload byte breaks the hash") {
    auto corrupt = bytes;
    corrupt[corrupt.size() / 2] ^= 0x40;
    CHECK_THROWS_AS(
        weights::load_bytes(std::span(corrupt.data(), corrupt.size()), loaded),
        FormatError);
  }
  SUBCASE("bad magic is rejected") {
    auto corrupt = bytes;
    corrupt[0] = 'X';
    CHECK_THROWS_AS(
        weights::load_bytes(std::span(corrupt.data(), corrupt.size()), loaded),
        FormatError);
  }
  SUBCASE("missing parameter is reported by name") {
    Parameter c(Tensor({1, 1, 1, 1}));
    const weights::NamedParams extra{{"net.missing", &c}};
    try {
      weights::load_bytes(std::span(bytes.data(), bytes.size()), extra);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("net.missing") != std::string::npos);
    }
  }
}

TEST_CASE("fnv1a matches the published 64-bit test vector") {
  // FNV-1a("a") = 0xaf63dc4c8601ec8c
  const uint8_t a[] = {'a'};
  CHECK(weights::fnv1a(std::span(a, 1)) == 0xaf63dc4c8601ec8cull);
}
