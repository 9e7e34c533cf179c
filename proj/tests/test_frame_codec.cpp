#include <doctest.h>

#include <cstring>
#include <random>

#include "nvc/frame_codec.hpp"
#include "test_support.hpp"

using namespace nvc;
using namespace nvc::framecodec;

namespace {

Tensor smooth_frame(uint64_t seed, int h, int w) {
  std::mt19937_64 rng(seed);
  const Tensor base = test::random_tensor(rng, {1, 3, h / 8, w / 8}, 0.1f, 0.9f);
  return kernels::resize(base, h, w, kernels::ResizeMode::kBicubic);
}

ctxmine::ContextPyramid random_contexts(uint64_t seed, int h, int w) {
  std::mt19937_64 rng(seed);
  ctxmine::ContextPyramid cp;
  cp.c0 = test::random_tensor(rng, {1, 32, h, w}, -0.5f, 0.5f);
  cp.c1 = test::random_tensor(rng, {1, 48, h / 2, w / 2}, -0.5f, 0.5f);
  cp.c2 = test::random_tensor(rng, {1, 64, h / 4, w / 4}, -0.5f, 0.5f);
  return cp;
}

}  // namespace

TEST_CASE("group schedule: default (8,8,16,32) offsets and total") {
  GroupSchedule s;
  CHECK(s.sizes == std::vector<int>{8, 8, 16, 32});
  CHECK(s.offsets() == std::vector<int>{0, 8, 16, 32});
  CHECK(s.total() == 64);
  s.validate(64);
}

TEST_CASE("group schedule: invalid configurations are rejected") {
  CHECK_THROWS_AS(GroupSchedule{{8, 4, 16, 36}}.validate(64), ContractError);  // decreasing
  CHECK_THROWS_AS(GroupSchedule{{8, 8, 16}}.validate(64), ContractError);     // wrong sum
  CHECK_THROWS_AS(GroupSchedule{{0, 16, 48}}.validate(64), ContractError);    // zero size
  GroupSchedule{{16, 16, 32}}.validate(64);
  GroupSchedule{{32, 32}}.validate(64);
}

TEST_CASE("frame codec: shape contract 64x64 -> y 64x4x4, z 32x1x1") {
  nn::Init init(131);
  FrameCodec codec(init);
  auto r = codec.encode(smooth_frame(132, 64, 64), nullptr);
  CHECK(r.latents.y.shape == Shape{1, 64, 4, 4});
  CHECK(r.latents.z.shape == Shape{1, 32, 1, 1});
  CHECK(r.chunks.groups.size() == 4);
  CHECK(r.recon.shape() == Shape{1, 3, 64, 64});
  CHECK(r.recon_feature.shape() == Shape{1, 32, 64, 64});
}

TEST_CASE("frame codec: symbols deterministic across repeated encodes") {
  nn::Init init(133);
  FrameCodec codec(init);
  const Tensor frame = smooth_frame(134, 64, 64);
  const auto cp = random_contexts(135, 64, 64);
  auto a = codec.encode(frame, &cp);
  auto b = codec.encode(frame, &cp);
  CHECK(a.latents.y.symbols == b.latents.y.symbols);
  CHECK(a.latents.z.symbols == b.latents.z.symbols);
}

TEST_CASE("frame codec: reconstruction values stay in [0,1]") {
  nn::Init init(136);
  FrameCodec codec(init);
  auto r = codec.encode(smooth_frame(137, 64, 64), nullptr);
  for (float v : r.recon.vec()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("frame codec: chunk round trip is bit-exact") {
  nn::Init init(138);
  FrameCodec codec(init);
  SUBCASE("I-frame path (zero contexts)") {
    const Tensor frame = smooth_frame(139, 64, 64);
    auto enc = codec.encode(frame, nullptr);
    auto dec = codec.decode_chunks(enc.chunks, nullptr, 64, 64);
    CHECK(std::memcmp(dec.recon.data(), enc.recon.data(),
                      size_t(enc.recon.numel()) * 4) == 0);
    CHECK(std::memcmp(dec.recon_feature.data(), enc.recon_feature.data(),
                      size_t(enc.recon_feature.numel()) * 4) == 0);
  }
  SUBCASE("P-frame path with contexts and non-multiple extents") {
    const Tensor frame = smooth_frame(140, 80, 100);
    const auto cp = random_contexts(141, 128, 128);  // padded extents
    auto enc = codec.encode(frame, &cp);
    auto dec = codec.decode_chunks(enc.chunks, &cp, 80, 100);
    REQUIRE(dec.recon.shape() == Shape{1, 3, 80, 100});
    CHECK(std::memcmp(dec.recon.data(), enc.recon.data(),
                      size_t(enc.recon.numel()) * 4) == 0);
  }
}

TEST_CASE("frame codec: zero-context invocation equals explicit zero contexts") {
  nn::Init init(142);
  FrameCodec codec(init);
  const Tensor frame = smooth_frame(143, 64, 64);
  ctxmine::ContextPyramid zeros;
  zeros.c0 = Tensor({1, 32, 64, 64});
  zeros.c1 = Tensor({1, 48, 32, 32});
  zeros.c2 = Tensor({1, 64, 16, 16});
  auto a = codec.encode(frame, nullptr);
  auto b = codec.encode(frame, &zeros);
  CHECK(a.latents.y.symbols == b.latents.y.symbols);
  CHECK(std::memcmp(a.recon.data(), b.recon.data(), size_t(a.recon.numel()) * 4) == 0);
}

TEST_CASE("frame codec: group 0 params are independent of the latents") {
  nn::Init init(144);
  FrameCodec codec(init);
  std::mt19937_64 rng(145);
  const Tensor hyper_feat = test::random_tensor(rng, {1, 64, 4, 4}, -1.0f, 1.0f);

  auto gc1 = codec.make_group_context(4, 4);
  const auto [mu1, sg1] = codec.group_entropy_params(hyper_feat, gc1, 0);
  auto gc2 = codec.make_group_context(4, 4);
  gc2.y_hat = test::random_tensor(rng, {1, 64, 4, 4}, -5.0f, 5.0f);
  const auto [mu2, sg2] = codec.group_entropy_params(hyper_feat, gc2, 0);
  CHECK(std::memcmp(mu1.data(), mu2.data(), size_t(mu1.numel()) * 4) == 0);
  CHECK(std::memcmp(sg1.data(), sg2.data(), size_t(sg1.numel()) * 4) == 0);
}

TEST_CASE("frame codec: later group params depend on earlier groups") {
  nn::Init init(146);
  FrameCodec codec(init);
  std::mt19937_64 rng(147);
  const Tensor hyper_feat = test::random_tensor(rng, {1, 64, 4, 4}, -1.0f, 1.0f);

  auto advance = [&](FrameCodec::GroupContext& gc, int g, float fill) {
    const auto [mu, sg] = codec.group_entropy_params(hyper_feat, gc, g);
    const Shape gs{1, codec.schedule().sizes[size_t(g)], 4, 4};
    codec.commit_group(gc, g, Tensor(gs, fill));
    return std::pair{mu, sg};
  };

  auto gc_a = codec.make_group_context(4, 4);
  advance(gc_a, 0, 0.0f);
  advance(gc_a, 1, 0.0f);
  const auto [mu_a, sg_a] = codec.group_entropy_params(hyper_feat, gc_a, 2);

  auto gc_b = codec.make_group_context(4, 4);
  advance(gc_b, 0, 2.0f);  // different group-0 symbols
  advance(gc_b, 1, 0.0f);
  const auto [mu_b, sg_b] = codec.group_entropy_params(hyper_feat, gc_b, 2);

  CHECK(std::memcmp(mu_a.data(), mu_b.data(), size_t(mu_a.numel()) * 4) != 0);
}

TEST_CASE("frame codec: out-of-order group requests are rejected") {
  nn::Init init(148);
  FrameCodec codec(init);
  std::mt19937_64 rng(149);
  const Tensor hyper_feat = test::random_tensor(rng, {1, 64, 4, 4}, -1.0f, 1.0f);
  auto gc = codec.make_group_context(4, 4);
  CHECK_THROWS_AS(codec.group_entropy_params(hyper_feat, gc, 2), ContractError);
  CHECK_THROWS_AS(codec.group_entropy_params(hyper_feat, gc, 1), ContractError);
  (void)codec.group_entropy_params(hyper_feat, gc, 0);  // in order: fine
}

TEST_CASE("frame codec: context extent mismatch is a contract violation") {
  nn::Init init(150);
  FrameCodec codec(init);
  const Tensor frame = smooth_frame(151, 64, 64);
  const auto cp = random_contexts(152, 32, 32);
  CHECK_THROWS_AS(codec.encode(frame, &cp), ContractError);
}

TEST_CASE("frame codec: differentiable encode-quantize-decode with 2 groups") {
  nn::Init init(153);
  FrameCodec codec(init, GroupSchedule{{32, 32}});
  std::mt19937_64 rng(154);
  Tensor frame = smooth_frame(155, 16, 16);
  // 16x16 inputs are padded to the 64 multiple inside the codec.
  std::mt19937_64 nrng(156);

  Tape t;
  const Value vf = t.leaf(frame);
  auto res = codec.train_forward(t, vf, nullptr, QuantMode::kNoise, nrng);
  const Value loss = ad::add(t, ad::scale(t, res.rate_bits, 1e-3f),
                             ad::sum(t, ad::mul(t, res.recon, res.recon)));
  t.backward(loss);

  int with_grad = 0, total = 0;
  codec.visit_params("f", [&](const std::string&, Parameter& p) {
    ++total;
    for (float g : p.grad.vec()) {
      if (g != 0.0f) {
        ++with_grad;
        break;
      }
    }
  });
  // Every parameter block participates except the pixel head bias clamp
  // corner cases; require the overwhelming majority.
  CHECK(with_grad >= total - 2);

  // FD check on the input image through rate + distortion.
  const Tensor analytic = t.grad(vf);
  auto eval = [&]() {
    std::mt19937_64 nrng2(156);  // same noise draw
    Tape t2;
    auto r2 = codec.train_forward(t2, t2.leaf(frame), nullptr, QuantMode::kNoise, nrng2);
    const Tensor& recon = t2.value(r2.recon);
    double acc = double(t2.value(r2.rate_bits).data()[0]) * 1e-3;
    for (int64_t i = 0; i < recon.numel(); ++i) {
      acc += double(recon.data()[i]) * recon.data()[i];
    }
    return acc;
  };
  const auto r = test::gradcheck(frame, eval, analytic, 5e-3, 0.1);
  CHECK(r.checked > 20);
  CHECK(r.quantile(0.5) <= 2e-2);
}
