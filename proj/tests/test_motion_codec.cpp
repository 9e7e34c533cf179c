#include <doctest.h>

#include <cstring>
#include <random>

#include "nvc/motion_codec.hpp"
#include "test_support.hpp"

using namespace nvc;
using namespace nvc::motion;

namespace {

MotionCodec zero_codec() {
  nn::Init init(91);
  MotionCodec codec(init);
  codec.visit_params("m", [](const std::string&, Parameter& p) {
    std::fill(p.value.vec().begin(), p.value.vec().end(), 0.0f);
  });
  return codec;
}

Tensor smooth_flow(uint64_t seed, int h, int w, float scale) {
  std::mt19937_64 rng(seed);
  const Tensor base = test::random_tensor(rng, {1, 2, h / 8, w / 8}, -scale, scale);
  return kernels::resize(base, h, w, kernels::ResizeMode::kBilinear);
}

}  // namespace

TEST_CASE("motion codec: zero flow with zero-initialized transforms") {
  MotionCodec codec = zero_codec();
  const Tensor flow({1, 2, 64, 64});
  auto r = codec.encode(flow);
  for (int32_t s : r.latents.y.symbols) CHECK(s == 0);
  for (int32_t s : r.latents.z.symbols) CHECK(s == 0);
  // With zero weights every sigma head yields sigma_activation(0), so the
  // estimate collapses to the all-zero-symbol baseline.
  const double per_symbol =
      entropy::bits_upper_clamped(0.0, 0.0, entropy::sigma_activation(0.0f));
  const double baseline =
      per_symbol * double(r.latents.y.symbols.size() + r.latents.z.symbols.size());
  CHECK(r.estimated_bits == doctest::Approx(baseline).epsilon(1e-9));
}

TEST_CASE("motion codec: all-zero symbols with zero synthesis give zero flow") {
  MotionCodec codec = zero_codec();
  const Tensor flow({1, 2, 64, 64});
  auto r = codec.encode(flow);
  for (float v : r.flow_hat.vec()) CHECK(v == 0.0f);
  const Tensor dec = codec.decode(r.latents, 64, 64);
  for (float v : dec.vec()) CHECK(v == 0.0f);
}

TEST_CASE("motion codec: symbols are invariant under re-encoding") {
  nn::Init init(92);
  MotionCodec codec(init);
  const Tensor flow = smooth_flow(93, 64, 64, 3.0f);
  auto a = codec.encode(flow);
  auto b = codec.encode(flow);
  CHECK(a.latents.y.symbols == b.latents.y.symbols);
  CHECK(a.latents.z.symbols == b.latents.z.symbols);
  CHECK(a.chunks.hyper == b.chunks.hyper);
  CHECK(a.chunks.latent == b.chunks.latent);
}

TEST_CASE("motion codec: rate estimate equals entropy::estimate_bits") {
  nn::Init init(94);
  MotionCodec codec(init);
  const Tensor flow = smooth_flow(95, 64, 64, 2.0f);
  auto r = codec.encode(flow);

  // Independent recomputation: decode-side parameter path plus the pmf.
  const Tensor dec_flow = codec.decode(r.latents, 64, 64);
  (void)dec_flow;
  double bits = 0.0;
  {
    // z under the per-channel learned model
    const Tensor z_sigma = entropy::sigma_map_from_raw(codec.z_sigma_raw().value);
    const Shape zs = r.latents.z.shape;
    for (int c = 0; c < zs.c; ++c) {
      for (int i = 0; i < zs.h * zs.w; ++i) {
        const int32_t s = r.latents.z.symbols[size_t(c) * zs.h * zs.w + i];
        bits += -std::log2(std::max(
            entropy::pmf_discretized_gaussian(s, 0.0, z_sigma.at(0, c, 0, 0)),
            entropy::kPmfFloor));
      }
    }
  }
  {
    // y under the hyper-decoded per-element sigmas
    nn::EvalCtx ctx;
    Tensor z_hat(r.latents.z.shape);
    const Tensor z_mu = codec.z_mu().value;
    for (int c = 0; c < z_hat.shape().c; ++c) {
      float* p = z_hat.plane(0, c);
      const int64_t area = int64_t(z_hat.shape().h) * z_hat.shape().w;
      for (int64_t i = 0; i < area; ++i) {
        p[i] = float(r.latents.z.symbols[size_t(c) * area + i]) + z_mu.at(0, c, 0, 0);
      }
    }
    const Tensor params = codec.hyper_synthesis(ctx, z_hat);
    const Tensor y_sigma = entropy::sigma_map_from_raw(
        kernels::slice_channels(params, MotionCodec::kLatentChannels,
                                2 * MotionCodec::kLatentChannels));
    for (int64_t i = 0; i < int64_t(r.latents.y.symbols.size()); ++i) {
      bits += -std::log2(
          std::max(entropy::pmf_discretized_gaussian(r.latents.y.symbols[size_t(i)],
                                                     0.0, y_sigma.data()[i]),
                   entropy::kPmfFloor));
    }
  }
  CHECK(r.estimated_bits == doctest::Approx(bits).epsilon(1e-6));
}

TEST_CASE("motion codec: chunk round trip reproduces the encoder reconstruction") {
  nn::Init init(96);
  MotionCodec codec(init);
  for (auto [h, w] : {std::pair{64, 64}, std::pair{100, 72}}) {
    const Tensor flow = smooth_flow(97 + h, h, w, 4.0f);
    auto enc = codec.encode(flow);
    const Tensor dec = codec.decode_chunks(enc.chunks, h, w);
    REQUIRE(dec.shape() == enc.flow_hat.shape());
    CHECK(std::memcmp(dec.data(), enc.flow_hat.data(),
                      size_t(dec.numel()) * 4) == 0);
    // Symbol-level decode agrees too (same hyper conditioning on both sides).
    const Tensor dec2 = codec.decode(enc.latents, h, w);
    CHECK(std::memcmp(dec2.data(), enc.flow_hat.data(),
                      size_t(dec2.numel()) * 4) == 0);
  }
}

TEST_CASE("motion codec: coded payload length tracks the rate estimate per chunk") {
  nn::Init init(98);
  MotionCodec codec(init);
  const Tensor flow = smooth_flow(99, 128, 128, 6.0f);
  auto enc = codec.encode(flow);
  const double actual_bits =
      8.0 * double(enc.chunks.hyper.size() + enc.chunks.latent.size());
  // Two range-coded chunks; each carries its own flush tail.
  CHECK(actual_bits <= enc.estimated_bits * 1.001 + 2 * 64.0);
  CHECK(actual_bits >= enc.estimated_bits * 0.99 - 2 * 64.0);
}

TEST_CASE("motion codec: train forward produces finite rate and gradients") {
  nn::Init init(100);
  MotionCodec codec(init);
  std::mt19937_64 rng(101);
  Tape t;
  const Value flow = t.leaf(smooth_flow(102, 64, 64, 2.0f));
  auto r = codec.train_forward(t, flow, QuantMode::kNoise, rng);
  const Value loss =
      ad::add(t, ad::scale(t, r.rate_bits, 1e-4f),
              ad::sum(t, ad::mul(t, r.flow_hat, r.flow_hat)));
  t.backward(loss);
  int nonzero = 0;
  codec.visit_params("m", [&](const std::string&, Parameter& p) {
    for (float g : p.grad.vec()) {
      if (g != 0.0f) {
        ++nonzero;
        break;
      }
    }
  });
  CHECK(nonzero > 20);
}

TEST_CASE("motion codec: symbol counts match the fixed stride schedule") {
  const auto [z64, y64] = MotionCodec::symbol_counts(64, 64);
  CHECK(z64 == 16 * 1 * 1);
  CHECK(y64 == 32 * 4 * 4);
  const auto [z100, y100] = MotionCodec::symbol_counts(100, 72);
  CHECK(z100 == 16 * 2 * 2);   // padded to 128x128
  CHECK(y100 == 32 * 8 * 8);
}
