#include <doctest.h>

#include <cstring>
#include <random>

#include "nvc/context_mining.hpp"
#include "test_support.hpp"

using namespace nvc;
using namespace nvc::ctxmine;

namespace {

ReferenceState random_state(uint64_t seed, int h, int w) {
  std::mt19937_64 rng(seed);
  ReferenceState s;
  s.recon_frame = test::random_tensor(rng, {1, 3, h, w}, 0.0f, 1.0f);
  s.recon_feature = test::random_tensor(rng, {1, 32, h, w}, -1.0f, 1.0f);
  return s;
}

}  // namespace

TEST_CASE("flow_for_level: identity at level 0") {
  std::mt19937_64 rng(111);
  const Tensor flow = test::random_tensor(rng, {1, 2, 16, 16}, -4.0f, 4.0f);
  const Tensor out = flow_for_level(flow, 0);
  CHECK(std::memcmp(out.data(), flow.data(), size_t(flow.numel()) * 4) == 0);
}

TEST_CASE("flow_for_level: constant (4,2) at level 2 becomes (1, 0.5)") {
  Tensor flow({1, 2, 16, 16});
  for (int64_t i = 0; i < 256; ++i) {
    flow.plane(0, 0)[i] = 4.0f;
    flow.plane(0, 1)[i] = 2.0f;
  }
  const Tensor out = flow_for_level(flow, 2);
  CHECK(out.shape() == Shape{1, 2, 4, 4});
  for (int64_t i = 0; i < 16; ++i) {
    CHECK(out.plane(0, 0)[i] == doctest::Approx(1.0f));
    CHECK(out.plane(0, 1)[i] == doctest::Approx(0.5f));
  }
}

TEST_CASE("flow_for_level: zero flow stays zero at every level") {
  const Tensor flow({1, 2, 16, 16});
  for (int level : {0, 1, 2}) {
    const Tensor out = flow_for_level(flow, level);
    for (float v : out.vec()) CHECK(v == 0.0f);
  }
}

TEST_CASE("flow_for_level: invalid level is a contract violation") {
  const Tensor flow({1, 2, 16, 16});
  CHECK_THROWS_AS(flow_for_level(flow, 3), ContractError);
  CHECK_THROWS_AS(flow_for_level(flow, -1), ContractError);
}

TEST_CASE("extract_reference_feature: shape contract 32/48/64 at 1, 1/2, 1/4") {
  nn::Init init(112);
  ContextMiner miner(init);
  const auto f = miner.extract_features_eval(random_state(113, 64, 64));
  CHECK(f[0].shape() == Shape{1, 32, 64, 64});
  CHECK(f[1].shape() == Shape{1, 48, 32, 32});
  CHECK(f[2].shape() == Shape{1, 64, 16, 16});
}

TEST_CASE("extract_reference_feature: zero state and weights give zero features") {
  nn::Init init(114);
  ContextMiner miner(init);
  miner.visit_params("cm", [](const std::string&, Parameter& p) {
    std::fill(p.value.vec().begin(), p.value.vec().end(), 0.0f);
  });
  ReferenceState s;
  s.recon_frame = Tensor({1, 3, 32, 32});
  s.recon_feature = Tensor({1, 32, 32, 32});
  const auto f = miner.extract_features_eval(s);
  for (const Tensor& level : f) {
    for (float v : level.vec()) CHECK(v == 0.0f);
  }
}

TEST_CASE("extract_reference_feature: unpopulated state is rejected") {
  nn::Init init(115);
  ContextMiner miner(init);
  ReferenceState s;
  CHECK_THROWS_AS(miner.extract_features_eval(s), ContractError);
}

TEST_CASE("extract_reference_feature: deterministic across calls") {
  nn::Init init(116);
  ContextMiner miner(init);
  const ReferenceState s = random_state(117, 64, 64);
  const auto a = miner.extract_features_eval(s);
  const auto b = miner.extract_features_eval(s);
  for (int l = 0; l < 3; ++l) {
    CHECK(std::memcmp(a[l].data(), b[l].data(), size_t(a[l].numel()) * 4) == 0);
  }
}

TEST_CASE("mine_contexts: pyramid ratio holds for even-extent inputs") {
  nn::Init init(118);
  ContextMiner miner(init);
  for (auto [h, w] : {std::pair{64, 64}, std::pair{96, 128}}) {
    const auto f = miner.extract_features_eval(random_state(119, h, w));
    std::mt19937_64 rng(120);
    const Tensor flow = test::random_tensor(rng, {1, 2, h, w}, -2.0f, 2.0f);
    const ContextPyramid cp = miner.mine_eval(f, flow);
    CHECK(cp.c0.shape() == Shape{1, 32, h, w});
    CHECK(cp.c1.shape() == Shape{1, 48, h / 2, w / 2});
    CHECK(cp.c2.shape() == Shape{1, 64, h / 4, w / 4});
  }
}

TEST_CASE("mine_contexts: zero flow warps features onto themselves") {
  // With the fuse0 pass-through initialization and zero flow, c0 equals f0
  // exactly (cosine similarity 1).
  nn::Init init(121);
  ContextMiner miner(init);
  miner.init_fuse0_passthrough();
  const auto f = miner.extract_features_eval(random_state(122, 32, 32));
  const Tensor zero_flow({1, 2, 32, 32});
  const ContextPyramid cp = miner.mine_eval(f, zero_flow);

  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int64_t i = 0; i < cp.c0.numel(); ++i) {
    dot += double(cp.c0.data()[i]) * f[0].data()[i];
    na += double(cp.c0.data()[i]) * cp.c0.data()[i];
    nb += double(f[0].data()[i]) * f[0].data()[i];
  }
  CHECK(dot / std::sqrt(na * nb) > 0.99);
}

TEST_CASE("mine_contexts: extent inconsistency is a contract violation") {
  nn::Init init(123);
  ContextMiner miner(init);
  const auto f = miner.extract_features_eval(random_state(124, 64, 64));
  std::mt19937_64 rng(125);
  const Tensor flow = test::random_tensor(rng, {1, 2, 32, 32}, -1.0f, 1.0f);
  CHECK_THROWS_AS(miner.mine_eval(f, flow), ContractError);
}

TEST_CASE("mine_contexts: differentiable end to end at 16x16") {
  nn::Init init(126);
  ContextMiner miner(init);
  std::mt19937_64 rng(127);
  Tensor frame = test::random_tensor(rng, {1, 3, 16, 16}, 0.2f, 0.8f);
  const Tensor feature = test::random_tensor(rng, {1, 32, 16, 16}, -0.5f, 0.5f);
  // Mid-cell flow keeps warp samples away from integer positions.
  Tensor flow({1, 2, 16, 16});
  std::uniform_real_distribution<float> frac(0.35f, 0.65f);
  for (auto& v : flow.vec()) v = frac(rng);

  std::mt19937_64 prng(128);
  const Tensor projection = test::random_tensor(prng, {1, 32, 16, 16}, 0.2f, 1.0f);

  auto run = [&](Tape& t, Value vframe) {
    nn::GradCtx ctx{&t};
    const auto feats = miner.extract_features(ctx, vframe, t.leaf(feature));
    const auto cp = miner.mine(ctx, feats, t.leaf(flow));
    return cp.c0;
  };
  Tape t;
  const Value vf = t.leaf(frame);
  const Value c0 = run(t, vf);
  t.backward(ad::sum(t, ad::mul(t, c0, t.leaf(projection))));
  const Tensor analytic = t.grad(vf);

  auto eval = [&]() {
    Tape t2;
    const Value c = run(t2, t2.leaf(frame));
    const Tensor& o = t2.value(c);
    double acc = 0.0;
    for (int64_t i = 0; i < o.numel(); ++i) {
      acc += double(o.data()[i]) * projection.data()[i];
    }
    return acc;
  };
  const auto r = test::gradcheck(frame, eval, analytic, 5e-3, 0.1);
  CHECK(r.checked > 20);
  CHECK(r.quantile(0.5) <= 1e-2);
  CHECK(r.quantile(0.75) <= 2e-2);
}
