#ifndef NVC_CONTEXT_MINING_HPP
#define NVC_CONTEXT_MINING_HPP

#include "nvc/nn.hpp"

namespace nvc::ctxmine {

// Conditional features at scales 1, 1/2, 1/4 (channels 32/48/64).
template <class V>
struct ContextPyramidT {
  V c0, c1, c2;
};
using ContextPyramid = ContextPyramidT<Tensor>;
using ContextPyramidV = ContextPyramidT<Value>;

// Reference carried between frames: the previous reconstruction and its
// 32-channel feature, updated together after each frame decode.
struct ReferenceState {
  Tensor recon_frame;    // (1,3,H,W)
  Tensor recon_feature;  // (1,32,H,W)

  bool populated() const { return !recon_frame.empty(); }
};

// 2x2 average pooling applied `level` times with displacements divided by
// 2^level, so flow stays in pixels of its own grid.
Tensor flow_for_level(const Tensor& flow, int level);
Value flow_for_level(Tape& t, Value flow, int level);

class ContextMiner {
 public:
  static constexpr int kFeatureChannels = 32;

  explicit ContextMiner(nn::Init& init);
  void visit_params(const std::string& prefix, const nn::ParamVisitor& fn);
  void set_frozen(bool frozen);

  // Multi-scale reference features (32 full, 48 half, 64 quarter) from the
  // reconstructed frame and the propagated feature.
  template <class Ctx, class V = typename Ctx::V>
  std::array<V, 3> extract_features(Ctx& ctx, V recon_frame, V recon_feature) {
    V embedded = nn::apply_conv(ctx, embed_, recon_frame);
    V f0 = ctx.lrelu(nn::apply_conv(ctx, f0_, ctx.concat2(embedded, recon_feature)));
    V f1 = ctx.lrelu(nn::apply_conv(ctx, f1_, f0));
    V f2 = ctx.lrelu(nn::apply_conv(ctx, f2_, f1));
    return {f0, f1, f2};
  }

  // Warp each feature scale with the matching-scale flow, then fuse
  // bottom-up. Fusion convs are linear (no activation).
  template <class Ctx, class V = typename Ctx::V>
  ContextPyramidT<V> mine(Ctx& ctx, const std::array<V, 3>& features, V flow_hat) {
    V w0 = ctx.warp(features[0], flow_hat);
    V w1 = ctx.warp(features[1], flow_for_level_ctx(ctx, flow_hat, 1));
    V w2 = ctx.warp(features[2], flow_for_level_ctx(ctx, flow_hat, 2));
    ContextPyramidT<V> out;
    out.c2 = nn::apply_conv(ctx, fuse2_, w2);
    V up2 = nn::apply_tconv(ctx, up2_, out.c2);
    out.c1 = nn::apply_conv(ctx, fuse1_, ctx.concat2(w1, up2));
    V up1 = nn::apply_tconv(ctx, up1_, out.c1);
    out.c0 = nn::apply_conv(ctx, fuse0_, ctx.concat2(w0, up1));
    return out;
  }

  std::array<Tensor, 3> extract_features_eval(const ReferenceState& state);
  ContextPyramid mine_eval(const std::array<Tensor, 3>& features,
                           const Tensor& flow_hat);

  // Test hook: make fuse0 pass the warped branch through unchanged.
  void init_fuse0_passthrough();

 private:
  template <class Ctx, class V = typename Ctx::V>
  V flow_for_level_ctx(Ctx& ctx, V flow, int level) {
    V f = flow;
    for (int l = 0; l < level; ++l) {
      f = ctx.scale(ctx.avg_pool(f), 0.5f);
    }
    return f;
  }

  nn::ConvLayer embed_, f0_, f1_, f2_;
  nn::ConvLayer fuse2_, fuse1_, fuse0_;
  nn::TConvLayer up2_, up1_;
};

}  // namespace nvc::ctxmine

#endif
