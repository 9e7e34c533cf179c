#ifndef NVC_FRAME_CODEC_HPP
#define NVC_FRAME_CODEC_HPP

#include <array>
#include <random>

#include "nvc/context_mining.hpp"
#include "nvc/entropy.hpp"
#include "nvc/motion_codec.hpp"

namespace nvc::framecodec {

// Unevenly grouped channel-wise context model: group sizes must be
// strictly positive, nondecreasing, and sum to the latent channel count.
struct GroupSchedule {
  std::vector<int> sizes{8, 8, 16, 32};

  int total() const;
  std::vector<int> offsets() const;
  void validate(int latent_channels) const;
};

struct FrameLatents {
  entropy::QuantizedLatents y;  // M = 64 channels at 1/16
  entropy::QuantizedLatents z;  // 32 channels at 1/64
};

struct FrameChunks {
  std::vector<uint8_t> hyper;
  std::vector<std::vector<uint8_t>> groups;  // one chunk per channel group
};

// Conditional frame codec: 4 stride-2 encoder stages fed the matching
// context scale (c0, c1, c2, none), a hyperprior, and per-group entropy
// heads conditioned on the hyper features plus previously decoded groups.
// The I-frame model is the same topology with an all-zero context pyramid
// and its own weights.
class FrameCodec {
 public:
  static constexpr int kLatentChannels = 64;
  static constexpr int kHyperChannels = 32;
  static constexpr int kPadMultiple = 64;
  // Previously decoded group symbols are zero-padded to this channel width
  // before entering a group head (the widest prior: 8 + 8 + 16).
  static constexpr int kPriorWidth = 32;

  explicit FrameCodec(nn::Init& init, GroupSchedule schedule = {});
  void visit_params(const std::string& prefix, const nn::ParamVisitor& fn);
  void set_frozen(bool frozen);
  const GroupSchedule& schedule() const { return schedule_; }

  struct EncodeResult {
    FrameLatents latents;
    FrameChunks chunks;
    Tensor recon;            // clamped to [0,1], cropped to input extents
    Tensor recon_feature;    // (1,32,H,W) for the reference state
    double estimated_bits;
  };
  // null context = all-zero context pyramid (the I-frame path).
  EncodeResult encode(const Tensor& frame, const ctxmine::ContextPyramid* ctx);

  struct DecodeResult {
    Tensor recon;
    Tensor recon_feature;
  };
  DecodeResult decode_chunks(const FrameChunks& chunks,
                             const ctxmine::ContextPyramid* ctx, int target_h,
                             int target_w);

  // Sequential group-parameter computation. Groups must be requested in
  // schedule order; the committed latents condition later groups.
  struct GroupContext {
    Tensor y_hat;  // (1, M, h, w), progressively filled
    int next_group = 0;
  };
  GroupContext make_group_context(int latent_h, int latent_w) const;
  // Returns (mu, sigma) for the group; contract violation if group_index
  // != gc.next_group.
  std::pair<Tensor, Tensor> group_entropy_params(const Tensor& hyper_feat,
                                                 const GroupContext& gc,
                                                 int group_index);
  void commit_group(GroupContext& gc, int group_index, const Tensor& y_hat_group) const;

  static std::pair<int64_t, int64_t> symbol_counts(int target_h, int target_w);

  struct TrainResult {
    Value rate_bits;
    Value recon;
    Value recon_feature;
  };
  TrainResult train_forward(Tape& t, Value frame, const ctxmine::ContextPyramidV* ctx,
                            QuantMode mode, std::mt19937_64& rng);

 private:
  template <class Ctx, class V = typename Ctx::V>
  V run_encoder(Ctx& ctx, V frame, const ctxmine::ContextPyramidT<V>& cp) {
    V h = ctx.lrelu(nn::apply_conv(ctx, enc1_, ctx.concat2(frame, cp.c0)));
    h = ctx.lrelu(nn::apply_conv(ctx, enc2_, ctx.concat2(h, cp.c1)));
    h = ctx.lrelu(nn::apply_conv(ctx, enc3_, ctx.concat2(h, cp.c2)));
    return nn::apply_conv(ctx, enc4_, h);
  }
  template <class Ctx, class V = typename Ctx::V>
  std::pair<V, V> run_decoder(Ctx& ctx, V y_hat, const ctxmine::ContextPyramidT<V>& cp) {
    V h = ctx.lrelu(nn::apply_tconv(ctx, dec1_, y_hat));
    h = ctx.lrelu(nn::apply_tconv(ctx, dec2_, h));
    h = ctx.lrelu(nn::apply_tconv(ctx, dec3_, ctx.concat2(h, cp.c2)));
    h = ctx.lrelu(nn::apply_tconv(ctx, dec4_, ctx.concat2(h, cp.c1)));
    V feature = nn::apply_conv(ctx, feat_, ctx.concat2(h, cp.c0));
    V pixels = ctx.clamp01(nn::apply_conv(ctx, pix_, feature));
    return {pixels, feature};
  }
  template <class Ctx, class V = typename Ctx::V>
  V run_hyper_analysis(Ctx& ctx, V y) {
    V h = ctx.lrelu(nn::apply_conv(ctx, ha1_, y));
    return nn::apply_conv(ctx, ha2_, h);
  }
  template <class Ctx, class V = typename Ctx::V>
  V run_hyper_synthesis(Ctx& ctx, V z_hat) {
    V h = ctx.lrelu(nn::apply_tconv(ctx, hs1_, z_hat));
    return ctx.lrelu(nn::apply_tconv(ctx, hs2_, h));
  }
  template <class Ctx, class V = typename Ctx::V>
  V run_group_head(Ctx& ctx, int g, V hyper_feat, V prior_fixed) {
    V h = ctx.lrelu(nn::apply_conv(ctx, group_heads_[g].h1,
                                   ctx.concat2(hyper_feat, prior_fixed)));
    return nn::apply_conv(ctx, group_heads_[g].h2, h);
  }
  template <class Ctx, class V = typename Ctx::V>
  ctxmine::ContextPyramidT<V> zero_contexts(Ctx& ctx, int n, int h, int w) const {
    ctxmine::ContextPyramidT<V> cp;
    cp.c0 = ctx.zeros({n, 32, h, w});
    cp.c1 = ctx.zeros({n, 48, h / 2, w / 2});
    cp.c2 = ctx.zeros({n, 64, h / 4, w / 4});
    return cp;
  }

  GroupSchedule schedule_;
  nn::ConvLayer enc1_, enc2_, enc3_, enc4_;
  nn::TConvLayer dec1_, dec2_, dec3_, dec4_;
  nn::ConvLayer feat_, pix_;
  nn::ConvLayer ha1_, ha2_;
  nn::TConvLayer hs1_, hs2_;
  struct GroupHead {
    nn::ConvLayer h1, h2;
  };
  std::vector<GroupHead> group_heads_;
  Parameter z_mu_;         // (1,32,1,1)
  Parameter z_sigma_raw_;  // (1,32,1,1)

  friend struct FrameCodecTestAccess;
};

}  // namespace nvc::framecodec

#endif
