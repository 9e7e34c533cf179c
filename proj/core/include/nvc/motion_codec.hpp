#ifndef NVC_MOTION_CODEC_HPP
#define NVC_MOTION_CODEC_HPP

#include <random>

#include "nvc/entropy.hpp"
#include "nvc/nn.hpp"

namespace nvc {

// Latent quantization policy during training: additive uniform noise for
// both rate and reconstruction (stage 1), or noise for the rate term with
// straight-through rounding feeding the reconstruction path (stage 2).
enum class QuantMode { kNoise, kNoiseRateSteRecon };

}  // namespace nvc

namespace nvc::motion {

struct MotionLatents {
  entropy::QuantizedLatents y;  // 32 channels at 1/16 of the padded extents
  entropy::QuantizedLatents z;  // 16 channels at 1/64
};

struct MotionChunks {
  std::vector<uint8_t> hyper;
  std::vector<uint8_t> latent;
};

// Hyperprior autoencoder over flow fields. Analysis: 4 stride-2 convs
// (32,32,32,32); hyper-analysis: 2 stride-2 convs; synthesis mirrors with
// transposed convs. The hyper latent is modeled by per-channel learned
// (mu, sigma); the main latent by per-element (mu, sigma) from the
// hyper-decoder with mean-shifted quantization.
class MotionCodec {
 public:
  static constexpr int kLatentChannels = 32;
  static constexpr int kHyperChannels = 16;
  // Flow extents are padded to a multiple of this before the transforms.
  static constexpr int kPadMultiple = 64;

  explicit MotionCodec(nn::Init& init);
  void visit_params(const std::string& prefix, const nn::ParamVisitor& fn);
  void set_frozen(bool frozen);

  struct EncodeResult {
    MotionLatents latents;
    MotionChunks chunks;
    Tensor flow_hat;        // reconstruction at the input extents
    double estimated_bits;  // rate estimate over both latents
  };
  EncodeResult encode(const Tensor& flow);

  // Symbol-level decode; recomputes entropy parameters from the hyper
  // symbols exactly as the encoder did.
  Tensor decode(const MotionLatents& latents, int target_h, int target_w);
  Tensor decode_chunks(const MotionChunks& chunks, int target_h, int target_w);

  // Expected symbol counts for the padded extents (hyper, latent).
  static std::pair<int64_t, int64_t> symbol_counts(int target_h, int target_w);

  struct TrainResult {
    Value rate_bits;
    Value flow_hat;
  };
  TrainResult train_forward(Tape& t, Value flow, QuantMode mode,
                            std::mt19937_64& rng);

  template <class Ctx>
  typename Ctx::V analysis(Ctx& ctx, typename Ctx::V flow) {
    auto h = ctx.lrelu(nn::apply_conv(ctx, enc1_, flow));
    h = ctx.lrelu(nn::apply_conv(ctx, enc2_, h));
    h = ctx.lrelu(nn::apply_conv(ctx, enc3_, h));
    return nn::apply_conv(ctx, enc4_, h);
  }
  template <class Ctx>
  typename Ctx::V synthesis(Ctx& ctx, typename Ctx::V y) {
    auto h = ctx.lrelu(nn::apply_tconv(ctx, dec1_, y));
    h = ctx.lrelu(nn::apply_tconv(ctx, dec2_, h));
    h = ctx.lrelu(nn::apply_tconv(ctx, dec3_, h));
    return nn::apply_tconv(ctx, dec4_, h);
  }
  template <class Ctx>
  typename Ctx::V hyper_analysis(Ctx& ctx, typename Ctx::V y) {
    auto h = ctx.lrelu(nn::apply_conv(ctx, ha1_, y));
    return nn::apply_conv(ctx, ha2_, h);
  }
  // Entropy parameters (mu, sigma_raw) for the main latent, 2 * 32 channels.
  template <class Ctx>
  typename Ctx::V hyper_synthesis(Ctx& ctx, typename Ctx::V z_hat) {
    auto h = ctx.lrelu(nn::apply_tconv(ctx, hs1_, z_hat));
    h = ctx.lrelu(nn::apply_tconv(ctx, hs2_, h));
    h = ctx.lrelu(nn::apply_conv(ctx, hp1_, h));
    return nn::apply_conv(ctx, hp2_, h);
  }

  Parameter& z_mu() { return z_mu_; }
  Parameter& z_sigma_raw() { return z_sigma_raw_; }

 private:
  nn::ConvLayer enc1_, enc2_, enc3_, enc4_;
  nn::TConvLayer dec1_, dec2_, dec3_, dec4_;
  nn::ConvLayer ha1_, ha2_;
  nn::TConvLayer hs1_, hs2_;
  nn::ConvLayer hp1_, hp2_;
  Parameter z_mu_;         // (1,16,1,1)
  Parameter z_sigma_raw_;  // (1,16,1,1)
};

}  // namespace nvc::motion

#endif
