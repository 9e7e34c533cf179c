#include "nvc/motion_codec.hpp"

namespace nvc::motion {

namespace {

// Materializes a (1,C,1,1) per-channel tensor over full extents.
Tensor broadcast_map(const Tensor& per_channel, Shape target) {
  contract(per_channel.shape().c == target.c, "broadcast: channel mismatch");
  Tensor out(target);
  for (int n = 0; n < target.n; ++n) {
    for (int c = 0; c < target.c; ++c) {
      float* p = out.plane(n, c);
      std::fill(p, p + int64_t(target.h) * target.w, per_channel.at(0, c, 0, 0));
    }
  }
  return out;
}

Tensor uniform_noise(Shape s, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-0.5f, 0.5f);
  Tensor t(s);
  for (auto& v : t.vec()) v = dist(rng);
  return t;
}

}  // namespace

MotionCodec::MotionCodec(nn::Init& init) {
  enc1_ = init.conv(2, 32, 5, 2, 2);
  enc2_ = init.conv(32, 32, 5, 2, 2);
  enc3_ = init.conv(32, 32, 5, 2, 2);
  enc4_ = init.conv(32, kLatentChannels, 5, 2, 2);
  dec1_ = init.tconv(kLatentChannels, 32, 4, 2, 1);
  dec2_ = init.tconv(32, 32, 4, 2, 1);
  dec3_ = init.tconv(32, 32, 4, 2, 1);
  dec4_ = init.tconv(32, 2, 4, 2, 1);
  ha1_ = init.conv(kLatentChannels, 16, 3, 2, 1);
  ha2_ = init.conv(16, kHyperChannels, 3, 2, 1);
  hs1_ = init.tconv(kHyperChannels, 32, 4, 2, 1);
  hs2_ = init.tconv(32, 48, 4, 2, 1);
  hp1_ = init.conv(48, 48, 3, 1, 1);
  hp2_ = init.conv(48, 2 * kLatentChannels, 3, 1, 1);
  z_mu_ = init.constant({1, kHyperChannels, 1, 1}, 0.0f);
  // softplus(0.54) ~ 1.0 starting scale.
  z_sigma_raw_ = init.constant({1, kHyperChannels, 1, 1}, 0.54f);
}

void MotionCodec::visit_params(const std::string& prefix, const nn::ParamVisitor& fn) {
  nn::visit_conv(enc1_, prefix + ".enc1", fn);
  nn::visit_conv(enc2_, prefix + ".enc2", fn);
  nn::visit_conv(enc3_, prefix + ".enc3", fn);
  nn::visit_conv(enc4_, prefix + ".enc4", fn);
  nn::visit_tconv(dec1_, prefix + ".dec1", fn);
  nn::visit_tconv(dec2_, prefix + ".dec2", fn);
  nn::visit_tconv(dec3_, prefix + ".dec3", fn);
  nn::visit_tconv(dec4_, prefix + ".dec4", fn);
  nn::visit_conv(ha1_, prefix + ".ha1", fn);
  nn::visit_conv(ha2_, prefix + ".ha2", fn);
  nn::visit_tconv(hs1_, prefix + ".hs1", fn);
  nn::visit_tconv(hs2_, prefix + ".hs2", fn);
  nn::visit_conv(hp1_, prefix + ".hp1", fn);
  nn::visit_conv(hp2_, prefix + ".hp2", fn);
  fn(prefix + ".z_mu", z_mu_);
  fn(prefix + ".z_sigma_raw", z_sigma_raw_);
}

void MotionCodec::set_frozen(bool frozen) {
  visit_params("m", [frozen](const std::string&, Parameter& p) { p.frozen = frozen; });
}

std::pair<int64_t, int64_t> MotionCodec::symbol_counts(int target_h, int target_w) {
  const int ph = (target_h + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const int pw = (target_w + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const int64_t z_count = int64_t(kHyperChannels) * (ph / 64) * (pw / 64);
  const int64_t y_count = int64_t(kLatentChannels) * (ph / 16) * (pw / 16);
  return {z_count, y_count};
}

MotionCodec::EncodeResult MotionCodec::encode(const Tensor& flow) {
  const Shape in_shape = flow.shape();
  const int ph = (in_shape.h + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const int pw = (in_shape.w + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  nn::EvalCtx ctx;
  const Tensor padded =
      kernels::pad_edge(flow, 0, ph - in_shape.h, 0, pw - in_shape.w);

  const Tensor y = analysis(ctx, padded);
  const Tensor z = hyper_analysis(ctx, y);

  const Tensor z_mu_map = broadcast_map(z_mu_.value, z.shape());
  const Tensor z_sigma_map =
      broadcast_map(entropy::sigma_map_from_raw(z_sigma_raw_.value), z.shape());
  const auto zq = entropy::quantize_mean_shifted(z, z_mu_map);

  const Tensor params = hyper_synthesis(ctx, zq.dequant);
  const Tensor y_mu = kernels::slice_channels(params, 0, kLatentChannels);
  const Tensor y_sigma = entropy::sigma_map_from_raw(
      kernels::slice_channels(params, kLatentChannels, 2 * kLatentChannels));
  const auto yq = entropy::quantize_mean_shifted(y, y_mu);

  EncodeResult r;
  r.latents.z = {z.shape(), zq.symbols};
  r.latents.y = {y.shape(), yq.symbols};
  r.chunks.hyper = entropy::encode_symbols(zq.symbols, nullptr, z_sigma_map.data());
  r.chunks.latent = entropy::encode_symbols(yq.symbols, nullptr, y_sigma.data());

  // Rate estimate on the integer symbols under the same zero-mean models
  // the coder uses.
  const Tensor zero_z(z.shape());
  const Tensor zero_y(y.shape());
  Tensor z_sym_f(z.shape()), y_sym_f(y.shape());
  for (int64_t i = 0; i < z.numel(); ++i) z_sym_f.data()[i] = float(zq.symbols[i]);
  for (int64_t i = 0; i < y.numel(); ++i) y_sym_f.data()[i] = float(yq.symbols[i]);
  r.estimated_bits = entropy::estimate_bits(z_sym_f, zero_z, z_sigma_map) +
                     entropy::estimate_bits(y_sym_f, zero_y, y_sigma);

  Tensor recon = synthesis(ctx, yq.dequant);
  r.flow_hat = kernels::crop(recon, 0, 0, in_shape.h, in_shape.w);
  return r;
}

Tensor MotionCodec::decode(const MotionLatents& latents, int target_h, int target_w) {
  nn::EvalCtx ctx;
  const Tensor z_mu_map = broadcast_map(z_mu_.value, latents.z.shape);
  Tensor z_hat(latents.z.shape);
  for (int64_t i = 0; i < z_hat.numel(); ++i) {
    z_hat.data()[i] = float(latents.z.symbols[i]) + z_mu_map.data()[i];
  }
  const Tensor params = hyper_synthesis(ctx, z_hat);
  const Tensor y_mu = kernels::slice_channels(params, 0, kLatentChannels);
  Tensor y_hat(latents.y.shape);
  for (int64_t i = 0; i < y_hat.numel(); ++i) {
    y_hat.data()[i] = float(latents.y.symbols[i]) + y_mu.data()[i];
  }
  Tensor recon = synthesis(ctx, y_hat);
  return kernels::crop(recon, 0, 0, target_h, target_w);
}

Tensor MotionCodec::decode_chunks(const MotionChunks& chunks, int target_h,
                                  int target_w) {
  const auto [z_count, y_count] = symbol_counts(target_h, target_w);
  const int ph = (target_h + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const int pw = (target_w + kPadMultiple - 1) / kPadMultiple * kPadMultiple;

  MotionLatents latents;
  latents.z.shape = {1, kHyperChannels, ph / 64, pw / 64};
  latents.y.shape = {1, kLatentChannels, ph / 16, pw / 16};
  contract(latents.z.shape.numel() == z_count && latents.y.shape.numel() == y_count,
           "motion decode: inconsistent symbol counts");

  const Tensor z_sigma_map = broadcast_map(
      entropy::sigma_map_from_raw(z_sigma_raw_.value), latents.z.shape);
  latents.z.symbols = entropy::decode_symbols(
      std::span(chunks.hyper.data(), chunks.hyper.size()), nullptr,
      z_sigma_map.data(), size_t(z_count));

  // Recompute the per-element sigmas from the decoded hyper symbols.
  nn::EvalCtx ctx;
  const Tensor z_mu_map = broadcast_map(z_mu_.value, latents.z.shape);
  Tensor z_hat(latents.z.shape);
  for (int64_t i = 0; i < z_hat.numel(); ++i) {
    z_hat.data()[i] = float(latents.z.symbols[i]) + z_mu_map.data()[i];
  }
  const Tensor params = hyper_synthesis(ctx, z_hat);
  const Tensor y_mu = kernels::slice_channels(params, 0, kLatentChannels);
  const Tensor y_sigma = entropy::sigma_map_from_raw(
      kernels::slice_channels(params, kLatentChannels, 2 * kLatentChannels));
  latents.y.symbols = entropy::decode_symbols(
      std::span(chunks.latent.data(), chunks.latent.size()), nullptr,
      y_sigma.data(), size_t(y_count));

  Tensor y_hat(latents.y.shape);
  for (int64_t i = 0; i < y_hat.numel(); ++i) {
    y_hat.data()[i] = float(latents.y.symbols[i]) + y_mu.data()[i];
  }
  Tensor recon = synthesis(ctx, y_hat);
  return kernels::crop(recon, 0, 0, target_h, target_w);
}

MotionCodec::TrainResult MotionCodec::train_forward(Tape& t, Value flow,
                                                    QuantMode mode,
                                                    std::mt19937_64& rng) {
  nn::GradCtx ctx{&t};
  const Shape in_shape = t.value(flow).shape();
  const int ph = (in_shape.h + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const int pw = (in_shape.w + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  Value padded = ctx.pad(flow, 0, ph - in_shape.h, 0, pw - in_shape.w);

  Value y = analysis(ctx, padded);
  Value z = hyper_analysis(ctx, y);
  const Shape zs = t.value(z).shape();
  const Shape ys = t.value(y).shape();

  Value z_mu_b = ad::broadcast_chw(t, t.param(z_mu_), zs.n, zs.h, zs.w);
  Value z_sigma_b = ad::broadcast_chw(
      t, ad::clamp_min(t, ad::softplus(t, t.param(z_sigma_raw_)), entropy::kSigmaMin),
      zs.n, zs.h, zs.w);

  Value z_noisy = ad::add(t, z, t.leaf(uniform_noise(zs, rng)));
  Value rate_z = ad::sum(t, ad::gaussian_bits(t, z_noisy, z_mu_b, z_sigma_b));
  Value z_dec = mode == QuantMode::kNoise
                    ? z_noisy
                    : ad::add(t, ad::round_ste(t, ad::sub(t, z, z_mu_b)), z_mu_b);

  Value params = hyper_synthesis(ctx, z_dec);
  Value y_mu = ctx.slice(params, 0, kLatentChannels);
  Value y_sigma = ad::clamp_min(
      t, ad::softplus(t, ctx.slice(params, kLatentChannels, 2 * kLatentChannels)),
      entropy::kSigmaMin);

  Value y_noisy = ad::add(t, y, t.leaf(uniform_noise(ys, rng)));
  Value rate_y = ad::sum(t, ad::gaussian_bits(t, y_noisy, y_mu, y_sigma));
  Value y_dec = mode == QuantMode::kNoise
                    ? y_noisy
                    : ad::add(t, ad::round_ste(t, ad::sub(t, y, y_mu)), y_mu);

  Value recon = synthesis(ctx, y_dec);
  TrainResult r;
  r.rate_bits = ad::add(t, rate_z, rate_y);
  r.flow_hat = ctx.crop(recon, 0, 0, in_shape.h, in_shape.w);
  return r;
}

}  // namespace nvc::motion
