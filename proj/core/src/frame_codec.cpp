#include "nvc/frame_codec.hpp"

#include <numeric>

namespace nvc::framecodec {

namespace {

Tensor broadcast_map(const Tensor& per_channel, Shape target) {
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

Tensor symbols_to_tensor(const std::vector<int32_t>& symbols, Shape s) {
  Tensor t(s);
  for (int64_t i = 0; i < s.numel(); ++i) t.data()[i] = float(symbols[size_t(i)]);
  return t;
}

}  // namespace

int GroupSchedule::total() const {
  return std::accumulate(sizes.begin(), sizes.end(), 0);
}

std::vector<int> GroupSchedule::offsets() const {
  std::vector<int> off(sizes.size());
  int acc = 0;
  for (size_t i = 0; i < sizes.size(); ++i) {
    off[i] = acc;
    acc += sizes[i];
  }
  return off;
}

void GroupSchedule::validate(int latent_channels) const {
  contract(!sizes.empty(), "group schedule: empty");
  for (size_t i = 0; i < sizes.size(); ++i) {
    contract(sizes[i] > 0, "group schedule: sizes must be strictly positive");
    contract(i == 0 || sizes[i] >= sizes[i - 1],
             "group schedule: sizes must be nondecreasing");
  }
  contract(total() == latent_channels,
           "group schedule: sizes sum to " + std::to_string(total()) +
               ", expected " + std::to_string(latent_channels));
}

FrameCodec::FrameCodec(nn::Init& init, GroupSchedule schedule)
    : schedule_(std::move(schedule)) {
  schedule_.validate(kLatentChannels);
  contract(schedule_.total() - schedule_.sizes.back() <= kPriorWidth,
           "group schedule: prior channels exceed the fixed head width");
  group_heads_.resize(schedule_.sizes.size());
  enc1_ = init.conv(3 + 32, 48, 5, 2, 2);
  enc2_ = init.conv(48 + 48, 64, 5, 2, 2);
  enc3_ = init.conv(64 + 64, 64, 5, 2, 2);
  enc4_ = init.conv(64, kLatentChannels, 5, 2, 2);
  dec1_ = init.tconv(kLatentChannels, 64, 4, 2, 1);
  dec2_ = init.tconv(64, 64, 4, 2, 1);
  dec3_ = init.tconv(64 + 64, 48, 4, 2, 1);
  dec4_ = init.tconv(48 + 48, 32, 4, 2, 1);
  feat_ = init.conv(32 + 32, ctxmine::ContextMiner::kFeatureChannels, 3, 1, 1);
  pix_ = init.conv(ctxmine::ContextMiner::kFeatureChannels, 3, 3, 1, 1);
  ha1_ = init.conv(kLatentChannels, 48, 3, 2, 1);
  ha2_ = init.conv(48, kHyperChannels, 3, 2, 1);
  hs1_ = init.tconv(kHyperChannels, 48, 4, 2, 1);
  hs2_ = init.tconv(48, 64, 4, 2, 1);
  for (size_t g = 0; g < group_heads_.size(); ++g) {
    group_heads_[g].h1 = init.conv(64 + kPriorWidth, 64, 3, 1, 1);
    group_heads_[g].h2 = init.conv(64, 2 * schedule_.sizes[g], 3, 1, 1);
  }
  z_mu_ = init.constant({1, kHyperChannels, 1, 1}, 0.0f);
  z_sigma_raw_ = init.constant({1, kHyperChannels, 1, 1}, 0.54f);
}

void FrameCodec::visit_params(const std::string& prefix, const nn::ParamVisitor& fn) {
  nn::visit_conv(enc1_, prefix + ".enc1", fn);
  nn::visit_conv(enc2_, prefix + ".enc2", fn);
  nn::visit_conv(enc3_, prefix + ".enc3", fn);
  nn::visit_conv(enc4_, prefix + ".enc4", fn);
  nn::visit_tconv(dec1_, prefix + ".dec1", fn);
  nn::visit_tconv(dec2_, prefix + ".dec2", fn);
  nn::visit_tconv(dec3_, prefix + ".dec3", fn);
  nn::visit_tconv(dec4_, prefix + ".dec4", fn);
  nn::visit_conv(feat_, prefix + ".feat", fn);
  nn::visit_conv(pix_, prefix + ".pix", fn);
  nn::visit_conv(ha1_, prefix + ".ha1", fn);
  nn::visit_conv(ha2_, prefix + ".ha2", fn);
  nn::visit_tconv(hs1_, prefix + ".hs1", fn);
  nn::visit_tconv(hs2_, prefix + ".hs2", fn);
  for (size_t g = 0; g < group_heads_.size(); ++g) {
    const std::string base = prefix + ".group" + std::to_string(g);
    nn::visit_conv(group_heads_[g].h1, base + ".h1", fn);
    nn::visit_conv(group_heads_[g].h2, base + ".h2", fn);
  }
  fn(prefix + ".z_mu", z_mu_);
  fn(prefix + ".z_sigma_raw", z_sigma_raw_);
}

void FrameCodec::set_frozen(bool frozen) {
  visit_params("f", [frozen](const std::string&, Parameter& p) { p.frozen = frozen; });
}

std::pair<int64_t, int64_t> FrameCodec::symbol_counts(int target_h, int target_w) {
  const int ph = (target_h + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const int pw = (target_w + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const int64_t z_count = int64_t(kHyperChannels) * (ph / 64) * (pw / 64);
  const int64_t y_count = int64_t(kLatentChannels) * (ph / 16) * (pw / 16);
  return {z_count, y_count};
}

FrameCodec::GroupContext FrameCodec::make_group_context(int latent_h,
                                                        int latent_w) const {
  GroupContext gc;
  gc.y_hat = Tensor({1, kLatentChannels, latent_h, latent_w});
  return gc;
}

std::pair<Tensor, Tensor> FrameCodec::group_entropy_params(const Tensor& hyper_feat,
                                                           const GroupContext& gc,
                                                           int group_index) {
  contract(group_index >= 0 && group_index < int(group_heads_.size()),
           "group_entropy_params: group index out of range");
  contract(group_index == gc.next_group,
           "group_entropy_params: groups are strictly sequential; requested " +
               std::to_string(group_index) + " but next is " +
               std::to_string(gc.next_group));
  const Shape ls = gc.y_hat.shape();
  const auto offsets = schedule_.offsets();
  Tensor prior({1, kPriorWidth, ls.h, ls.w});
  const int prior_c = offsets[group_index];
  for (int c = 0; c < prior_c; ++c) {
    const float* src = gc.y_hat.plane(0, c);
    std::copy(src, src + int64_t(ls.h) * ls.w, prior.plane(0, c));
  }
  nn::EvalCtx ctx;
  const Tensor params = run_group_head(ctx, group_index, hyper_feat, prior);
  const int gs = schedule_.sizes[group_index];
  Tensor mu = kernels::slice_channels(params, 0, gs);
  Tensor sigma =
      entropy::sigma_map_from_raw(kernels::slice_channels(params, gs, 2 * gs));
  return {std::move(mu), std::move(sigma)};
}

void FrameCodec::commit_group(GroupContext& gc, int group_index,
                              const Tensor& y_hat_group) const {
  contract(group_index == gc.next_group, "commit_group: out of order");
  const auto offsets = schedule_.offsets();
  const int off = offsets[group_index];
  const int gs = schedule_.sizes[group_index];
  const Shape ls = gc.y_hat.shape();
  contract(y_hat_group.shape().c == gs, "commit_group: group width mismatch");
  for (int c = 0; c < gs; ++c) {
    const float* src = y_hat_group.plane(0, c);
    std::copy(src, src + int64_t(ls.h) * ls.w, gc.y_hat.plane(0, off + c));
  }
  gc.next_group += 1;
}

FrameCodec::EncodeResult FrameCodec::encode(const Tensor& frame,
                                            const ctxmine::ContextPyramid* cp) {
  const Shape in_shape = frame.shape();
  const int ph = (in_shape.h + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const int pw = (in_shape.w + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  nn::EvalCtx ctx;
  const Tensor padded = kernels::pad_edge(frame, 0, ph - in_shape.h, 0, pw - in_shape.w);

  ctxmine::ContextPyramid zero_cp;
  if (!cp) {
    zero_cp = zero_contexts(ctx, in_shape.n, ph, pw);
    cp = &zero_cp;
  }
  contract(cp->c0.shape().h == ph && cp->c0.shape().w == pw,
           "contextual_encode: context extents " + cp->c0.shape().str() +
               " do not match padded frame (" + std::to_string(ph) + "," +
               std::to_string(pw) + ")");

  const Tensor y = run_encoder(ctx, padded, *cp);
  const Tensor z = run_hyper_analysis(ctx, y);

  const Tensor z_mu_map = broadcast_map(z_mu_.value, z.shape());
  const Tensor z_sigma_map =
      broadcast_map(entropy::sigma_map_from_raw(z_sigma_raw_.value), z.shape());
  const auto zq = entropy::quantize_mean_shifted(z, z_mu_map);

  EncodeResult r;
  r.latents.z = {z.shape(), zq.symbols};
  r.chunks.hyper = entropy::encode_symbols(zq.symbols, nullptr, z_sigma_map.data());
  r.estimated_bits = entropy::estimate_bits(symbols_to_tensor(zq.symbols, z.shape()),
                                            Tensor(z.shape()), z_sigma_map);

  const Tensor hyper_feat = run_hyper_synthesis(ctx, zq.dequant);
  const Shape ls = y.shape();
  GroupContext gc = make_group_context(ls.h, ls.w);
  r.latents.y.shape = ls;
  r.latents.y.symbols.resize(size_t(ls.numel()));
  const auto offsets = schedule_.offsets();
  for (size_t g = 0; g < group_heads_.size(); ++g) {
    const auto [mu, sigma] = group_entropy_params(hyper_feat, gc, int(g));
    const Tensor y_g = kernels::slice_channels(y, offsets[g], offsets[g] + schedule_.sizes[g]);
    const auto q = entropy::quantize_mean_shifted(y_g, mu);
    r.chunks.groups.push_back(entropy::encode_symbols(q.symbols, nullptr, sigma.data()));
    r.estimated_bits += entropy::estimate_bits(symbols_to_tensor(q.symbols, y_g.shape()),
                                               Tensor(y_g.shape()), sigma);
    // Group symbols land at their channel offset in the flat symbol array.
    const int64_t plane = int64_t(ls.h) * ls.w;
    for (int c = 0; c < schedule_.sizes[g]; ++c) {
      std::copy(q.symbols.begin() + c * plane, q.symbols.begin() + (c + 1) * plane,
                r.latents.y.symbols.begin() + (offsets[g] + c) * plane);
    }
    commit_group(gc, int(g), q.dequant);
  }

  auto [pixels, feature] = run_decoder(ctx, gc.y_hat, *cp);
  r.recon = kernels::crop(pixels, 0, 0, in_shape.h, in_shape.w);
  r.recon_feature = kernels::crop(feature, 0, 0, in_shape.h, in_shape.w);
  return r;
}

FrameCodec::DecodeResult FrameCodec::decode_chunks(const FrameChunks& chunks,
                                                   const ctxmine::ContextPyramid* cp,
                                                   int target_h, int target_w) {
  contract(chunks.groups.size() == group_heads_.size(),
           "frame decode: expected " + std::to_string(group_heads_.size()) +
               " group chunks, got " + std::to_string(chunks.groups.size()));
  const int ph = (target_h + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const int pw = (target_w + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  nn::EvalCtx ctx;

  ctxmine::ContextPyramid zero_cp;
  if (!cp) {
    zero_cp = zero_contexts(ctx, 1, ph, pw);
    cp = &zero_cp;
  }

  const Shape zs{1, kHyperChannels, ph / 64, pw / 64};
  const Tensor z_sigma_map =
      broadcast_map(entropy::sigma_map_from_raw(z_sigma_raw_.value), zs);
  const auto z_symbols = entropy::decode_symbols(
      std::span(chunks.hyper.data(), chunks.hyper.size()), nullptr,
      z_sigma_map.data(), size_t(zs.numel()));
  const Tensor z_mu_map = broadcast_map(z_mu_.value, zs);
  Tensor z_hat(zs);
  for (int64_t i = 0; i < zs.numel(); ++i) {
    z_hat.data()[i] = float(z_symbols[size_t(i)]) + z_mu_map.data()[i];
  }

  const Tensor hyper_feat = run_hyper_synthesis(ctx, z_hat);
  GroupContext gc = make_group_context(ph / 16, pw / 16);
  const auto offsets = schedule_.offsets();
  for (size_t g = 0; g < group_heads_.size(); ++g) {
    const auto [mu, sigma] = group_entropy_params(hyper_feat, gc, int(g));
    const int gs = schedule_.sizes[g];
    const Shape gshape{1, gs, ph / 16, pw / 16};
    const auto symbols = entropy::decode_symbols(
        std::span(chunks.groups[g].data(), chunks.groups[g].size()), nullptr,
        sigma.data(), size_t(gshape.numel()));
    Tensor y_hat_g(gshape);
    for (int64_t i = 0; i < gshape.numel(); ++i) {
      y_hat_g.data()[i] = float(symbols[size_t(i)]) + mu.data()[i];
    }
    commit_group(gc, int(g), y_hat_g);
    (void)offsets;
  }

  auto [pixels, feature] = run_decoder(ctx, gc.y_hat, *cp);
  DecodeResult r;
  r.recon = kernels::crop(pixels, 0, 0, target_h, target_w);
  r.recon_feature = kernels::crop(feature, 0, 0, target_h, target_w);
  return r;
}

FrameCodec::TrainResult FrameCodec::train_forward(Tape& t, Value frame,
                                                  const ctxmine::ContextPyramidV* cp,
                                                  QuantMode mode,
                                                  std::mt19937_64& rng) {
  nn::GradCtx ctx{&t};
  const Shape in_shape = t.value(frame).shape();
  const int ph = (in_shape.h + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const int pw = (in_shape.w + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  Value padded = ctx.pad(frame, 0, ph - in_shape.h, 0, pw - in_shape.w);

  ctxmine::ContextPyramidV zero_cp;
  if (!cp) {
    zero_cp = zero_contexts(ctx, in_shape.n, ph, pw);
    cp = &zero_cp;
  }

  Value y = run_encoder(ctx, padded, *cp);
  Value z = run_hyper_analysis(ctx, y);
  const Shape zs = t.value(z).shape();
  const Shape ys = t.value(y).shape();

  Value z_mu_b = ad::broadcast_chw(t, t.param(z_mu_), zs.n, zs.h, zs.w);
  Value z_sigma_b = ad::broadcast_chw(
      t, ad::clamp_min(t, ad::softplus(t, t.param(z_sigma_raw_)), entropy::kSigmaMin),
      zs.n, zs.h, zs.w);
  Value z_noisy = ad::add(t, z, t.leaf(uniform_noise(zs, rng)));
  Value rate = ad::sum(t, ad::gaussian_bits(t, z_noisy, z_mu_b, z_sigma_b));
  Value z_dec = mode == QuantMode::kNoise
                    ? z_noisy
                    : ad::add(t, ad::round_ste(t, ad::sub(t, z, z_mu_b)), z_mu_b);

  Value hyper_feat = run_hyper_synthesis(ctx, z_dec);
  const auto offsets = schedule_.offsets();
  std::vector<Value> decoded_groups;
  for (size_t g = 0; g < group_heads_.size(); ++g) {
    const int gs = schedule_.sizes[g];
    // Prior: previously decoded groups, zero-padded to the fixed width.
    Value prior;
    const int prior_c = offsets[g];
    if (prior_c == 0) {
      prior = ctx.zeros({ys.n, kPriorWidth, ys.h, ys.w});
    } else {
      std::vector<Value> parts = decoded_groups;
      if (prior_c < kPriorWidth) {
        parts.push_back(ctx.zeros({ys.n, kPriorWidth - prior_c, ys.h, ys.w}));
      }
      prior = ctx.concat(parts);
    }
    Value params = run_group_head(ctx, int(g), hyper_feat, prior);
    Value mu = ctx.slice(params, 0, gs);
    Value sigma = ad::clamp_min(t, ad::softplus(t, ctx.slice(params, gs, 2 * gs)),
                                entropy::kSigmaMin);
    Value y_g = ctx.slice(y, offsets[g], offsets[g] + gs);
    Value y_noisy = ad::add(t, y_g, t.leaf(uniform_noise(t.value(y_g).shape(), rng)));
    rate = ad::add(t, rate, ad::sum(t, ad::gaussian_bits(t, y_noisy, mu, sigma)));
    Value y_dec = mode == QuantMode::kNoise
                      ? y_noisy
                      : ad::add(t, ad::round_ste(t, ad::sub(t, y_g, mu)), mu);
    decoded_groups.push_back(y_dec);
  }
  Value y_hat = ctx.concat(decoded_groups);

  auto [pixels, feature] = run_decoder(ctx, y_hat, *cp);
  TrainResult r;
  r.rate_bits = rate;
  r.recon = ctx.crop(pixels, 0, 0, in_shape.h, in_shape.w);
  r.recon_feature = ctx.crop(feature, 0, 0, in_shape.h, in_shape.w);
  return r;
}

}  // namespace nvc::framecodec
