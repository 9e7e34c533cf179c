#include "nvc/context_mining.hpp"

namespace nvc::ctxmine {

Tensor flow_for_level(const Tensor& flow, int level) {
  contract(level >= 0 && level <= 2, "flow_for_level: level must be in {0,1,2}");
  Tensor f = flow;
  for (int l = 0; l < level; ++l) {
    f = kernels::avg_pool2(f);
    for (float& v : f.vec()) v *= 0.5f;
  }
  return f;
}

Value flow_for_level(Tape& t, Value flow, int level) {
  contract(level >= 0 && level <= 2, "flow_for_level: level must be in {0,1,2}");
  Value f = flow;
  for (int l = 0; l < level; ++l) {
    f = ad::scale(t, ad::avg_pool2(t, f), 0.5f);
  }
  return f;
}

ContextMiner::ContextMiner(nn::Init& init) {
  embed_ = init.conv(3, kFeatureChannels, 3, 1, 1);
  f0_ = init.conv(2 * kFeatureChannels, 32, 3, 1, 1);
  f1_ = init.conv(32, 48, 3, 2, 1);
  f2_ = init.conv(48, 64, 3, 2, 1);
  fuse2_ = init.conv(64, 64, 3, 1, 1);
  up2_ = init.tconv(64, 48, 4, 2, 1);
  fuse1_ = init.conv(96, 48, 3, 1, 1);
  up1_ = init.tconv(48, 32, 4, 2, 1);
  fuse0_ = init.conv(64, 32, 3, 1, 1);
}

void ContextMiner::visit_params(const std::string& prefix, const nn::ParamVisitor& fn) {
  nn::visit_conv(embed_, prefix + ".embed", fn);
  nn::visit_conv(f0_, prefix + ".f0", fn);
  nn::visit_conv(f1_, prefix + ".f1", fn);
  nn::visit_conv(f2_, prefix + ".f2", fn);
  nn::visit_conv(fuse2_, prefix + ".fuse2", fn);
  nn::visit_tconv(up2_, prefix + ".up2", fn);
  nn::visit_conv(fuse1_, prefix + ".fuse1", fn);
  nn::visit_tconv(up1_, prefix + ".up1", fn);
  nn::visit_conv(fuse0_, prefix + ".fuse0", fn);
}

void ContextMiner::set_frozen(bool frozen) {
  visit_params("cm", [frozen](const std::string&, Parameter& p) { p.frozen = frozen; });
}

std::array<Tensor, 3> ContextMiner::extract_features_eval(const ReferenceState& state) {
  contract(state.populated(), "extract_reference_feature: state not populated");
  nn::EvalCtx ctx;
  return extract_features(ctx, state.recon_frame, state.recon_feature);
}

ContextPyramid ContextMiner::mine_eval(const std::array<Tensor, 3>& features,
                                       const Tensor& flow_hat) {
  nn::EvalCtx ctx;
  return mine(ctx, features, flow_hat);
}

void ContextMiner::init_fuse0_passthrough() {
  Tensor w = Tensor(fuse0_.w.value.shape());
  for (int c = 0; c < 32; ++c) {
    w.at(c, c, 1, 1) = 1.0f;  // center tap identity on the warped branch
  }
  fuse0_.w.value = w;
  fuse0_.b.value = Tensor(fuse0_.b.value.shape());
}

}  // namespace nvc::ctxmine
