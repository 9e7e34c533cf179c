#include "nvc/flow.hpp"

#include <cmath>

namespace nvc::flow {

ImagePyramid build_image_pyramid(const Tensor& frame, int levels) {
  contract(levels >= 1, "build_image_pyramid: levels must be >= 1");
  const Shape s = frame.shape();
  const int mult = 1 << (levels - 1);
  ImagePyramid p;
  p.pad_bottom = (s.h + mult - 1) / mult * mult - s.h;
  p.pad_right = (s.w + mult - 1) / mult * mult - s.w;
  p.levels.push_back(kernels::pad_edge(frame, 0, p.pad_bottom, 0, p.pad_right));
  for (int l = 1; l < levels; ++l) {
    p.levels.push_back(kernels::avg_pool2(p.levels.back()));
  }
  if (p.pad_bottom == 0 && p.pad_right == 0) {
    p.levels[0] = frame;
  }
  return p;
}

Tensor upsample_flow(const Tensor& f) {
  const Shape s = f.shape();
  contract(s.c == 2, "upsample_flow: expected a (N,2,H,W) field, got " + s.str());
  Tensor up = kernels::resize(f, s.h * 2, s.w * 2, kernels::ResizeMode::kBilinear);
  for (float& v : up.vec()) v *= 2.0f;
  return up;
}

Value upsample_flow(Tape& t, Value f) {
  const Shape s = t.value(f).shape();
  return ad::scale(t, ad::resize(t, f, s.h * 2, s.w * 2,
                                 kernels::ResizeMode::kBilinear),
                   2.0f);
}

Tensor flow_to_color(const Tensor& f) {
  const Shape s = f.shape();
  contract(s.c == 2, "flow_to_color: expected a (N,2,H,W) field");
  float max_mag = 1e-6f;
  const float* u = f.plane(0, 0);
  const float* v = f.plane(0, 1);
  const int64_t area = int64_t(s.h) * s.w;
  for (int64_t i = 0; i < area; ++i) {
    max_mag = std::max(max_mag, std::hypot(u[i], v[i]));
  }
  Tensor rgb({s.n, 3, s.h, s.w});
  for (int64_t i = 0; i < area; ++i) {
    const float mag = std::hypot(u[i], v[i]) / max_mag;
    const float ang = std::atan2(-v[i], -u[i]) / float(M_PI);  // [-1, 1]
    const float h6 = (ang + 1.0f) * 3.0f;                      // hue in [0, 6)
    const int k = int(h6) % 6;
    const float frac = h6 - std::floor(h6);
    float r = 0, g = 0, b = 0;
    switch (k) {
      case 0: r = 1; g = frac; break;
      case 1: r = 1 - frac; g = 1; break;
      case 2: g = 1; b = frac; break;
      case 3: g = 1 - frac; b = 1; break;
      case 4: b = 1; r = frac; break;
      default: b = 1 - frac; r = 1; break;
    }
    // Desaturate toward white at low magnitude.
    rgb.plane(0, 0)[i] = 1.0f - mag * (1.0f - r);
    rgb.plane(0, 1)[i] = 1.0f - mag * (1.0f - g);
    rgb.plane(0, 2)[i] = 1.0f - mag * (1.0f - b);
  }
  return rgb;
}

FlowEstimator::FlowEstimator(nn::Init& init, int levels) {
  contract(levels >= 1, "flow estimator: levels must be >= 1");
  levels_.reserve(levels);
  for (int l = 0; l < levels; ++l) {
    Level lvl;
    lvl.c1 = init.conv(8, 32, 7, 1, 3);
    lvl.c2 = init.conv(32, 64, 7, 1, 3);
    lvl.c3 = init.conv(64, 32, 7, 1, 3);
    lvl.c4 = init.conv(32, 16, 7, 1, 3);
    // Small final-layer init keeps early flows near zero.
    lvl.c5 = init.conv(16, 2, 7, 1, 3, 0.1f);
    levels_.push_back(std::move(lvl));
  }
}

void FlowEstimator::visit_params(const std::string& prefix, const nn::ParamVisitor& fn) {
  for (size_t l = 0; l < levels_.size(); ++l) {
    const std::string base = prefix + ".level" + std::to_string(l);
    nn::visit_conv(levels_[l].c1, base + ".c1", fn);
    nn::visit_conv(levels_[l].c2, base + ".c2", fn);
    nn::visit_conv(levels_[l].c3, base + ".c3", fn);
    nn::visit_conv(levels_[l].c4, base + ".c4", fn);
    nn::visit_conv(levels_[l].c5, base + ".c5", fn);
  }
}

void FlowEstimator::set_frozen(bool frozen) {
  visit_params("flow", [frozen](const std::string&, Parameter& p) {
    p.frozen = frozen;
  });
}

Tensor FlowEstimator::estimate(const Tensor& current, const Tensor& reference) {
  nn::EvalCtx ctx;
  return run(ctx, current, reference);
}

Value FlowEstimator::estimate(Tape& t, Value current, Value reference) {
  nn::GradCtx ctx{&t};
  return run(ctx, current, reference);
}

}  // namespace nvc::flow
