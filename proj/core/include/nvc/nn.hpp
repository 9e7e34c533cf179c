#ifndef NVC_NN_HPP
#define NVC_NN_HPP

#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "nvc/ops.hpp"

namespace nvc::nn {

struct ConvLayer {
  Parameter w;  // (Co, Ci, k, k)
  Parameter b;  // (1, Co, 1, 1)
  int stride = 1;
  int pad = 0;
};

struct TConvLayer {
  Parameter w;  // (Ci, Co, k, k)
  Parameter b;  // (1, Co, 1, 1)
  int stride = 2;
  int pad = 1;
};

using ParamVisitor = std::function<void(const std::string&, Parameter&)>;

inline void visit_conv(ConvLayer& l, const std::string& name, const ParamVisitor& fn) {
  fn(name + ".w", l.w);
  fn(name + ".b", l.b);
}
inline void visit_tconv(TConvLayer& l, const std::string& name, const ParamVisitor& fn) {
  fn(name + ".w", l.w);
  fn(name + ".b", l.b);
}

// Seeded fan-in-scaled uniform initialization; layer creation order fixes
// the random stream, so a given seed reproduces the same weights.
class Init {
 public:
  explicit Init(uint64_t seed) : rng_(seed) {}

  Tensor uniform(Shape s, float bound) {
    std::uniform_real_distribution<float> dist(-bound, bound);
    Tensor t(s);
    for (auto& v : t.vec()) v = dist(rng_);
    return t;
  }

  ConvLayer conv(int ci, int co, int k, int stride, int pad, float gain = 1.0f) {
    const float bound = gain * std::sqrt(2.0f / (float(ci) * k * k));
    ConvLayer l;
    l.w = Parameter(uniform({co, ci, k, k}, bound));
    l.b = Parameter(Tensor({1, co, 1, 1}));
    l.stride = stride;
    l.pad = pad;
    return l;
  }

  TConvLayer tconv(int ci, int co, int k, int stride, int pad, float gain = 1.0f) {
    const float bound = gain * std::sqrt(2.0f / (float(ci) * k * k));
    TConvLayer l;
    l.w = Parameter(uniform({ci, co, k, k}, bound));
    l.b = Parameter(Tensor({1, co, 1, 1}));
    l.stride = stride;
    l.pad = pad;
    return l;
  }

  Parameter constant(Shape s, float value) {
    return Parameter(Tensor(s, value));
  }

 private:
  std::mt19937_64 rng_;
};

// The two execution contexts for network wiring. EvalCtx computes plain
// tensors; GradCtx records the same computation on a tape. Both delegate to
// the same kernels, so forward results are bit-identical.
struct EvalCtx {
  using V = Tensor;

  V conv(const ConvLayer& l, const V& x) const {
    return kernels::conv2d(x, l.w.value, l.b.value.vec(), l.stride, l.pad);
  }
  V tconv(const TConvLayer& l, const V& x) const {
    return kernels::tconv2d(x, l.w.value, l.b.value.vec(), l.stride, l.pad);
  }
  V lrelu(const V& x) const { return kernels::leaky_relu(x, ad::kLeakySlope); }
  V warp(const V& img, const V& flow) const { return kernels::warp_bilinear(img, flow); }
  V avg_pool(const V& x) const { return kernels::avg_pool2(x); }
  V resize_bilinear(const V& x, int h, int w) const {
    return kernels::resize(x, h, w, kernels::ResizeMode::kBilinear);
  }
  V pad(const V& x, int t, int b, int l, int r) const {
    return kernels::pad_edge(x, t, b, l, r);
  }
  V crop(const V& x, int y0, int x0, int h, int w) const {
    return kernels::crop(x, y0, x0, h, w);
  }
  V concat(const std::vector<V>& xs) const {
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(xs.size());
    for (const V& x : xs) ptrs.push_back(&x);
    return kernels::concat_channels(ptrs);
  }
  V concat2(const V& a, const V& b) const {
    return kernels::concat_channels({&a, &b});
  }
  V slice(const V& x, int c0, int c1) const { return kernels::slice_channels(x, c0, c1); }
  V add(const V& a, const V& b) const {
    contract(a.shape() == b.shape(), "add: shape mismatch");
    Tensor y(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) y.data()[i] = a.data()[i] + b.data()[i];
    return y;
  }
  V scale(const V& x, float s) const {
    Tensor y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) y.data()[i] = s * x.data()[i];
    return y;
  }
  V clamp01(const V& x) const {
    Tensor y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) {
      y.data()[i] = std::clamp(x.data()[i], 0.0f, 1.0f);
    }
    return y;
  }
  V zeros(Shape s) const { return Tensor(s); }
  Shape shape(const V& x) const { return x.shape(); }
};

struct GradCtx {
  Tape* tape;
  using V = Value;

  V conv(ConvLayer& l, V x) const {
    return ad::conv2d(*tape, x, tape->param(l.w), tape->param(l.b), l.stride, l.pad);
  }
  V tconv(TConvLayer& l, V x) const {
    return ad::tconv2d(*tape, x, tape->param(l.w), tape->param(l.b), l.stride, l.pad);
  }
  V lrelu(V x) const { return ad::leaky_relu(*tape, x); }
  V warp(V img, V flow) const { return ad::warp_bilinear(*tape, img, flow); }
  V avg_pool(V x) const { return ad::avg_pool2(*tape, x); }
  V resize_bilinear(V x, int h, int w) const {
    return ad::resize(*tape, x, h, w, kernels::ResizeMode::kBilinear);
  }
  V pad(V x, int t, int b, int l, int r) const {
    return ad::pad_edge(*tape, x, t, b, l, r);
  }
  V crop(V x, int y0, int x0, int h, int w) const {
    return ad::crop(*tape, x, y0, x0, h, w);
  }
  V concat(const std::vector<V>& xs) const { return ad::concat_channels(*tape, xs); }
  V concat2(V a, V b) const { return concat({a, b}); }
  V slice(V x, int c0, int c1) const { return ad::slice_channels(*tape, x, c0, c1); }
  V add(V a, V b) const { return ad::add(*tape, a, b); }
  V scale(V x, float s) const { return ad::scale(*tape, x, s); }
  V clamp01(V x) const { return ad::clamp01_ste(*tape, x); }
  V zeros(Shape s) const { return tape->leaf(Tensor(s)); }
  Shape shape(V x) const { return tape->value(x).shape(); }
};

// conv/tconv on GradCtx need mutable layers (parameter binding); EvalCtx
// takes them const. Networks route through these helpers.
template <class Ctx>
typename Ctx::V apply_conv(Ctx& ctx, ConvLayer& l, typename Ctx::V x) {
  return ctx.conv(l, x);
}
template <class Ctx>
typename Ctx::V apply_tconv(Ctx& ctx, TConvLayer& l, typename Ctx::V x) {
  return ctx.tconv(l, x);
}

}  // namespace nvc::nn

#endif
