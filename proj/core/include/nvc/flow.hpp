#ifndef NVC_FLOW_HPP
#define NVC_FLOW_HPP

#include <vector>

#include "nvc/nn.hpp"

namespace nvc::flow {

// A flow field is a (1,2,H,W) tensor: channel 0 = horizontal displacement
// u, channel 1 = vertical displacement v, in pixels at its own resolution.

struct ImagePyramid {
  std::vector<Tensor> levels;  // fine -> coarse; level 0 is the input
  int pad_bottom = 0;
  int pad_right = 0;
};

// Each level halves extents via 2x2 average pooling; inputs whose extents
// are not divisible by 2^(levels-1) are edge-padded and the padding is
// recorded for cropping.
ImagePyramid build_image_pyramid(const Tensor& frame, int levels);

// Bilinear x2 spatial upsample with displacement magnitudes doubled, so
// values stay in pixels of the finer grid.
Tensor upsample_flow(const Tensor& f);
Value upsample_flow(Tape& t, Value f);

// Middlebury-style color wheel rendering of a flow field, RGB in [0,1].
Tensor flow_to_color(const Tensor& f);

// Coarse-to-fine pyramidal estimator. Every level owns a 5-layer conv head
// (channels 32,64,32,16,2, 7x7 kernels, leaky-relu between) over 8 input
// channels: warped reference (3), current frame (3), upsampled flow (2).
class FlowEstimator {
 public:
  static constexpr int kDefaultLevels = 4;

  FlowEstimator(nn::Init& init, int levels = kDefaultLevels);

  int levels() const { return int(levels_.size()); }
  void visit_params(const std::string& prefix, const nn::ParamVisitor& fn);
  void set_frozen(bool frozen);

  Tensor estimate(const Tensor& current, const Tensor& reference);
  Value estimate(Tape& t, Value current, Value reference);

  template <class Ctx>
  typename Ctx::V run(Ctx& ctx, typename Ctx::V current, typename Ctx::V reference) {
    using V = typename Ctx::V;
    const Shape in_shape = ctx.shape(current);
    contract(ctx.shape(reference) == in_shape,
             "estimate_flow: current and reference extents differ");
    const int mult = 1 << (levels() - 1);
    const int ph = (in_shape.h + mult - 1) / mult * mult;
    const int pw = (in_shape.w + mult - 1) / mult * mult;
    contract(ph / mult >= 8 && pw / mult >= 8,
             "estimate_flow: coarsest level would be smaller than 8x8 for " +
                 in_shape.str());
    V cur = ctx.pad(current, 0, ph - in_shape.h, 0, pw - in_shape.w);
    V ref = ctx.pad(reference, 0, ph - in_shape.h, 0, pw - in_shape.w);

    std::vector<V> cur_pyr{cur}, ref_pyr{ref};
    for (int l = 1; l < levels(); ++l) {
      cur_pyr.push_back(ctx.avg_pool(cur_pyr.back()));
      ref_pyr.push_back(ctx.avg_pool(ref_pyr.back()));
    }

    V flow = ctx.zeros({in_shape.n, 2, ph / mult, pw / mult});
    for (int l = levels() - 1; l >= 0; --l) {
      if (l != levels() - 1) {
        const Shape fs = ctx.shape(flow);
        flow = ctx.scale(ctx.resize_bilinear(flow, fs.h * 2, fs.w * 2), 2.0f);
      }
      V warped = ctx.warp(ref_pyr[l], flow);
      V input = ctx.concat({warped, cur_pyr[l], flow});
      Level& lvl = levels_[l];
      V h = ctx.lrelu(nn::apply_conv(ctx, lvl.c1, input));
      h = ctx.lrelu(nn::apply_conv(ctx, lvl.c2, h));
      h = ctx.lrelu(nn::apply_conv(ctx, lvl.c3, h));
      h = ctx.lrelu(nn::apply_conv(ctx, lvl.c4, h));
      V delta = nn::apply_conv(ctx, lvl.c5, h);
      flow = ctx.add(flow, delta);
    }
    if (ph != in_shape.h || pw != in_shape.w) {
      flow = ctx.crop(flow, 0, 0, in_shape.h, in_shape.w);
    }
    return flow;
  }

 private:
  struct Level {
    nn::ConvLayer c1, c2, c3, c4, c5;
  };
  std::vector<Level> levels_;
};

}  // namespace nvc::flow

#endif
