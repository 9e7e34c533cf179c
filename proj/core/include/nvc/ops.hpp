#ifndef NVC_OPS_HPP
#define NVC_OPS_HPP

#include <vector>

#include "nvc/autodiff.hpp"
#include "nvc/kernels.hpp"

// Differentiable ops over the tape. Forward computation is delegated to
// nvc::kernels so the tape path and the plain-tensor inference path are
// bit-identical.
namespace nvc::ad {

inline constexpr float kLeakySlope = 0.1f;

Value conv2d(Tape& t, Value x, Value w, Value bias, int stride, int pad);
// Transposed convolution; w has shape (Cin, Cout, k, k) and the output
// spatial extents are (H - 1) * stride - 2 * pad + k.
Value tconv2d(Tape& t, Value x, Value w, Value bias, int stride, int pad);

Value leaky_relu(Tape& t, Value x, float slope = kLeakySlope);
Value avg_pool2(Tape& t, Value x);
Value warp_bilinear(Tape& t, Value img, Value flow);
Value resize(Tape& t, Value x, int out_h, int out_w, kernels::ResizeMode mode);
Value pad_edge(Tape& t, Value x, int top, int bottom, int left, int right);
Value crop(Tape& t, Value x, int y0, int x0, int h, int w);
Value concat_channels(Tape& t, const std::vector<Value>& xs);
Value slice_channels(Tape& t, Value x, int c0, int c1);

Value add(Tape& t, Value a, Value b);
Value sub(Tape& t, Value a, Value b);
Value mul(Tape& t, Value a, Value b);
Value div(Tape& t, Value a, Value b);
Value scale(Tape& t, Value x, float s);
Value add_const(Tape& t, Value x, float s);

Value sum(Tape& t, Value x);                       // -> (1,1,1,1)
Value mean_hw(Tape& t, Value x);                   // -> (N,C,1,1)
Value mean_all(Tape& t, Value x);                  // -> (1,1,1,1)
// Replicates a (1,C,1,1) tensor over (n,C,h,w); gradient sums back.
Value broadcast_chw(Tape& t, Value x, int n, int h, int w);

Value pow_const(Tape& t, Value x, float p);        // requires x > 0
Value log_(Tape& t, Value x);                      // requires x > 0
Value exp_(Tape& t, Value x);
Value softplus(Tape& t, Value x);
Value clamp_min(Tape& t, Value x, float lo);       // grad passes where x > lo
// Straight-through ops: exact forward, identity gradient.
Value round_ste(Tape& t, Value x);
Value clamp01_ste(Tape& t, Value x);

Value sep_blur_valid(Tape& t, Value x, std::vector<float> taps);

// Per-element code length -log2(max(mass, 2^-16)) of the value under a
// discretized Gaussian, where mass integrates the density over a unit bin
// centered on the value. Differentiable in the value, mu, and sigma.
Value gaussian_bits(Tape& t, Value y, Value mu, Value sigma);

}  // namespace nvc::ad

#endif
