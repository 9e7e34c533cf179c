#ifndef NVC_KERNELS_HPP
#define NVC_KERNELS_HPP

#include <vector>

#include "nvc/tensor.hpp"

// Pure tensor kernels. Every kernel is deterministic: repeated calls on
// identical inputs produce bit-identical outputs regardless of thread count
// (parallel loops own disjoint output slices; accumulation orders are fixed).
namespace nvc::kernels {

enum class ResizeMode { kBilinear, kBicubic };

// floor((extent + 2*pad - k) / stride) + 1
int conv_out_extent(int extent, int k, int stride, int pad);

// x: (N,Ci,H,W), w: (Co,Ci,kh,kw), bias: Co entries (may be empty).
Tensor conv2d(const Tensor& x, const Tensor& w, const std::vector<float>& bias,
              int stride, int pad);
// Gradient of conv2d w.r.t. its input; also the forward map of the
// transposed convolution. dy: (N,Co,oh,ow) -> (N,Ci,in_h,in_w).
Tensor conv2d_dx(const Tensor& dy, const Tensor& w, int stride, int pad,
                 int in_h, int in_w);
// Transposed convolution with w: (Cin, Cout, k, k); output extents are
// (extent - 1) * stride - 2 * pad + k.
Tensor tconv2d(const Tensor& x, const Tensor& w, const std::vector<float>& bias,
               int stride, int pad);
Tensor conv2d_dw(const Tensor& x, const Tensor& dy, int stride, int pad,
                 Shape w_shape);
std::vector<float> conv2d_db(const Tensor& dy);

// 2x2 average pooling, stride 2; trailing odd row/column is dropped.
Tensor avg_pool2(const Tensor& x);
Tensor avg_pool2_adj(const Tensor& dy, int in_h, int in_w);

Tensor leaky_relu(const Tensor& x, float slope);
Tensor leaky_relu_adj(const Tensor& x, const Tensor& dy, float slope);

// Separable resize; bicubic uses Catmull-Rom (a = -0.5) with edge clamping
// and per-pixel tap normalization, so constants are preserved exactly.
Tensor resize(const Tensor& x, int out_h, int out_w, ResizeMode mode);
Tensor resize_adj(const Tensor& dy, int in_h, int in_w, ResizeMode mode);

// out(x, y) = img(x + u(x,y), y + v(x,y)), bilinear, edge-clamped.
// flow: (N,2,H,W) with channel 0 = u (horizontal), channel 1 = v (vertical).
Tensor warp_bilinear(const Tensor& img, const Tensor& flow);
void warp_bilinear_grad(const Tensor& img, const Tensor& flow, const Tensor& dy,
                        Tensor* dimg, Tensor* dflow);

// Separable valid-mode blur with a symmetric odd-length tap vector.
// Output extents are (H - taps + 1, W - taps + 1).
Tensor sep_blur_valid(const Tensor& x, const std::vector<float>& taps);
Tensor sep_blur_valid_adj(const Tensor& dy, const std::vector<float>& taps,
                          int in_h, int in_w);

// Replicate-edge padding and its adjoint (border cells accumulate).
Tensor pad_edge(const Tensor& x, int top, int bottom, int left, int right);
Tensor pad_edge_adj(const Tensor& dy, int top, int bottom, int left, int right);

// Crop the top-left (h, w) window starting at (y0, x0).
Tensor crop(const Tensor& x, int y0, int x0, int h, int w);
Tensor crop_adj(const Tensor& dy, int y0, int x0, int in_h, int in_w);

Tensor concat_channels(const std::vector<const Tensor*>& xs);
Tensor slice_channels(const Tensor& x, int c0, int c1);

}  // namespace nvc::kernels

#endif
