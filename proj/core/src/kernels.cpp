#include "nvc/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace nvc::kernels {

namespace {

int floor_div(int a, int b) {
  int q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

int ceil_div_int(int a, int b) {
  return -floor_div(-a, b);
}

}  // namespace

int conv_out_extent(int extent, int k, int stride, int pad) {
  return (extent + 2 * pad - k) / stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const std::vector<float>& bias,
              int stride, int pad) {
  const Shape xs = x.shape(), ws = w.shape();
  contract(stride >= 1, "conv2d: stride must be >= 1");
  contract(pad >= 0, "conv2d: padding must be >= 0");
  contract(xs.c == ws.c, "conv2d: input channels " + xs.str() +
                             " do not match kernel " + ws.str());
  contract(bias.empty() || int(bias.size()) == ws.n,
           "conv2d: bias length does not match output channels");
  const int oh = conv_out_extent(xs.h, ws.h, stride, pad);
  const int ow = conv_out_extent(xs.w, ws.w, stride, pad);
  contract(oh >= 1 && ow >= 1, "conv2d: kernel " + ws.str() +
                                   " larger than padded input " + xs.str());

  Tensor y({xs.n, ws.n, oh, ow});
  const int kh = ws.h, kw = ws.w;
  for (int n = 0; n < xs.n; ++n) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < ws.n; ++co) {
      float* yp = y.plane(n, co);
      if (!bias.empty()) {
        std::fill(yp, yp + int64_t(oh) * ow, bias[co]);
      }
      for (int ci = 0; ci < xs.c; ++ci) {
        const float* xp = x.plane(n, ci);
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            const float wv = w.at(co, ci, ky, kx);
            if (wv == 0.0f) continue;
            // Output range with in-bounds sample positions.
            const int oy0 = std::max(0, ceil_div_int(pad - ky, stride));
            const int oy1 = std::min(oh, floor_div(xs.h - 1 - ky + pad, stride) + 1);
            const int ox0 = std::max(0, ceil_div_int(pad - kx, stride));
            const int ox1 = std::min(ow, floor_div(xs.w - 1 - kx + pad, stride) + 1);
            for (int oy = oy0; oy < oy1; ++oy) {
              const int iy = oy * stride - pad + ky;
              const float* xrow = xp + int64_t(iy) * xs.w - pad + kx;
              float* yrow = yp + int64_t(oy) * ow;
              if (stride == 1) {
                for (int ox = ox0; ox < ox1; ++ox) yrow[ox] += wv * xrow[ox];
              } else {
                for (int ox = ox0; ox < ox1; ++ox)
                  yrow[ox] += wv * xrow[int64_t(ox) * stride];
              }
            }
          }
        }
      }
    }
  }
  return y;
}

Tensor conv2d_dx(const Tensor& dy, const Tensor& w, int stride, int pad,
                 int in_h, int in_w) {
  const Shape ys = dy.shape(), ws = w.shape();
  contract(ys.c == ws.n, "conv2d_dx: channels " + ys.str() +
                             " do not match kernel " + ws.str());
  Tensor dx({ys.n, ws.c, in_h, in_w});
  const int kh = ws.h, kw = ws.w, oh = ys.h, ow = ys.w;
  for (int n = 0; n < ys.n; ++n) {
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < ws.c; ++ci) {
      float* dxp = dx.plane(n, ci);
      for (int co = 0; co < ws.n; ++co) {
        const float* dyp = dy.plane(n, co);
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            const float wv = w.at(co, ci, ky, kx);
            if (wv == 0.0f) continue;
            const int oy0 = std::max(0, ceil_div_int(pad - ky, stride));
            const int oy1 = std::min(oh, floor_div(in_h - 1 - ky + pad, stride) + 1);
            const int ox0 = std::max(0, ceil_div_int(pad - kx, stride));
            const int ox1 = std::min(ow, floor_div(in_w - 1 - kx + pad, stride) + 1);
            for (int oy = oy0; oy < oy1; ++oy) {
              const int iy = oy * stride - pad + ky;
              float* dxrow = dxp + int64_t(iy) * in_w - pad + kx;
              const float* dyrow = dyp + int64_t(oy) * ow;
              if (stride == 1) {
                for (int ox = ox0; ox < ox1; ++ox) dxrow[ox] += wv * dyrow[ox];
              } else {
                for (int ox = ox0; ox < ox1; ++ox)
                  dxrow[int64_t(ox) * stride] += wv * dyrow[ox];
              }
            }
          }
        }
      }
    }
  }
  return dx;
}

Tensor tconv2d(const Tensor& x, const Tensor& w, const std::vector<float>& bias,
               int stride, int pad) {
  const Shape xs = x.shape(), ws = w.shape();
  contract(xs.c == ws.n, "tconv2d: input channels " + xs.str() +
                             " do not match kernel " + ws.str());
  contract(bias.empty() || int(bias.size()) == ws.c,
           "tconv2d: bias length does not match output channels");
  const int oh = (xs.h - 1) * stride - 2 * pad + ws.h;
  const int ow = (xs.w - 1) * stride - 2 * pad + ws.w;
  contract(oh >= 1 && ow >= 1, "tconv2d: degenerate output extents");
  Tensor y = conv2d_dx(x, w, stride, pad, oh, ow);
  if (!bias.empty()) {
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < ws.c; ++c) {
        float* p = y.plane(n, c);
        const float b = bias[c];
        for (int64_t i = 0; i < int64_t(oh) * ow; ++i) p[i] += b;
      }
    }
  }
  return y;
}

namespace {

// Dot product over a row pair with 8 fixed accumulator lanes; vectorizes
// without float reassociation and keeps a fixed summation order.
float lane_dot(const float* a, const float* b, int count) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  int i = 0;
  for (; i + 8 <= count; i += 8) {
    for (int l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  }
  for (; i < count; ++i) acc[i % 8] += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

float strided_dot(const float* a, int stride_a, const float* b, int count) {
  float acc[4] = {0, 0, 0, 0};
  int i = 0;
  for (; i + 4 <= count; i += 4) {
    for (int l = 0; l < 4; ++l) acc[l] += a[int64_t(i + l) * stride_a] * b[i + l];
  }
  for (; i < count; ++i) acc[i % 4] += a[int64_t(i) * stride_a] * b[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

}  // namespace

Tensor conv2d_dw(const Tensor& x, const Tensor& dy, int stride, int pad,
                 Shape w_shape) {
  const Shape xs = x.shape(), ys = dy.shape();
  contract(w_shape.n == ys.c && w_shape.c == xs.c,
           "conv2d_dw: weight shape inconsistent with activations");
  Tensor dw(w_shape);
  const int kh = w_shape.h, kw = w_shape.w, oh = ys.h, ow = ys.w;
  for (int n = 0; n < xs.n; ++n) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < ys.c; ++co) {
      const float* dyp = dy.plane(n, co);
      for (int ci = 0; ci < xs.c; ++ci) {
        const float* xp = x.plane(n, ci);
        for (int ky = 0; ky < kh; ++ky) {
          for (int kx = 0; kx < kw; ++kx) {
            const int oy0 = std::max(0, ceil_div_int(pad - ky, stride));
            const int oy1 = std::min(oh, floor_div(xs.h - 1 - ky + pad, stride) + 1);
            const int ox0 = std::max(0, ceil_div_int(pad - kx, stride));
            const int ox1 = std::min(ow, floor_div(xs.w - 1 - kx + pad, stride) + 1);
            float acc = 0.0f;
            for (int oy = oy0; oy < oy1; ++oy) {
              const int iy = oy * stride - pad + ky;
              const float* xrow = xp + int64_t(iy) * xs.w - pad + kx;
              const float* dyrow = dyp + int64_t(oy) * ow;
              if (stride == 1) {
                acc += lane_dot(xrow + ox0, dyrow + ox0, ox1 - ox0);
              } else {
                acc += strided_dot(xrow + int64_t(ox0) * stride, stride,
                                   dyrow + ox0, ox1 - ox0);
              }
            }
            dw.at(co, ci, ky, kx) += acc;
          }
        }
      }
    }
  }
  return dw;
}

std::vector<float> conv2d_db(const Tensor& dy) {
  const Shape ys = dy.shape();
  std::vector<float> db(ys.c, 0.0f);
  for (int n = 0; n < ys.n; ++n) {
    for (int c = 0; c < ys.c; ++c) {
      const float* p = dy.plane(n, c);
      double acc = 0.0;
      for (int64_t i = 0; i < int64_t(ys.h) * ys.w; ++i) acc += p[i];
      db[c] += float(acc);
    }
  }
  return db;
}

Tensor avg_pool2(const Tensor& x) {
  const Shape s = x.shape();
  const int oh = s.h / 2, ow = s.w / 2;
  contract(oh >= 1 && ow >= 1, "avg_pool2: input " + s.str() + " too small");
  Tensor y({s.n, s.c, oh, ow});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* xp = x.plane(n, c);
      float* yp = y.plane(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        const float* r0 = xp + int64_t(2 * oy) * s.w;
        const float* r1 = r0 + s.w;
        float* yrow = yp + int64_t(oy) * ow;
        for (int ox = 0; ox < ow; ++ox) {
          yrow[ox] = 0.25f * ((r0[2 * ox] + r0[2 * ox + 1]) +
                              (r1[2 * ox] + r1[2 * ox + 1]));
        }
      }
    }
  }
  return y;
}

Tensor avg_pool2_adj(const Tensor& dy, int in_h, int in_w) {
  const Shape s = dy.shape();
  Tensor dx({s.n, s.c, in_h, in_w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* dyp = dy.plane(n, c);
      float* dxp = dx.plane(n, c);
      for (int oy = 0; oy < s.h; ++oy) {
        float* r0 = dxp + int64_t(2 * oy) * in_w;
        float* r1 = r0 + in_w;
        const float* dyrow = dyp + int64_t(oy) * s.w;
        for (int ox = 0; ox < s.w; ++ox) {
          const float g = 0.25f * dyrow[ox];
          r0[2 * ox] += g;
          r0[2 * ox + 1] += g;
          r1[2 * ox] += g;
          r1[2 * ox + 1] += g;
        }
      }
    }
  }
  return dx;
}

Tensor leaky_relu(const Tensor& x, float slope) {
  Tensor y(x.shape());
  const float* xp = x.data();
  float* yp = y.data();
  const int64_t count = x.numel();
  for (int64_t i = 0; i < count; ++i) {
    yp[i] = xp[i] >= 0.0f ? xp[i] : slope * xp[i];
  }
  return y;
}

Tensor leaky_relu_adj(const Tensor& x, const Tensor& dy, float slope) {
  Tensor dx(x.shape());
  const float* xp = x.data();
  const float* dyp = dy.data();
  float* dxp = dx.data();
  const int64_t count = x.numel();
  for (int64_t i = 0; i < count; ++i) {
    dxp[i] = xp[i] >= 0.0f ? dyp[i] : slope * dyp[i];
  }
  return dx;
}

namespace {

struct Taps {
  std::vector<int> idx;     // flattened source indices, `width` per output
  std::vector<float> wgt;   // matching weights
  int width = 0;
};

float cubic_catmull_rom(float t) {
  t = std::fabs(t);
  if (t <= 1.0f) return (1.5f * t - 2.5f) * t * t + 1.0f;
  if (t < 2.0f) return ((-0.5f * t + 2.5f) * t - 4.0f) * t + 2.0f;
  return 0.0f;
}

Taps make_taps(int in_extent, int out_extent, ResizeMode mode) {
  Taps taps;
  taps.width = mode == ResizeMode::kBilinear ? 2 : 4;
  taps.idx.resize(size_t(out_extent) * taps.width);
  taps.wgt.resize(size_t(out_extent) * taps.width);
  const double scale = double(in_extent) / out_extent;
  for (int o = 0; o < out_extent; ++o) {
    const double src = (o + 0.5) * scale - 0.5;
    int* idx = taps.idx.data() + size_t(o) * taps.width;
    float* wgt = taps.wgt.data() + size_t(o) * taps.width;
    if (mode == ResizeMode::kBilinear) {
      const int i0 = int(std::floor(src));
      const float t = float(src - i0);
      idx[0] = std::clamp(i0, 0, in_extent - 1);
      idx[1] = std::clamp(i0 + 1, 0, in_extent - 1);
      wgt[0] = 1.0f - t;
      wgt[1] = t;
    } else {
      const int base = int(std::floor(src));
      float sum = 0.0f;
      for (int j = 0; j < 4; ++j) {
        const int i = base - 1 + j;
        const float w = cubic_catmull_rom(float(src - i));
        idx[j] = std::clamp(i, 0, in_extent - 1);
        wgt[j] = w;
        sum += w;
      }
      for (int j = 0; j < 4; ++j) wgt[j] /= sum;
    }
  }
  return taps;
}

}  // namespace

Tensor resize(const Tensor& x, int out_h, int out_w, ResizeMode mode) {
  const Shape s = x.shape();
  contract(out_h >= 1 && out_w >= 1, "resize: output extents must be >= 1");
  if (out_h == s.h && out_w == s.w) return x;
  const Taps tx = make_taps(s.w, out_w, mode);
  const Taps ty = make_taps(s.h, out_h, mode);
  Tensor y({s.n, s.c, out_h, out_w});
  std::vector<float> tmp(size_t(s.h) * out_w);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* xp = x.plane(n, c);
      // Horizontal pass.
      for (int iy = 0; iy < s.h; ++iy) {
        const float* xrow = xp + int64_t(iy) * s.w;
        float* trow = tmp.data() + size_t(iy) * out_w;
        for (int ox = 0; ox < out_w; ++ox) {
          const int* idx = tx.idx.data() + size_t(ox) * tx.width;
          const float* wgt = tx.wgt.data() + size_t(ox) * tx.width;
          float acc = 0.0f;
          for (int j = 0; j < tx.width; ++j) acc += wgt[j] * xrow[idx[j]];
          trow[ox] = acc;
        }
      }
      // Vertical pass.
      float* yp = y.plane(n, c);
      for (int oy = 0; oy < out_h; ++oy) {
        const int* idx = ty.idx.data() + size_t(oy) * ty.width;
        const float* wgt = ty.wgt.data() + size_t(oy) * ty.width;
        float* yrow = yp + int64_t(oy) * out_w;
        std::fill(yrow, yrow + out_w, 0.0f);
        for (int j = 0; j < ty.width; ++j) {
          const float* trow = tmp.data() + size_t(idx[j]) * out_w;
          const float w = wgt[j];
          for (int ox = 0; ox < out_w; ++ox) yrow[ox] += w * trow[ox];
        }
      }
    }
  }
  return y;
}

Tensor resize_adj(const Tensor& dy, int in_h, int in_w, ResizeMode mode) {
  const Shape s = dy.shape();
  if (in_h == s.h && in_w == s.w) return dy;
  const Taps tx = make_taps(in_w, s.w, mode);
  const Taps ty = make_taps(in_h, s.h, mode);
  Tensor dx({s.n, s.c, in_h, in_w});
  std::vector<float> tmp(size_t(in_h) * s.w);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      // Vertical adjoint: scatter output rows into source rows.
      std::fill(tmp.begin(), tmp.end(), 0.0f);
      const float* dyp = dy.plane(n, c);
      for (int oy = 0; oy < s.h; ++oy) {
        const int* idx = ty.idx.data() + size_t(oy) * ty.width;
        const float* wgt = ty.wgt.data() + size_t(oy) * ty.width;
        const float* dyrow = dyp + int64_t(oy) * s.w;
        for (int j = 0; j < ty.width; ++j) {
          float* trow = tmp.data() + size_t(idx[j]) * s.w;
          const float w = wgt[j];
          for (int ox = 0; ox < s.w; ++ox) trow[ox] += w * dyrow[ox];
        }
      }
      // Horizontal adjoint.
      float* dxp = dx.plane(n, c);
      for (int iy = 0; iy < in_h; ++iy) {
        const float* trow = tmp.data() + size_t(iy) * s.w;
        float* dxrow = dxp + int64_t(iy) * in_w;
        for (int ox = 0; ox < s.w; ++ox) {
          const int* idx = tx.idx.data() + size_t(ox) * tx.width;
          const float* wgt = tx.wgt.data() + size_t(ox) * tx.width;
          for (int j = 0; j < tx.width; ++j) dxrow[idx[j]] += wgt[j] * trow[ox];
        }
      }
    }
  }
  return dx;
}

Tensor warp_bilinear(const Tensor& img, const Tensor& flow) {
  const Shape is = img.shape(), fs = flow.shape();
  contract(fs.c == 2, "warp_bilinear: flow must have 2 channels, got " + fs.str());
  contract(fs.n == is.n && fs.h == is.h && fs.w == is.w,
           "warp_bilinear: flow extents " + fs.str() +
               " do not match image " + is.str());
  Tensor out(is);
  for (int n = 0; n < is.n; ++n) {
    const float* u = flow.plane(n, 0);
    const float* v = flow.plane(n, 1);
    for (int c = 0; c < is.c; ++c) {
      const float* src = img.plane(n, c);
      float* dst = out.plane(n, c);
      for (int y = 0; y < is.h; ++y) {
        for (int x = 0; x < is.w; ++x) {
          const int64_t i = int64_t(y) * is.w + x;
          const float sx = std::clamp(x + u[i], 0.0f, float(is.w - 1));
          const float sy = std::clamp(y + v[i], 0.0f, float(is.h - 1));
          const int x0 = std::min(int(sx), is.w - 1);
          const int y0 = std::min(int(sy), is.h - 1);
          const int x1 = std::min(x0 + 1, is.w - 1);
          const int y1 = std::min(y0 + 1, is.h - 1);
          const float tx = sx - x0, ty = sy - y0;
          const float a = src[int64_t(y0) * is.w + x0];
          const float b = src[int64_t(y0) * is.w + x1];
          const float c0 = src[int64_t(y1) * is.w + x0];
          const float d = src[int64_t(y1) * is.w + x1];
          const float top = a + tx * (b - a);
          const float bot = c0 + tx * (d - c0);
          dst[i] = top + ty * (bot - top);
        }
      }
    }
  }
  return out;
}

void warp_bilinear_grad(const Tensor& img, const Tensor& flow, const Tensor& dy,
                        Tensor* dimg, Tensor* dflow) {
  const Shape is = img.shape();
  for (int n = 0; n < is.n; ++n) {
    const float* u = flow.plane(n, 0);
    const float* v = flow.plane(n, 1);
    float* du = dflow ? dflow->plane(n, 0) : nullptr;
    float* dv = dflow ? dflow->plane(n, 1) : nullptr;
    for (int c = 0; c < is.c; ++c) {
      const float* src = img.plane(n, c);
      const float* g = dy.plane(n, c);
      float* dsrc = dimg ? dimg->plane(n, c) : nullptr;
      for (int y = 0; y < is.h; ++y) {
        for (int x = 0; x < is.w; ++x) {
          const int64_t i = int64_t(y) * is.w + x;
          const float rx = x + u[i], ry = y + v[i];
          const float sx = std::clamp(rx, 0.0f, float(is.w - 1));
          const float sy = std::clamp(ry, 0.0f, float(is.h - 1));
          const int x0 = std::min(int(sx), is.w - 1);
          const int y0 = std::min(int(sy), is.h - 1);
          const int x1 = std::min(x0 + 1, is.w - 1);
          const int y1 = std::min(y0 + 1, is.h - 1);
          const float tx = sx - x0, ty = sy - y0;
          const float a = src[int64_t(y0) * is.w + x0];
          const float b = src[int64_t(y0) * is.w + x1];
          const float c0 = src[int64_t(y1) * is.w + x0];
          const float d = src[int64_t(y1) * is.w + x1];
          const float go = g[i];
          if (dsrc) {
            dsrc[int64_t(y0) * is.w + x0] += go * (1 - tx) * (1 - ty);
            dsrc[int64_t(y0) * is.w + x1] += go * tx * (1 - ty);
            dsrc[int64_t(y1) * is.w + x0] += go * (1 - tx) * ty;
            dsrc[int64_t(y1) * is.w + x1] += go * tx * ty;
          }
          if (du) {
            // Zero gradient where the sample position is clamped.
            const bool in_x = rx > 0.0f && rx < float(is.w - 1);
            const bool in_y = ry > 0.0f && ry < float(is.h - 1);
            if (in_x) {
              const float dsdx = (1 - ty) * (b - a) + ty * (d - c0);
              du[i] += go * dsdx;
            }
            if (in_y) {
              const float dsdy = (1 - tx) * (c0 - a) + tx * (d - b);
              dv[i] += go * dsdy;
            }
          }
        }
      }
    }
  }
}

Tensor sep_blur_valid(const Tensor& x, const std::vector<float>& taps) {
  const Shape s = x.shape();
  const int t = int(taps.size());
  contract(t % 2 == 1, "sep_blur_valid: tap count must be odd");
  const int oh = s.h - t + 1, ow = s.w - t + 1;
  contract(oh >= 1 && ow >= 1, "sep_blur_valid: input " + s.str() + " too small");
  Tensor y({s.n, s.c, oh, ow});
  std::vector<float> tmp(size_t(s.h) * ow);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* xp = x.plane(n, c);
      for (int iy = 0; iy < s.h; ++iy) {
        const float* xrow = xp + int64_t(iy) * s.w;
        float* trow = tmp.data() + size_t(iy) * ow;
        std::fill(trow, trow + ow, 0.0f);
        for (int j = 0; j < t; ++j) {
          const float w = taps[j];
          for (int ox = 0; ox < ow; ++ox) trow[ox] += w * xrow[ox + j];
        }
      }
      float* yp = y.plane(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        float* yrow = yp + int64_t(oy) * ow;
        std::fill(yrow, yrow + ow, 0.0f);
        for (int j = 0; j < t; ++j) {
          const float* trow = tmp.data() + size_t(oy + j) * ow;
          const float w = taps[j];
          for (int ox = 0; ox < ow; ++ox) yrow[ox] += w * trow[ox];
        }
      }
    }
  }
  return y;
}

Tensor sep_blur_valid_adj(const Tensor& dy, const std::vector<float>& taps,
                          int in_h, int in_w) {
  const Shape s = dy.shape();
  const int t = int(taps.size());
  const int ow = s.w;
  Tensor dx({s.n, s.c, in_h, in_w});
  std::vector<float> tmp(size_t(in_h) * ow);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      std::fill(tmp.begin(), tmp.end(), 0.0f);
      const float* dyp = dy.plane(n, c);
      for (int oy = 0; oy < s.h; ++oy) {
        const float* dyrow = dyp + int64_t(oy) * ow;
        for (int j = 0; j < t; ++j) {
          float* trow = tmp.data() + size_t(oy + j) * ow;
          const float w = taps[j];
          for (int ox = 0; ox < ow; ++ox) trow[ox] += w * dyrow[ox];
        }
      }
      float* dxp = dx.plane(n, c);
      for (int iy = 0; iy < in_h; ++iy) {
        const float* trow = tmp.data() + size_t(iy) * ow;
        float* dxrow = dxp + int64_t(iy) * in_w;
        for (int j = 0; j < t; ++j) {
          const float w = taps[j];
          for (int ox = 0; ox < ow; ++ox) dxrow[ox + j] += w * trow[ox];
        }
      }
    }
  }
  return dx;
}

Tensor pad_edge(const Tensor& x, int top, int bottom, int left, int right) {
  const Shape s = x.shape();
  if (top == 0 && bottom == 0 && left == 0 && right == 0) return x;
  Tensor y({s.n, s.c, s.h + top + bottom, s.w + left + right});
  const int oh = y.shape().h, ow = y.shape().w;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* xp = x.plane(n, c);
      float* yp = y.plane(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        const int iy = std::clamp(oy - top, 0, s.h - 1);
        const float* xrow = xp + int64_t(iy) * s.w;
        float* yrow = yp + int64_t(oy) * ow;
        for (int ox = 0; ox < ow; ++ox) {
          yrow[ox] = xrow[std::clamp(ox - left, 0, s.w - 1)];
        }
      }
    }
  }
  return y;
}

Tensor pad_edge_adj(const Tensor& dy, int top, int bottom, int left, int right) {
  const Shape s = dy.shape();
  if (top == 0 && bottom == 0 && left == 0 && right == 0) return dy;
  const int ih = s.h - top - bottom, iw = s.w - left - right;
  Tensor dx({s.n, s.c, ih, iw});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* dyp = dy.plane(n, c);
      float* dxp = dx.plane(n, c);
      for (int oy = 0; oy < s.h; ++oy) {
        const int iy = std::clamp(oy - top, 0, ih - 1);
        const float* dyrow = dyp + int64_t(oy) * s.w;
        float* dxrow = dxp + int64_t(iy) * iw;
        for (int ox = 0; ox < s.w; ++ox) {
          dxrow[std::clamp(ox - left, 0, iw - 1)] += dyrow[ox];
        }
      }
    }
  }
  return dx;
}

Tensor crop(const Tensor& x, int y0, int x0, int h, int w) {
  const Shape s = x.shape();
  contract(y0 >= 0 && x0 >= 0 && y0 + h <= s.h && x0 + w <= s.w,
           "crop: window exceeds input " + s.str());
  if (y0 == 0 && x0 == 0 && h == s.h && w == s.w) return x;
  Tensor y({s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* xp = x.plane(n, c);
      float* yp = y.plane(n, c);
      for (int oy = 0; oy < h; ++oy) {
        const float* src = xp + int64_t(y0 + oy) * s.w + x0;
        std::copy(src, src + w, yp + int64_t(oy) * w);
      }
    }
  }
  return y;
}

Tensor crop_adj(const Tensor& dy, int y0, int x0, int in_h, int in_w) {
  const Shape s = dy.shape();
  if (y0 == 0 && x0 == 0 && in_h == s.h && in_w == s.w) return dy;
  Tensor dx({s.n, s.c, in_h, in_w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* dyp = dy.plane(n, c);
      float* dxp = dx.plane(n, c);
      for (int oy = 0; oy < s.h; ++oy) {
        const float* src = dyp + int64_t(oy) * s.w;
        std::copy(src, src + s.w, dxp + int64_t(y0 + oy) * in_w + x0);
      }
    }
  }
  return dx;
}

Tensor concat_channels(const std::vector<const Tensor*>& xs) {
  contract(!xs.empty(), "concat_channels: empty input list");
  const Shape s0 = xs[0]->shape();
  int total_c = 0;
  for (const Tensor* x : xs) {
    const Shape s = x->shape();
    contract(s.n == s0.n && s.h == s0.h && s.w == s0.w,
             "concat_channels: extents mismatch " + s.str() + " vs " + s0.str());
    total_c += s.c;
  }
  Tensor y({s0.n, total_c, s0.h, s0.w});
  for (int n = 0; n < s0.n; ++n) {
    int co = 0;
    for (const Tensor* x : xs) {
      for (int c = 0; c < x->shape().c; ++c, ++co) {
        const float* src = x->plane(n, c);
        std::copy(src, src + int64_t(s0.h) * s0.w, y.plane(n, co));
      }
    }
  }
  return y;
}

Tensor slice_channels(const Tensor& x, int c0, int c1) {
  const Shape s = x.shape();
  contract(0 <= c0 && c0 < c1 && c1 <= s.c, "slice_channels: bad range");
  Tensor y({s.n, c1 - c0, s.h, s.w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = c0; c < c1; ++c) {
      const float* src = x.plane(n, c);
      std::copy(src, src + int64_t(s.h) * s.w, y.plane(n, c - c0));
    }
  }
  return y;
}

}  // namespace nvc::kernels
