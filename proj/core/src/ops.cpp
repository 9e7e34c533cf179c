#include "nvc/ops.hpp"

#include <cmath>

#include "nvc/entropy.hpp"

namespace nvc::ad {

namespace {

std::vector<float> bias_vec(const Tensor& b) {
  return b.vec();
}

Tensor map_unary(const Tensor& x, float (*f)(float)) {
  Tensor y(x.shape());
  const float* xp = x.data();
  float* yp = y.data();
  const int64_t count = x.numel();
  for (int64_t i = 0; i < count; ++i) yp[i] = f(xp[i]);
  return y;
}

}  // namespace

Value conv2d(Tape& t, Value x, Value w, Value bias, int stride, int pad) {
  const Tensor& xt = t.value(x);
  const Tensor& wt = t.value(w);
  std::vector<float> bv;
  if (bias.valid()) {
    bv = bias_vec(t.value(bias));
  }
  Tensor out = kernels::conv2d(xt, wt, bv, stride, pad);
  const int in_h = xt.shape().h, in_w = xt.shape().w;
  const Shape wshape = wt.shape();
  return t.emit("conv2d", std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, kernels::conv2d_dx(g, tp.value(w), stride, pad, in_h, in_w));
    tp.accumulate(w, kernels::conv2d_dw(tp.value(x), g, stride, pad, wshape));
    if (bias.valid()) {
      tp.accumulate(bias, Tensor({1, wshape.n, 1, 1}, kernels::conv2d_db(g)));
    }
  });
}

Value tconv2d(Tape& t, Value x, Value w, Value bias, int stride, int pad) {
  const Tensor& xt = t.value(x);
  const Tensor& wt = t.value(w);
  const Shape ws = wt.shape();
  contract(xt.shape().c == ws.n, "tconv2d: input channels " +
                                     xt.shape().str() + " do not match kernel " +
                                     ws.str());
  const int oh = (xt.shape().h - 1) * stride - 2 * pad + ws.h;
  const int ow = (xt.shape().w - 1) * stride - 2 * pad + ws.w;
  contract(oh >= 1 && ow >= 1, "tconv2d: degenerate output extents");
  Tensor out = kernels::conv2d_dx(xt, wt, stride, pad, oh, ow);
  if (bias.valid()) {
    const Tensor& bt = t.value(bias);
    for (int n = 0; n < out.shape().n; ++n) {
      for (int c = 0; c < out.shape().c; ++c) {
        float* p = out.plane(n, c);
        const float b = bt.data()[c];
        for (int64_t i = 0; i < int64_t(oh) * ow; ++i) p[i] += b;
      }
    }
  }
  const Shape wshape = ws;
  return t.emit("tconv2d", std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, kernels::conv2d(g, tp.value(w), {}, stride, pad));
    tp.accumulate(w, kernels::conv2d_dw(g, tp.value(x), stride, pad, wshape));
    if (bias.valid()) {
      tp.accumulate(bias, Tensor({1, wshape.c, 1, 1}, kernels::conv2d_db(g)));
    }
  });
}

Value leaky_relu(Tape& t, Value x, float slope) {
  Tensor out = kernels::leaky_relu(t.value(x), slope);
  return t.emit("leaky_relu", std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, kernels::leaky_relu_adj(tp.value(x), g, slope));
  });
}

Value avg_pool2(Tape& t, Value x) {
  const Shape s = t.value(x).shape();
  Tensor out = kernels::avg_pool2(t.value(x));
  return t.emit("avg_pool2", std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, kernels::avg_pool2_adj(g, s.h, s.w));
  });
}

Value warp_bilinear(Tape& t, Value img, Value flow) {
  Tensor out = kernels::warp_bilinear(t.value(img), t.value(flow));
  return t.emit("warp_bilinear", std::move(out), [=](Tape& tp, const Tensor& g) {
    Tensor dimg(tp.value(img).shape());
    Tensor dflow(tp.value(flow).shape());
    kernels::warp_bilinear_grad(tp.value(img), tp.value(flow), g, &dimg, &dflow);
    tp.accumulate(img, dimg);
    tp.accumulate(flow, dflow);
  });
}

Value resize(Tape& t, Value x, int out_h, int out_w, kernels::ResizeMode mode) {
  const Shape s = t.value(x).shape();
  Tensor out = kernels::resize(t.value(x), out_h, out_w, mode);
  return t.emit("resize", std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, kernels::resize_adj(g, s.h, s.w, mode));
  });
}

Value pad_edge(Tape& t, Value x, int top, int bottom, int left, int right) {
  Tensor out = kernels::pad_edge(t.value(x), top, bottom, left, right);
  return t.emit("pad_edge", std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, kernels::pad_edge_adj(g, top, bottom, left, right));
  });
}

Value crop(Tape& t, Value x, int y0, int x0, int h, int w) {
  const Shape s = t.value(x).shape();
  Tensor out = kernels::crop(t.value(x), y0, x0, h, w);
  return t.emit("crop", std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, kernels::crop_adj(g, y0, x0, s.h, s.w));
  });
}

Value concat_channels(Tape& t, const std::vector<Value>& xs) {
  std::vector<const Tensor*> ins;
  std::vector<int> widths;
  ins.reserve(xs.size());
  for (Value v : xs) {
    ins.push_back(&t.value(v));
    widths.push_back(t.value(v).shape().c);
  }
  Tensor out = kernels::concat_channels(ins);
  std::vector<Value> parents = xs;
  return t.emit("concat_channels", std::move(out), [=](Tape& tp, const Tensor& g) {
    int c0 = 0;
    for (size_t i = 0; i < parents.size(); ++i) {
      tp.accumulate(parents[i], kernels::slice_channels(g, c0, c0 + widths[i]));
      c0 += widths[i];
    }
  });
}

Value slice_channels(Tape& t, Value x, int c0, int c1) {
  const Shape s = t.value(x).shape();
  Tensor out = kernels::slice_channels(t.value(x), c0, c1);
  return t.emit("slice_channels", std::move(out), [=](Tape& tp, const Tensor& g) {
    Tensor dx(s);
    for (int n = 0; n < s.n; ++n) {
      for (int c = c0; c < c1; ++c) {
        const float* src = g.plane(n, c - c0);
        std::copy(src, src + int64_t(s.h) * s.w, dx.plane(n, c));
      }
    }
    tp.accumulate(x, dx);
  });
}

namespace {

enum class BinOp { kAdd, kSub, kMul, kDiv };

Value binary(Tape& t, Value a, Value b, BinOp op, const char* name) {
  const Tensor& at = t.value(a);
  const Tensor& bt = t.value(b);
  contract(at.shape() == bt.shape(), std::string(name) + ": shape mismatch " +
                                         at.shape().str() + " vs " +
                                         bt.shape().str());
  Tensor out(at.shape());
  const float* ap = at.data();
  const float* bp = bt.data();
  float* op_ = out.data();
  const int64_t count = at.numel();
  switch (op) {
    case BinOp::kAdd:
      for (int64_t i = 0; i < count; ++i) op_[i] = ap[i] + bp[i];
      break;
    case BinOp::kSub:
      for (int64_t i = 0; i < count; ++i) op_[i] = ap[i] - bp[i];
      break;
    case BinOp::kMul:
      for (int64_t i = 0; i < count; ++i) op_[i] = ap[i] * bp[i];
      break;
    case BinOp::kDiv:
      for (int64_t i = 0; i < count; ++i) op_[i] = ap[i] / bp[i];
      break;
  }
  return t.emit(name, std::move(out), [=](Tape& tp, const Tensor& g) {
    const int64_t n = g.numel();
    const float* gp = g.data();
    Tensor da(g.shape()), db(g.shape());
    float* dap = da.data();
    float* dbp = db.data();
    const float* av = tp.value(a).data();
    const float* bv = tp.value(b).data();
    switch (op) {
      case BinOp::kAdd:
        tp.accumulate(a, g);
        tp.accumulate(b, g);
        return;
      case BinOp::kSub:
        for (int64_t i = 0; i < n; ++i) dbp[i] = -gp[i];
        tp.accumulate(a, g);
        tp.accumulate(b, db);
        return;
      case BinOp::kMul:
        for (int64_t i = 0; i < n; ++i) {
          dap[i] = gp[i] * bv[i];
          dbp[i] = gp[i] * av[i];
        }
        break;
      case BinOp::kDiv:
        for (int64_t i = 0; i < n; ++i) {
          dap[i] = gp[i] / bv[i];
          dbp[i] = -gp[i] * av[i] / (bv[i] * bv[i]);
        }
        break;
    }
    tp.accumulate(a, da);
    tp.accumulate(b, db);
  });
}

}  // namespace

Value add(Tape& t, Value a, Value b) { return binary(t, a, b, BinOp::kAdd, "add"); }
Value sub(Tape& t, Value a, Value b) { return binary(t, a, b, BinOp::kSub, "sub"); }
Value mul(Tape& t, Value a, Value b) { return binary(t, a, b, BinOp::kMul, "mul"); }
Value div(Tape& t, Value a, Value b) { return binary(t, a, b, BinOp::kDiv, "div"); }

Value scale(Tape& t, Value x, float s) {
  const Tensor& xt = t.value(x);
  Tensor out(xt.shape());
  const float* xp = xt.data();
  float* yp = out.data();
  for (int64_t i = 0; i < xt.numel(); ++i) yp[i] = s * xp[i];
  return t.emit("scale", std::move(out), [=](Tape& tp, const Tensor& g) {
    Tensor dx(g.shape());
    const float* gp = g.data();
    float* dp = dx.data();
    for (int64_t i = 0; i < g.numel(); ++i) dp[i] = s * gp[i];
    tp.accumulate(x, dx);
  });
}

Value add_const(Tape& t, Value x, float s) {
  const Tensor& xt = t.value(x);
  Tensor out(xt.shape());
  const float* xp = xt.data();
  float* yp = out.data();
  for (int64_t i = 0; i < xt.numel(); ++i) yp[i] = xp[i] + s;
  return t.emit("add_const", std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, g);
  });
}

Value sum(Tape& t, Value x) {
  const Tensor& xt = t.value(x);
  double acc = 0.0;
  const float* xp = xt.data();
  for (int64_t i = 0; i < xt.numel(); ++i) acc += xp[i];
  Tensor out({1, 1, 1, 1});
  out.data()[0] = float(acc);
  return t.emit("sum", std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, Tensor(tp.value(x).shape(), g.data()[0]));
  });
}

Value mean_hw(Tape& t, Value x) {
  const Shape s = t.value(x).shape();
  const int64_t area = int64_t(s.h) * s.w;
  Tensor out({s.n, s.c, 1, 1});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* p = t.value(x).plane(n, c);
      double acc = 0.0;
      for (int64_t i = 0; i < area; ++i) acc += p[i];
      out.at(n, c, 0, 0) = float(acc / double(area));
    }
  }
  return t.emit("mean_hw", std::move(out), [=](Tape& tp, const Tensor& g) {
    Tensor dx(s);
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const float gv = g.at(n, c, 0, 0) / float(area);
        float* p = dx.plane(n, c);
        std::fill(p, p + area, gv);
      }
    }
    tp.accumulate(x, dx);
  });
}

Value mean_all(Tape& t, Value x) {
  const int64_t count = t.value(x).numel();
  return scale(t, sum(t, x), 1.0f / float(count));
}

Value broadcast_chw(Tape& t, Value x, int n, int h, int w) {
  const Shape s = t.value(x).shape();
  contract(s.n == 1 && s.h == 1 && s.w == 1,
           "broadcast_chw: input must be (1,C,1,1), got " + s.str());
  Tensor out({n, s.c, h, w});
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < s.c; ++c) {
      float* p = out.plane(b, c);
      std::fill(p, p + int64_t(h) * w, t.value(x).at(0, c, 0, 0));
    }
  }
  return t.emit("broadcast_chw", std::move(out), [=](Tape& tp, const Tensor& g) {
    Tensor dx(s);
    for (int b = 0; b < n; ++b) {
      for (int c = 0; c < s.c; ++c) {
        const float* p = g.plane(b, c);
        double acc = 0.0;
        for (int64_t i = 0; i < int64_t(h) * w; ++i) acc += p[i];
        dx.at(0, c, 0, 0) += float(acc);
      }
    }
    tp.accumulate(x, dx);
  });
}

Value pow_const(Tape& t, Value x, float p) {
  const Tensor& xt = t.value(x);
  Tensor out(xt.shape());
  const float* xp = xt.data();
  float* yp = out.data();
  for (int64_t i = 0; i < xt.numel(); ++i) {
    contract(xp[i] > 0.0f, "pow_const: base must be positive");
    yp[i] = std::pow(xp[i], p);
  }
  return t.emit("pow_const", std::move(out), [=](Tape& tp, const Tensor& g) {
    Tensor dx(g.shape());
    const float* gp = g.data();
    const float* xv = tp.value(x).data();
    float* dp = dx.data();
    for (int64_t i = 0; i < g.numel(); ++i) {
      dp[i] = gp[i] * p * std::pow(xv[i], p - 1.0f);
    }
    tp.accumulate(x, dx);
  });
}

Value log_(Tape& t, Value x) {
  const Tensor& xt = t.value(x);
  Tensor out(xt.shape());
  const float* xp = xt.data();
  float* yp = out.data();
  for (int64_t i = 0; i < xt.numel(); ++i) {
    contract(xp[i] > 0.0f, "log: argument must be positive");
    yp[i] = std::log(xp[i]);
  }
  return t.emit("log", std::move(out), [=](Tape& tp, const Tensor& g) {
    Tensor dx(g.shape());
    const float* gp = g.data();
    const float* xv = tp.value(x).data();
    float* dp = dx.data();
    for (int64_t i = 0; i < g.numel(); ++i) dp[i] = gp[i] / xv[i];
    tp.accumulate(x, dx);
  });
}

Value exp_(Tape& t, Value x) {
  Tensor out = map_unary(t.value(x), [](float v) { return std::exp(v); });
  return t.emit("exp", std::move(out), [=](Tape& tp, const Tensor& g) {
    Tensor dx(g.shape());
    const float* gp = g.data();
    const float* xv = tp.value(x).data();
    float* dp = dx.data();
    for (int64_t i = 0; i < g.numel(); ++i) dp[i] = gp[i] * std::exp(xv[i]);
    tp.accumulate(x, dx);
  });
}

Value softplus(Tape& t, Value x) {
  Tensor out = map_unary(t.value(x), [](float v) {
    return v > 20.0f ? v : std::log1p(std::exp(v));
  });
  return t.emit("softplus", std::move(out), [=](Tape& tp, const Tensor& g) {
    Tensor dx(g.shape());
    const float* gp = g.data();
    const float* xv = tp.value(x).data();
    float* dp = dx.data();
    for (int64_t i = 0; i < g.numel(); ++i) {
      dp[i] = gp[i] / (1.0f + std::exp(-xv[i]));
    }
    tp.accumulate(x, dx);
  });
}

Value clamp_min(Tape& t, Value x, float lo) {
  const Tensor& xt = t.value(x);
  Tensor out(xt.shape());
  const float* xp = xt.data();
  float* yp = out.data();
  for (int64_t i = 0; i < xt.numel(); ++i) yp[i] = std::max(xp[i], lo);
  return t.emit("clamp_min", std::move(out), [=](Tape& tp, const Tensor& g) {
    Tensor dx(g.shape());
    const float* gp = g.data();
    const float* xv = tp.value(x).data();
    float* dp = dx.data();
    for (int64_t i = 0; i < g.numel(); ++i) dp[i] = xv[i] > lo ? gp[i] : 0.0f;
    tp.accumulate(x, dx);
  });
}

Value round_ste(Tape& t, Value x) {
  Tensor out = map_unary(t.value(x), [](float v) { return std::nearbyint(v); });
  return t.emit("round_ste", std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, g);
  });
}

Value clamp01_ste(Tape& t, Value x) {
  Tensor out = map_unary(t.value(x), [](float v) {
    return std::clamp(v, 0.0f, 1.0f);
  });
  return t.emit("clamp01_ste", std::move(out), [=](Tape& tp, const Tensor& g) {
    tp.accumulate(x, g);
  });
}

Value sep_blur_valid(Tape& t, Value x, std::vector<float> taps) {
  const Shape s = t.value(x).shape();
  Tensor out = kernels::sep_blur_valid(t.value(x), taps);
  return t.emit("sep_blur_valid", std::move(out),
                [=, taps = std::move(taps)](Tape& tp, const Tensor& g) {
                  tp.accumulate(x, kernels::sep_blur_valid_adj(g, taps, s.h, s.w));
                });
}

Value gaussian_bits(Tape& t, Value y, Value mu, Value sigma) {
  const Tensor& yt = t.value(y);
  const Tensor& mt = t.value(mu);
  const Tensor& st = t.value(sigma);
  contract(yt.shape() == mt.shape() && yt.shape() == st.shape(),
           "gaussian_bits: shape mismatch");
  Tensor out(yt.shape());
  const float* yp = yt.data();
  const float* mp = mt.data();
  const float* sp = st.data();
  float* bp = out.data();
  const int64_t count = yt.numel();
  for (int64_t i = 0; i < count; ++i) {
    bp[i] = float(entropy::bits_upper_clamped(yp[i], mp[i], sp[i]));
  }
  return t.emit("gaussian_bits", std::move(out), [=](Tape& tp, const Tensor& g) {
    const Tensor& yv = tp.value(y);
    const Tensor& mv = tp.value(mu);
    const Tensor& sv = tp.value(sigma);
    Tensor dy(yv.shape()), dm(yv.shape()), ds(yv.shape());
    const float* gp = g.data();
    const float* ypv = yv.data();
    const float* mpv = mv.data();
    const float* spv = sv.data();
    float* dyp = dy.data();
    float* dmp = dm.data();
    float* dsp = ds.data();
    for (int64_t i = 0; i < g.numel(); ++i) {
      const auto d = entropy::bits_gradient(ypv[i], mpv[i], spv[i]);
      dyp[i] = gp[i] * float(d.d_value);
      dmp[i] = gp[i] * float(d.d_mu);
      dsp[i] = gp[i] * float(d.d_sigma);
    }
    tp.accumulate(y, dy);
    tp.accumulate(mu, dm);
    tp.accumulate(sigma, ds);
  });
}

}  // namespace nvc::ad
