#include "nvc/metrics.hpp"

#include <cmath>
#include <sstream>

#include "nvc/ops.hpp"

namespace nvc::metrics {

namespace {

constexpr float kC1 = 0.01f * 0.01f;
constexpr float kC2 = 0.03f * 0.03f;
// Keeps pow_const off zero when a cs mean degenerates.
constexpr float kPowFloor = 1e-6f;

std::vector<float> gaussian_window() {
  std::vector<float> taps(kWindow);
  const int mid = kWindow / 2;
  float sum = 0.0f;
  for (int i = 0; i < kWindow; ++i) {
    const float d = float(i - mid);
    taps[i] = std::exp(-d * d / (2.0f * kWindowSigma * kWindowSigma));
    sum += taps[i];
  }
  for (float& t : taps) t /= sum;
  return taps;
}

}  // namespace

int feasible_scales(int height, int width) {
  const int m = std::min(height, width);
  contract(m >= kWindow, "ms_ssim: extents below the 11x11 window");
  int scales = 1;
  while (scales < 5 && m >= kWindow << scales) ++scales;
  return scales;
}

Value ms_ssim(Tape& t, Value a, Value b) {
  const Shape sa = t.value(a).shape();
  const Shape sb = t.value(b).shape();
  contract(sa == sb, "ms_ssim: extents mismatch " + sa.str() + " vs " + sb.str());

  const int scales = feasible_scales(sa.h, sa.w);
  float wsum = 0.0f;
  for (int j = 0; j < scales; ++j) wsum += kScaleWeights[j];
  const std::vector<float> window = gaussian_window();

  Value per_channel;  // (N,C,1,1) running product across scales
  for (int j = 0; j < scales; ++j) {
    const Value mu_a = ad::sep_blur_valid(t, a, window);
    const Value mu_b = ad::sep_blur_valid(t, b, window);
    const Value aa = ad::sep_blur_valid(t, ad::mul(t, a, a), window);
    const Value bb = ad::sep_blur_valid(t, ad::mul(t, b, b), window);
    const Value ab = ad::sep_blur_valid(t, ad::mul(t, a, b), window);
    const Value var_a = ad::sub(t, aa, ad::mul(t, mu_a, mu_a));
    const Value var_b = ad::sub(t, bb, ad::mul(t, mu_b, mu_b));
    const Value cov = ad::sub(t, ab, ad::mul(t, mu_a, mu_b));

    const Value cs_map =
        ad::div(t, ad::add_const(t, ad::scale(t, cov, 2.0f), kC2),
                ad::add_const(t, ad::add(t, var_a, var_b), kC2));

    Value scale_stat;
    if (j == scales - 1) {
      const Value l_map = ad::div(
          t, ad::add_const(t, ad::scale(t, ad::mul(t, mu_a, mu_b), 2.0f), kC1),
          ad::add_const(
              t, ad::add(t, ad::mul(t, mu_a, mu_a), ad::mul(t, mu_b, mu_b)), kC1));
      scale_stat = ad::mean_hw(t, ad::mul(t, l_map, cs_map));
    } else {
      scale_stat = ad::mean_hw(t, cs_map);
    }
    const Value term = ad::pow_const(t, ad::clamp_min(t, scale_stat, kPowFloor),
                                     kScaleWeights[j] / wsum);
    per_channel = (j == 0) ? term : ad::mul(t, per_channel, term);

    if (j + 1 < scales) {
      a = ad::avg_pool2(t, a);
      b = ad::avg_pool2(t, b);
    }
  }
  return ad::mean_all(t, per_channel);
}

double ms_ssim(const Tensor& a, const Tensor& b) {
  Tape t;
  const Value v = ms_ssim(t, t.leaf(a), t.leaf(b));
  return double(t.value(v).data()[0]);
}

double bpp(int64_t total_bits, int width, int height, int frame_count) {
  contract(total_bits >= 0, "bpp: negative bit count");
  contract(width > 0 && height > 0 && frame_count > 0,
           "bpp: extents and frame count must be positive");
  return double(total_bits) / (double(width) * height * frame_count);
}

double gop_rd_loss(const GopRdTerms& terms) {
  contract(terms.gop_size >= 1, "gop_rd_loss: gop size must be >= 1");
  contract(int(terms.p_terms.size()) == terms.gop_size - 1,
           "gop_rd_loss: expected " + std::to_string(terms.gop_size - 1) +
               " P-frame terms, got " + std::to_string(terms.p_terms.size()));
  contract(terms.lambda > 0.0, "gop_rd_loss: lambda must be positive");
  contract(terms.i_rate_bpp >= 0.0, "gop_rd_loss: negative I rate");
  double loss = terms.i_rate_bpp + terms.lambda * terms.i_distortion;
  for (const auto& [rate, distortion] : terms.p_terms) {
    contract(rate >= 0.0, "gop_rd_loss: negative P rate");
    loss += rate + terms.lambda * distortion;
  }
  return loss;
}

double psnr(const Tensor& a, const Tensor& b) {
  contract(a.shape() == b.shape(), "psnr: extents mismatch");
  double mse = 0.0;
  const float* ap = a.data();
  const float* bp = b.data();
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double d = double(ap[i]) - bp[i];
    mse += d * d;
  }
  mse /= double(a.numel());
  if (mse == 0.0) return INFINITY;
  return -10.0 * std::log10(mse);
}

namespace {

std::string fmt_psnr(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string EvalReport::table() const {
  std::ostringstream out;
  out << "frame type        bits      bpp   ms-ssim      psnr\n";
  char buf[128];
  for (const FrameStats& f : frames) {
    std::snprintf(buf, sizeof buf, "%5d    %c  %10lld %8.4f  %8.6f  %8s\n",
                  f.index, f.type, (long long)f.bits, f.bpp, f.ms_ssim,
                  fmt_psnr(f.psnr).c_str());
    out << buf;
  }
  std::snprintf(buf, sizeof buf,
                "mean ms-ssim %.6f  mean psnr %s  total bits %lld  bpp %.4f  "
                "achieved %.4f mbps\n",
                mean_ms_ssim, fmt_psnr(mean_psnr).c_str(), (long long)total_bits,
                total_bpp, achieved_mbps);
  out << buf;
  if (has_poc_decay) {
    std::snprintf(buf, sizeof buf, "poc decay (t=1 to t=4) %.6f\n", poc_decay);
    out << buf;
  }
  if (lossless) out << "distortion: lossless\n";
  return out.str();
}

std::string EvalReport::key_values() const {
  std::ostringstream out;
  char buf[128];
  for (const FrameStats& f : frames) {
    std::snprintf(buf, sizeof buf, "frame.%d.type = %c\n", f.index, f.type);
    out << buf;
    std::snprintf(buf, sizeof buf, "frame.%d.bits = %lld\n", f.index,
                  (long long)f.bits);
    out << buf;
    std::snprintf(buf, sizeof buf, "frame.%d.bpp = %.9g\n", f.index, f.bpp);
    out << buf;
    std::snprintf(buf, sizeof buf, "frame.%d.ms_ssim = %.9g\n", f.index, f.ms_ssim);
    out << buf;
  }
  out << "mean_ms_ssim = " << mean_ms_ssim << "\n";
  out << "total_bits = " << total_bits << "\n";
  out << "total_bpp = " << total_bpp << "\n";
  out << "achieved_mbps = " << achieved_mbps << "\n";
  if (has_poc_decay) out << "poc_decay = " << poc_decay << "\n";
  out << "lossless = " << (lossless ? 1 : 0) << "\n";
  return out.str();
}

}  // namespace nvc::metrics
