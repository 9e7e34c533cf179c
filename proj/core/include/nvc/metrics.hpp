#ifndef NVC_METRICS_HPP
#define NVC_METRICS_HPP

#include <string>
#include <vector>

#include "nvc/autodiff.hpp"
#include "nvc/tensor.hpp"

namespace nvc::metrics {

// Standard 5-scale MS-SSIM weights; for small inputs the scale count drops
// to the largest feasible level count and the weights are renormalized.
inline constexpr float kScaleWeights[5] = {0.0448f, 0.2856f, 0.3001f, 0.2363f,
                                           0.1333f};
inline constexpr int kWindow = 11;
inline constexpr float kWindowSigma = 1.5f;

int feasible_scales(int height, int width);

// MS-SSIM over [0,1] images, computed per channel then averaged.
// 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2.
Value ms_ssim(Tape& t, Value a, Value b);
double ms_ssim(const Tensor& a, const Tensor& b);

double bpp(int64_t total_bits, int width, int height, int frame_count);

// Terms of the joint GoP rate-distortion objective
//   L = R_I + lambda * D_I + sum_t (R_t + lambda * D_t),
// with rates in bpp and distortions D = 1 - MS-SSIM.
struct GopRdTerms {
  double i_rate_bpp = 0.0;
  double i_distortion = 0.0;
  std::vector<std::pair<double, double>> p_terms;  // (rate_bpp, distortion)
  double lambda = 0.0;
  int gop_size = 1;
};

double gop_rd_loss(const GopRdTerms& terms);

struct FrameStats {
  int index = 0;
  char type = 'I';
  int64_t bits = 0;
  double bpp = 0.0;
  double ms_ssim = 0.0;
  double psnr = 0.0;  // informational; +inf for lossless frames
};

struct EvalReport {
  std::vector<FrameStats> frames;
  double mean_ms_ssim = 0.0;
  double mean_psnr = 0.0;
  int64_t total_bits = 0;
  double total_bpp = 0.0;
  double achieved_mbps = 0.0;
  double poc_decay = 0.0;  // MS-SSIM drop from POC 1 to POC 4, averaged over GoPs
  bool has_poc_decay = false;
  bool lossless = false;

  std::string table() const;
  std::string key_values() const;
};

double psnr(const Tensor& a, const Tensor& b);

}  // namespace nvc::metrics

#endif
