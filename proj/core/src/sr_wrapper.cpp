#include "nvc/sr_wrapper.hpp"

#include <algorithm>

#include "nvc/kernels.hpp"

namespace nvc::sr {

namespace {

uint32_t gcd_u32(uint32_t a, uint32_t b) {
  while (b != 0) {
    const uint32_t t = a % b;
    a = b;
    b = t;
  }
  return a;
}

}  // namespace

void SrMode::validate() const {
  const bool legal = (spatial_factor == 1 && temporal_factor == 1) ||
                     (spatial_factor == 1 && temporal_factor == 4) ||
                     (spatial_factor == 4 && temporal_factor == 4);
  contract(legal, "sr mode: only (1,1), (1,4), (4,4) are defined, got (" +
                      std::to_string(spatial_factor) + "," +
                      std::to_string(temporal_factor) + ")");
}

SrMode select_mode(double target_bitrate_mbps) {
  contract(target_bitrate_mbps > 0.0, "select_mode: target bitrate must be positive");
  if (target_bitrate_mbps <= 0.05) return {4, 4};
  if (target_bitrate_mbps <= 0.5) return {1, 4};
  return {1, 1};
}

video::VideoSequence temporal_downsample(const video::VideoSequence& v, int factor) {
  contract(factor == 1 || factor == 4, "temporal_downsample: factor must be 1 or 4");
  if (factor == 1) return v;
  video::VideoSequence out;
  out.source_color = v.source_color;
  const uint32_t g = gcd_u32(v.fps.num, uint32_t(factor) * v.fps.den);
  out.fps = {v.fps.num / g, uint32_t(factor) * v.fps.den / g};
  for (size_t i = 0; i < v.frames.size(); i += size_t(factor)) {
    out.frames.push_back(v.frames[i]);
  }
  return out;
}

video::VideoSequence spatial_downsample(const video::VideoSequence& v, int factor) {
  contract(factor == 1 || factor == 4, "spatial_downsample: factor must be 1 or 4");
  if (factor == 1) return v;
  const int oh = (v.height() + factor - 1) / factor;
  const int ow = (v.width() + factor - 1) / factor;
  if (oh < 64 || ow < 64) {
    throw ContractError("spatial_downsample: output " + std::to_string(ow) + "x" +
                        std::to_string(oh) +
                        " is below the 64 px codec minimum; refuse to downsample " +
                        std::to_string(v.width()) + "x" + std::to_string(v.height()));
  }
  video::VideoSequence out;
  out.fps = v.fps;
  out.source_color = v.source_color;
  for (const Tensor& f : v.frames) {
    Tensor r = kernels::resize(f, oh, ow, kernels::ResizeMode::kBicubic);
    for (float& x : r.vec()) x = std::clamp(x, 0.0f, 1.0f);
    out.frames.push_back(std::move(r));
  }
  return out;
}

video::VideoSequence temporal_interpolate(const video::VideoSequence& decoded,
                                          int factor, int original_count,
                                          flow::FlowEstimator& flow_net) {
  contract(factor == 1 || factor == 4, "temporal_interpolate: factor must be 1 or 4");
  contract(decoded.frame_count() >= 1, "temporal_interpolate: no decoded frames");
  contract(original_count >= 1, "temporal_interpolate: original count must be >= 1");
  if (factor == 1) {
    contract(original_count == decoded.frame_count(),
             "temporal_interpolate: frame count mismatch for factor 1");
    return decoded;
  }

  video::VideoSequence out;
  out.source_color = decoded.source_color;
  const uint32_t g = gcd_u32(decoded.fps.num * uint32_t(factor), decoded.fps.den);
  out.fps = {decoded.fps.num * uint32_t(factor) / g, decoded.fps.den / g};
  out.frames.resize(size_t(original_count));

  for (int i = 0; i < original_count; ++i) {
    const int kept = i / factor;
    const int phase = i % factor;
    if (phase == 0) {
      out.frames[size_t(i)] = decoded.frames[size_t(kept)];
    }
  }
  for (int kept = 0; kept < decoded.frame_count(); ++kept) {
    const int base = kept * factor;
    if (base + 1 >= original_count) break;
    if (kept + 1 >= decoded.frame_count()) {
      // Tail beyond the last kept frame: replicate it.
      for (int i = base + 1; i < original_count; ++i) {
        out.frames[size_t(i)] = decoded.frames[size_t(kept)];
      }
      break;
    }
    const Tensor& a = decoded.frames[size_t(kept)];
    const Tensor& b = decoded.frames[size_t(kept + 1)];
    const Tensor fwd = flow_net.estimate(a, b);  // F(A->B)
    const Tensor bwd = flow_net.estimate(b, a);  // F(B->A)
    for (int phase = 1; phase < factor && base + phase < original_count; ++phase) {
      const float tau = float(phase) / float(factor);
      Tensor fa(fwd.shape()), fb(bwd.shape());
      for (int64_t j = 0; j < fwd.numel(); ++j) fa.data()[j] = tau * fwd.data()[j];
      for (int64_t j = 0; j < bwd.numel(); ++j) {
        fb.data()[j] = (1.0f - tau) * bwd.data()[j];
      }
      const Tensor wa = kernels::warp_bilinear(a, fa);
      const Tensor wb = kernels::warp_bilinear(b, fb);
      Tensor blend(wa.shape());
      for (int64_t j = 0; j < wa.numel(); ++j) {
        blend.data()[j] = std::clamp(
            (1.0f - tau) * wa.data()[j] + tau * wb.data()[j], 0.0f, 1.0f);
      }
      out.frames[size_t(base + phase)] = std::move(blend);
    }
  }
  return out;
}

video::VideoSequence spatial_upsample(const video::VideoSequence& v, int original_h,
                                      int original_w) {
  video::VideoSequence out;
  out.fps = v.fps;
  out.source_color = v.source_color;
  for (const Tensor& f : v.frames) {
    Tensor r = kernels::resize(f, original_h, original_w, kernels::ResizeMode::kBicubic);
    for (float& x : r.vec()) x = std::clamp(x, 0.0f, 1.0f);
    out.frames.push_back(std::move(r));
  }
  return out;
}

}  // namespace nvc::sr
