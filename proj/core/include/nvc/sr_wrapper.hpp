#ifndef NVC_SR_WRAPPER_HPP
#define NVC_SR_WRAPPER_HPP

#include "nvc/flow.hpp"
#include "nvc/video_io.hpp"

namespace nvc::sr {

// Legal wrapper modes: (1,1) none, (1,4) temporal-only, (4,4) full.
struct SrMode {
  int spatial_factor = 1;
  int temporal_factor = 1;

  void validate() const;
  bool operator==(const SrMode&) const = default;
};

// Bitrate-conditioned mode selection: <= 0.05 mbps uses full spatial and
// temporal downsampling, <= 0.5 mbps temporal only, above that none.
SrMode select_mode(double target_bitrate_mbps);

// Keeps frames with index == 0 (mod factor); fps is divided by the factor.
video::VideoSequence temporal_downsample(const video::VideoSequence& v, int factor);

// Bicubic resize to ceil(extent / factor); refuses outputs below the codec
// minimum of 64 px.
video::VideoSequence spatial_downsample(const video::VideoSequence& v, int factor);

// Reconstructs the dropped frames between kept frames A and B by blending
// bidirectional warps: out(tau) = (1-tau) * warp(A, tau * F(A->B))
//                               + tau * warp(B, (1-tau) * F(B->A)).
// Kept frames pass through bit-identically; tail frames replicate the last
// kept frame. Output has exactly original_count frames.
video::VideoSequence temporal_interpolate(const video::VideoSequence& decoded,
                                          int factor, int original_count,
                                          flow::FlowEstimator& flow_net);

// Bicubic resize back to the original extents, clamped to [0,1].
video::VideoSequence spatial_upsample(const video::VideoSequence& v,
                                      int original_h, int original_w);

}  // namespace nvc::sr

#endif
