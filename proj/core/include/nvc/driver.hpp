#ifndef NVC_DRIVER_HPP
#define NVC_DRIVER_HPP

#include <optional>
#include <string>

#include "nvc/bitstream.hpp"
#include "nvc/context_mining.hpp"
#include "nvc/frame_codec.hpp"
#include "nvc/metrics.hpp"
#include "nvc/sr_wrapper.hpp"
#include "nvc/weights.hpp"

namespace nvc::driver {

// The complete model set: flow estimator, motion codec, context miner, and
// the P- and I-frame codecs. Weights are stored as three files (i_model,
// p_model, flow); the stream header records a combined content hash.
class CodecWeights {
 public:
  explicit CodecWeights(uint64_t seed = 0x5eed);

  flow::FlowEstimator& flow_net() { return flow_net_; }
  motion::MotionCodec& motion() { return motion_; }
  ctxmine::ContextMiner& miner() { return miner_; }
  framecodec::FrameCodec& p_codec() { return p_codec_; }
  framecodec::FrameCodec& i_codec() { return i_codec_; }

  weights::NamedParams i_params();
  weights::NamedParams p_params();  // motion + context miner + P frame codec
  weights::NamedParams flow_params();

  void save(const std::string& dir) const;
  void load(const std::string& dir);
  uint64_t combined_hash() const;

 private:
  flow::FlowEstimator flow_net_;
  motion::MotionCodec motion_;
  ctxmine::ContextMiner miner_;
  framecodec::FrameCodec p_codec_;
  framecodec::FrameCodec i_codec_;
};

struct CodecConfig {
  int gop_size = 32;
  double target_mbps = 0.5;
  std::optional<sr::SrMode> sr_override;
  uint8_t lambda_id = 0;
};

// Per-frame results the encoder keeps for testing and evaluation. The
// reconstructions are the encoder-maintained decoder loop outputs at coded
// resolution (cropped).
struct EncodeTrace {
  std::vector<Tensor> coded_recons;
  std::vector<int64_t> frame_bits;
  std::vector<char> frame_types;
  sr::SrMode mode;
};

std::vector<uint8_t> encode_video(const video::VideoSequence& video,
                                  CodecWeights& w, const CodecConfig& cfg,
                                  EncodeTrace* trace = nullptr);

// Decodes only the coded frames (before wrapper inversion), for drift
// checks and internal use.
std::vector<Tensor> decode_coded_frames(std::span<const uint8_t> stream,
                                        CodecWeights& w,
                                        bitstream::StreamHeader* header_out = nullptr);

video::VideoSequence decode_video(std::span<const uint8_t> stream, CodecWeights& w);

metrics::EvalReport evaluate(const video::VideoSequence& original,
                             const video::VideoSequence& decoded,
                             std::span<const uint8_t> stream);

}  // namespace nvc::driver

#endif
