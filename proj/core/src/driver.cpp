#include "nvc/driver.hpp"

#include <filesystem>

#include "nvc/weights.hpp"

namespace nvc::driver {

namespace {

constexpr int kPad = framecodec::FrameCodec::kPadMultiple;

int pad_to(int extent) {
  return (extent + kPad - 1) / kPad * kPad;
}

}  // namespace

CodecWeights::CodecWeights(uint64_t seed)
    : flow_net_([&] {
        nn::Init init(seed);
        return flow::FlowEstimator(init);
      }()),
      motion_([&] {
        nn::Init init(seed + 1);
        return motion::MotionCodec(init);
      }()),
      miner_([&] {
        nn::Init init(seed + 2);
        return ctxmine::ContextMiner(init);
      }()),
      p_codec_([&] {
        nn::Init init(seed + 3);
        return framecodec::FrameCodec(init);
      }()),
      i_codec_([&] {
        nn::Init init(seed + 4);
        return framecodec::FrameCodec(init);
      }()) {}

weights::NamedParams CodecWeights::i_params() {
  weights::NamedParams out;
  i_codec_.visit_params("i_codec", [&](const std::string& n, Parameter& p) {
    out.emplace_back(n, &p);
  });
  return out;
}

weights::NamedParams CodecWeights::p_params() {
  weights::NamedParams out;
  auto collect = [&](const std::string& n, Parameter& p) {
    out.emplace_back(n, &p);
  };
  motion_.visit_params("motion", collect);
  miner_.visit_params("miner", collect);
  p_codec_.visit_params("p_codec", collect);
  return out;
}

weights::NamedParams CodecWeights::flow_params() {
  weights::NamedParams out;
  flow_net_.visit_params("flow", [&](const std::string& n, Parameter& p) {
    out.emplace_back(n, &p);
  });
  return out;
}

void CodecWeights::save(const std::string& dir) const {
  auto& self = const_cast<CodecWeights&>(*this);
  std::filesystem::create_directories(dir);
  weights::save(dir + "/i_model.nvcw", self.i_params());
  weights::save(dir + "/p_model.nvcw", self.p_params());
  weights::save(dir + "/flow.nvcw", self.flow_params());
}

void CodecWeights::load(const std::string& dir) {
  namespace fs = std::filesystem;
  for (const char* name : {"i_model.nvcw", "p_model.nvcw", "flow.nvcw"}) {
    if (!fs::exists(dir + "/" + name)) {
      throw WeightsError("weights directory '" + dir + "' is missing " + name);
    }
  }
  weights::load(dir + "/i_model.nvcw", i_params());
  weights::load(dir + "/p_model.nvcw", p_params());
  weights::load(dir + "/flow.nvcw", flow_params());
}

uint64_t CodecWeights::combined_hash() const {
  auto& self = const_cast<CodecWeights&>(*this);
  std::vector<uint8_t> hashes;
  for (const auto blob : {weights::serialize(self.i_params()),
                          weights::serialize(self.p_params()),
                          weights::serialize(self.flow_params())}) {
    const uint64_t h = weights::content_hash(std::span(blob.data(), blob.size()));
    for (int i = 0; i < 8; ++i) hashes.push_back(uint8_t(h >> (8 * i)));
  }
  return weights::fnv1a(std::span(hashes.data(), hashes.size()));
}

namespace {

struct CodedFrameResult {
  bitstream::FramePayload payload;
  Tensor recon_padded;    // decoder-loop reconstruction at padded extents
  Tensor feature_padded;  // propagated feature at padded extents
};

// Encode one frame (already padded) and maintain the decoder-side state.
CodedFrameResult encode_one_frame(CodecWeights& w, const Tensor& padded_frame,
                                  bool is_i_frame,
                                  const ctxmine::ReferenceState& state) {
  CodedFrameResult out;
  const Shape ps = padded_frame.shape();
  if (is_i_frame) {
    auto enc = w.i_codec().encode(padded_frame, nullptr);
    out.payload.frame_type = 0;
    out.payload.chunks.push_back(std::move(enc.chunks.hyper));
    for (auto& g : enc.chunks.groups) out.payload.chunks.push_back(std::move(g));
    out.recon_padded = std::move(enc.recon);
    out.feature_padded = std::move(enc.recon_feature);
    return out;
  }

  const Tensor flow = w.flow_net().estimate(padded_frame, state.recon_frame);
  auto menc = w.motion().encode(flow);
  const auto feats = w.miner().extract_features_eval(state);
  const auto cp = w.miner().mine_eval(feats, menc.flow_hat);
  auto fenc = w.p_codec().encode(padded_frame, &cp);

  out.payload.frame_type = 1;
  out.payload.chunks.push_back(std::move(menc.chunks.hyper));
  out.payload.chunks.push_back(std::move(menc.chunks.latent));
  out.payload.chunks.push_back(std::move(fenc.chunks.hyper));
  for (auto& g : fenc.chunks.groups) out.payload.chunks.push_back(std::move(g));
  out.recon_padded = std::move(fenc.recon);
  out.feature_padded = std::move(fenc.recon_feature);
  (void)ps;
  return out;
}

Tensor decode_one_frame(CodecWeights& w, const bitstream::FramePayload& payload,
                        int ph, int pw, ctxmine::ReferenceState& state) {
  if (payload.frame_type == 0) {
    framecodec::FrameChunks chunks;
    chunks.hyper = payload.chunks[0];
    for (int g = 0; g < 4; ++g) chunks.groups.push_back(payload.chunks[1 + g]);
    auto dec = w.i_codec().decode_chunks(chunks, nullptr, ph, pw);
    state.recon_frame = dec.recon;
    state.recon_feature = dec.recon_feature;
    return dec.recon;
  }
  motion::MotionChunks mchunks;
  mchunks.hyper = payload.chunks[0];
  mchunks.latent = payload.chunks[1];
  const Tensor flow_hat = w.motion().decode_chunks(mchunks, ph, pw);
  const auto feats = w.miner().extract_features_eval(state);
  const auto cp = w.miner().mine_eval(feats, flow_hat);
  framecodec::FrameChunks fchunks;
  fchunks.hyper = payload.chunks[2];
  for (int g = 0; g < 4; ++g) fchunks.groups.push_back(payload.chunks[3 + g]);
  auto dec = w.p_codec().decode_chunks(fchunks, &cp, ph, pw);
  state.recon_frame = dec.recon;
  state.recon_feature = dec.recon_feature;
  return dec.recon;
}

}  // namespace

std::vector<uint8_t> encode_video(const video::VideoSequence& video,
                                  CodecWeights& w, const CodecConfig& cfg,
                                  EncodeTrace* trace) {
  video.validate();
  contract(cfg.gop_size >= 1, "encode: gop_size must be >= 1");
  contract(!video.frames.empty(), "encode: empty input");

  sr::SrMode mode = cfg.sr_override.value_or(sr::select_mode(cfg.target_mbps));
  mode.validate();

  video::VideoSequence coded_in = sr::temporal_downsample(video, mode.temporal_factor);
  coded_in = sr::spatial_downsample(coded_in, mode.spatial_factor);
  contract(coded_in.width() >= 64 && coded_in.height() >= 64,
           "encode: coded extents must be at least 64 px, got " +
               std::to_string(coded_in.width()) + "x" +
               std::to_string(coded_in.height()));

  bitstream::StreamHeader h;
  h.width = uint16_t(coded_in.width());
  h.height = uint16_t(coded_in.height());
  h.original_width = uint16_t(video.width());
  h.original_height = uint16_t(video.height());
  h.frame_count = uint32_t(coded_in.frame_count());
  h.original_frame_count = uint32_t(video.frame_count());
  h.fps_num = video.fps.num;
  h.fps_den = video.fps.den;
  h.gop_size = uint16_t(cfg.gop_size);
  h.spatial_factor = uint8_t(mode.spatial_factor);
  h.temporal_factor = uint8_t(mode.temporal_factor);
  h.lambda_id = cfg.lambda_id;
  h.weights_hash = w.combined_hash();

  std::vector<uint8_t> out;
  write_header(h, out);

  const int ph = pad_to(coded_in.height());
  const int pw = pad_to(coded_in.width());
  if (trace) trace->mode = mode;

  ctxmine::ReferenceState state;
  for (int i = 0; i < coded_in.frame_count(); ++i) {
    const bool is_i = (i % cfg.gop_size) == 0;
    try {
      const Tensor padded =
          kernels::pad_edge(coded_in.frames[size_t(i)], 0,
                            ph - coded_in.height(), 0, pw - coded_in.width());
      auto coded = encode_one_frame(w, padded, is_i, state);
      state.recon_frame = coded.recon_padded;
      state.recon_feature = coded.feature_padded;
      const size_t before = out.size();
      write_frame_payload(coded.payload, out);
      if (trace) {
        trace->coded_recons.push_back(kernels::crop(
            coded.recon_padded, 0, 0, coded_in.height(), coded_in.width()));
        trace->frame_bits.push_back(int64_t(out.size() - before) * 8);
        trace->frame_types.push_back(is_i ? 'I' : 'P');
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw ContractError("encode: frame " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Tensor> decode_coded_frames(std::span<const uint8_t> stream,
                                        CodecWeights& w,
                                        bitstream::StreamHeader* header_out) {
  bitstream::ByteReader r(stream);
  const bitstream::StreamHeader h = bitstream::read_header(r);
  if (header_out) *header_out = h;

  if (h.weights_hash != w.combined_hash()) {
    throw WeightsError("stream was encoded with a different weights set (hash "
                       "mismatch); refusing to decode");
  }

  const int ph = pad_to(h.height);
  const int pw = pad_to(h.width);
  std::vector<Tensor> recons;
  ctxmine::ReferenceState state;
  for (uint32_t i = 0; i < h.frame_count; ++i) {
    const auto payload = bitstream::read_frame_payload(r, i);
    if (i % h.gop_size == 0) {
      if (payload.frame_type != 0) {
        throw CorruptionError("frame " + std::to_string(i) +
                              ": expected an I-frame at the GoP boundary");
      }
    } else if (payload.frame_type != 1) {
      throw CorruptionError("frame " + std::to_string(i) +
                            ": expected a P-frame inside the GoP");
    }
    Tensor recon_padded = decode_one_frame(w, payload, ph, pw, state);
    // State stays padded; emitted frames are cropped to coded extents.
    recons.push_back(kernels::crop(recon_padded, 0, 0, h.height, h.width));
  }
  if (!r.at_end()) {
    throw CorruptionError("stream has " + std::to_string(r.remaining()) +
                          " trailing bytes after the last frame");
  }
  return recons;
}

video::VideoSequence decode_video(std::span<const uint8_t> stream, CodecWeights& w) {
  bitstream::StreamHeader h;
  std::vector<Tensor> recons = decode_coded_frames(stream, w, &h);

  video::VideoSequence coded;
  coded.fps = {h.fps_num, h.fps_den};  // corrected below by the wrapper
  coded.frames = std::move(recons);

  video::VideoSequence out = sr::temporal_interpolate(
      coded, h.temporal_factor, int(h.original_frame_count), w.flow_net());
  out = sr::spatial_upsample(out, h.original_height, h.original_width);
  out.fps = {h.fps_num, h.fps_den};
  out.source_color = video::SourceColor::kRgb24;
  return out;
}

metrics::EvalReport evaluate(const video::VideoSequence& original,
                             const video::VideoSequence& decoded,
                             std::span<const uint8_t> stream) {
  contract(original.frame_count() == decoded.frame_count(),
           "evaluate: frame count mismatch: " +
               std::to_string(original.frame_count()) + " vs " +
               std::to_string(decoded.frame_count()));
  contract(original.width() == decoded.width() &&
               original.height() == decoded.height(),
           "evaluate: extents mismatch");

  bitstream::ByteReader r(stream);
  const bitstream::StreamHeader h = bitstream::read_header(r);

  // Per-coded-frame payload sizes via length arithmetic.
  std::vector<int64_t> coded_bits;
  std::vector<char> coded_types;
  for (uint32_t i = 0; i < h.frame_count; ++i) {
    const size_t before = r.pos();
    const uint8_t type = bitstream::skip_frame_payload(r, i);
    coded_bits.push_back(int64_t(r.pos() - before) * 8);
    coded_types.push_back(type == 0 ? 'I' : 'P');
  }

  metrics::EvalReport rep;
  rep.total_bits = int64_t(stream.size()) * 8;
  double ssim_acc = 0.0, psnr_acc = 0.0;
  int finite_psnr = 0;
  bool all_lossless = true;
  for (int i = 0; i < original.frame_count(); ++i) {
    metrics::FrameStats fs;
    fs.index = i;
    const bool coded = (i % h.temporal_factor) == 0 &&
                       (i / h.temporal_factor) < int(h.frame_count);
    if (coded) {
      fs.type = coded_types[size_t(i / h.temporal_factor)];
      fs.bits = coded_bits[size_t(i / h.temporal_factor)];
    } else {
      fs.type = 'T';  // temporally interpolated
      fs.bits = 0;
    }
    fs.bpp = metrics::bpp(fs.bits, original.width(), original.height(), 1);
    fs.ms_ssim = metrics::ms_ssim(original.frames[size_t(i)], decoded.frames[size_t(i)]);
    fs.psnr = metrics::psnr(original.frames[size_t(i)], decoded.frames[size_t(i)]);
    ssim_acc += fs.ms_ssim;
    if (std::isfinite(fs.psnr)) {
      psnr_acc += fs.psnr;
      ++finite_psnr;
      all_lossless = false;
    }
    rep.frames.push_back(fs);
  }
  rep.mean_ms_ssim = ssim_acc / original.frame_count();
  rep.mean_psnr = finite_psnr > 0 ? psnr_acc / finite_psnr : INFINITY;
  rep.lossless = all_lossless;
  rep.total_bpp = metrics::bpp(rep.total_bits, original.width(), original.height(),
                               original.frame_count());
  const double fps = double(h.fps_num) / double(h.fps_den);
  rep.achieved_mbps =
      double(rep.total_bits) * fps / double(original.frame_count()) / 1e6;

  // Mean MS-SSIM drop from the first P-frame to the fourth within each GoP,
  // measured on the coded frames.
  if (h.gop_size >= 5 && h.frame_count >= 5) {
    double acc = 0.0;
    int gops = 0;
    for (uint32_t start = 0; start + 4 < h.frame_count; start += h.gop_size) {
      const auto at_poc = [&](uint32_t poc) {
        const uint32_t coded_idx = start + poc;
        const uint32_t orig_idx = coded_idx * h.temporal_factor;
        return rep.frames[orig_idx].ms_ssim;
      };
      acc += at_poc(1) - at_poc(4);
      ++gops;
    }
    if (gops > 0) {
      rep.poc_decay = acc / gops;
      rep.has_poc_decay = true;
    }
  }
  return rep;
}

}  // namespace nvc::driver
