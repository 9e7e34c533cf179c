#ifndef NVC_VIDEO_IO_HPP
#define NVC_VIDEO_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nvc/tensor.hpp"

namespace nvc::video {

struct Rational {
  uint32_t num = 25;
  uint32_t den = 1;
  bool operator==(const Rational&) const = default;
};

enum class SourceColor { kYuv420, kRgb24 };

// Frames are (1,3,H,W) RGB in [0,1]; all frames share extents.
struct VideoSequence {
  std::vector<Tensor> frames;
  Rational fps;
  SourceColor source_color = SourceColor::kRgb24;

  int width() const { return frames.empty() ? 0 : frames[0].shape().w; }
  int height() const { return frames.empty() ? 0 : frames[0].shape().h; }
  int frame_count() const { return int(frames.size()); }
  void validate() const;
};

// YUV4MPEG2 with 4:2:0 subsampling, BT.601 limited range, co-sited
// left-top chroma alignment (bilinear upsampling on read, co-sited
// decimation on write).
VideoSequence read_y4m(std::istream& in);
VideoSequence read_y4m_file(const std::string& path);
void write_y4m(const VideoSequence& video, std::ostream& out);
void write_y4m_file(const VideoSequence& video, const std::string& path);

// Raw planar float fixture format: "NVCR" magic, u32 frame count, u32
// channels, u32 height, u32 width, u32 fps numerator/denominator, then the
// float32 payload frame by frame. Little-endian throughout.
void write_nvcr(const VideoSequence& video, std::ostream& out);
VideoSequence read_nvcr(std::istream& in);
void write_nvcr_file(const VideoSequence& video, const std::string& path);
VideoSequence read_nvcr_file(const std::string& path);

// One frame of planar YCbCr 4:2:0 bytes.
struct Yuv420Frame {
  int width = 0, height = 0;
  std::vector<uint8_t> y, cb, cr;
};

Tensor yuv420_to_rgb(const Yuv420Frame& f);
Yuv420Frame rgb_to_yuv420(const Tensor& rgb);

}  // namespace nvc::video

#endif
