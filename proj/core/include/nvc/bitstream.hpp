#ifndef NVC_BITSTREAM_HPP
#define NVC_BITSTREAM_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "nvc/errors.hpp"

namespace nvc::bitstream {

inline constexpr uint8_t kVersion = 1;
inline constexpr int kIFrameChunks = 5;  // frame hyper + 4 channel groups
inline constexpr int kPFrameChunks = 7;  // + motion hyper + motion latent

// Fixed-layout little-endian header, 42 bytes on the wire.
struct StreamHeader {
  uint16_t width = 0, height = 0;                    // coded extents
  uint16_t original_width = 0, original_height = 0;  // pre-wrapper extents
  uint32_t frame_count = 0;                          // coded frames
  uint32_t original_frame_count = 0;
  uint32_t fps_num = 25, fps_den = 1;  // original frame rate
  uint16_t gop_size = 32;
  uint8_t spatial_factor = 1;   // 1 or 4
  uint8_t temporal_factor = 1;  // 1 or 4
  uint8_t lambda_id = 0;
  uint64_t weights_hash = 0;

  void validate() const;
  bool operator==(const StreamHeader&) const = default;
};

struct FramePayload {
  uint8_t frame_type = 0;  // 0 = I, 1 = P
  // Order: (motion hyper, motion latent)? then frame hyper, then the
  // channel groups in schedule order. Lengths are self-describing.
  std::vector<std::vector<uint8_t>> chunks;

  void validate() const;
};

// Bounds-checked cursor over stream bytes; any read past the end raises a
// corruption error instead of touching out-of-range memory.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  size_t pos() const { return pos_; }
  size_t remaining() const { return bytes_.size() - pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  uint8_t u8(const char* what);
  uint16_t u16(const char* what);
  uint32_t u32(const char* what);
  uint64_t u64(const char* what);
  std::span<const uint8_t> bytes(size_t count, const char* what);
  void skip(size_t count, const char* what);

 private:
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

void write_header(const StreamHeader& h, std::vector<uint8_t>& out);
StreamHeader read_header(ByteReader& r);

void write_frame_payload(const FramePayload& p, std::vector<uint8_t>& out);
FramePayload read_frame_payload(ByteReader& r, uint32_t frame_index);
// Advances past one frame payload using length arithmetic only; returns
// the frame type byte.
uint8_t skip_frame_payload(ByteReader& r, uint32_t frame_index);

}  // namespace nvc::bitstream

#endif
