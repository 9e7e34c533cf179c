#include "nvc/bitstream.hpp"

#include <cstring>
#include <string>

namespace nvc::bitstream {

namespace {

constexpr char kMagic[4] = {'N', 'V', 'C', '1'};

uint32_t ceil_div(uint32_t a, uint32_t b) {
  return (a + b - 1) / b;
}

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
}
void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

}  // namespace

uint8_t ByteReader::u8(const char* what) {
  if (remaining() < 1) throw CorruptionError(std::string("truncated stream reading ") + what);
  return bytes_[pos_++];
}
uint16_t ByteReader::u16(const char* what) {
  if (remaining() < 2) throw CorruptionError(std::string("truncated stream reading ") + what);
  uint16_t v = uint16_t(bytes_[pos_]) | uint16_t(bytes_[pos_ + 1]) << 8;
  pos_ += 2;
  return v;
}
uint32_t ByteReader::u32(const char* what) {
  if (remaining() < 4) throw CorruptionError(std::string("truncated stream reading ") + what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(bytes_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}
uint64_t ByteReader::u64(const char* what) {
  if (remaining() < 8) throw CorruptionError(std::string("truncated stream reading ") + what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(bytes_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}
std::span<const uint8_t> ByteReader::bytes(size_t count, const char* what) {
  if (remaining() < count) {
    throw CorruptionError(std::string("truncated stream reading ") + what);
  }
  auto s = bytes_.subspan(pos_, count);
  pos_ += count;
  return s;
}
void ByteReader::skip(size_t count, const char* what) {
  if (remaining() < count) {
    throw CorruptionError(std::string("truncated stream skipping ") + what);
  }
  pos_ += count;
}

void StreamHeader::validate() const {
  auto fail = [](const std::string& field) {
    throw FormatError("stream header: invalid field '" + field + "'");
  };
  if (spatial_factor != 1 && spatial_factor != 4) fail("spatial_factor");
  if (temporal_factor != 1 && temporal_factor != 4) fail("temporal_factor");
  // Legal wrapper modes: none, temporal-only, full.
  if (spatial_factor == 4 && temporal_factor == 1) fail("spatial_factor");
  if (width == 0 || height == 0) fail("width");
  if (original_width == 0 || original_height == 0) fail("original_width");
  if (frame_count == 0 || original_frame_count == 0) fail("frame_count");
  if (fps_num == 0 || fps_den == 0) fail("fps");
  if (gop_size == 0) fail("gop_size");
  if (width != ceil_div(original_width, spatial_factor)) fail("width");
  if (height != ceil_div(original_height, spatial_factor)) fail("height");
  if (frame_count != ceil_div(original_frame_count, temporal_factor)) {
    fail("frame_count");
  }
}

void write_header(const StreamHeader& h, std::vector<uint8_t>& out) {
  h.validate();
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  put_u16(out, h.width);
  put_u16(out, h.height);
  put_u16(out, h.original_width);
  put_u16(out, h.original_height);
  put_u32(out, h.frame_count);
  put_u32(out, h.original_frame_count);
  put_u32(out, h.fps_num);
  put_u32(out, h.fps_den);
  put_u16(out, h.gop_size);
  out.push_back(h.spatial_factor);
  out.push_back(h.temporal_factor);
  out.push_back(h.lambda_id);
  put_u64(out, h.weights_hash);
}

StreamHeader read_header(ByteReader& r) {
  const auto magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw FormatError("stream header: invalid field 'magic'");
  }
  const uint8_t version = r.u8("version");
  if (version != kVersion) {
    throw FormatError("stream header: unsupported version " + std::to_string(version));
  }
  StreamHeader h;
  h.width = r.u16("width");
  h.height = r.u16("height");
  h.original_width = r.u16("original_width");
  h.original_height = r.u16("original_height");
  h.frame_count = r.u32("frame_count");
  h.original_frame_count = r.u32("original_frame_count");
  h.fps_num = r.u32("fps_num");
  h.fps_den = r.u32("fps_den");
  h.gop_size = r.u16("gop_size");
  h.spatial_factor = r.u8("spatial_factor");
  h.temporal_factor = r.u8("temporal_factor");
  h.lambda_id = r.u8("lambda_id");
  h.weights_hash = r.u64("weights_hash");
  h.validate();
  return h;
}

void FramePayload::validate() const {
  if (frame_type != 0 && frame_type != 1) {
    throw FormatError("frame payload: invalid frame_type " + std::to_string(frame_type));
  }
  const int expected = frame_type == 0 ? kIFrameChunks : kPFrameChunks;
  contract(int(chunks.size()) == expected,
           "frame payload: expected " + std::to_string(expected) + " chunks, got " +
               std::to_string(chunks.size()));
}

void write_frame_payload(const FramePayload& p, std::vector<uint8_t>& out) {
  p.validate();
  out.push_back(p.frame_type);
  for (const auto& chunk : p.chunks) {
    put_u32(out, uint32_t(chunk.size()));
    out.insert(out.end(), chunk.begin(), chunk.end());
  }
}

FramePayload read_frame_payload(ByteReader& r, uint32_t frame_index) {
  const std::string where = "frame " + std::to_string(frame_index);
  FramePayload p;
  p.frame_type = r.u8((where + " type").c_str());
  if (p.frame_type != 0 && p.frame_type != 1) {
    throw CorruptionError("frame payload: invalid frame_type " +
                          std::to_string(p.frame_type) + " at " + where);
  }
  const int count = p.frame_type == 0 ? kIFrameChunks : kPFrameChunks;
  for (int i = 0; i < count; ++i) {
    const uint32_t len = r.u32((where + " chunk length").c_str());
    const auto bytes = r.bytes(len, (where + " chunk payload").c_str());
    p.chunks.emplace_back(bytes.begin(), bytes.end());
  }
  return p;
}

uint8_t skip_frame_payload(ByteReader& r, uint32_t frame_index) {
  const std::string where = "frame " + std::to_string(frame_index);
  const uint8_t type = r.u8((where + " type").c_str());
  if (type != 0 && type != 1) {
    throw CorruptionError("frame payload: invalid frame_type " +
                          std::to_string(type) + " at " + where);
  }
  const int count = type == 0 ? kIFrameChunks : kPFrameChunks;
  for (int i = 0; i < count; ++i) {
    const uint32_t len = r.u32((where + " chunk length").c_str());
    r.skip(len, (where + " chunk payload").c_str());
  }
  return type;
}

}  // namespace nvc::bitstream
