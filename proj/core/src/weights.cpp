#include "nvc/weights.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "nvc/errors.hpp"

namespace nvc::weights {

namespace {

constexpr char kMagic[4] = {'N', 'V', 'C', 'W'};
constexpr uint8_t kVersion = 1;

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

struct Reader {
  std::span<const uint8_t> bytes;
  size_t pos = 0;

  size_t remaining() const { return bytes.size() - pos; }
  void need(size_t n, const char* what) {
    if (remaining() < n) {
      throw FormatError(std::string("weights file truncated reading ") + what);
    }
  }
  uint16_t u16(const char* what) {
    need(2, what);
    const uint16_t v = uint16_t(bytes[pos]) | uint16_t(bytes[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(bytes[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
};

}  // namespace

uint64_t fnv1a(std::span<const uint8_t> bytes) {
  uint64_t h = 14695981039346656037ull;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<uint8_t> serialize(const NamedParams& params) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  for (const auto& [name, p] : params) {
    contract(name.size() <= 0xFFFF, "weights: parameter name too long");
    put_u16(out, uint16_t(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    const Shape s = p->value.shape();
    put_u32(out, uint32_t(s.n));
    put_u32(out, uint32_t(s.c));
    put_u32(out, uint32_t(s.h));
    put_u32(out, uint32_t(s.w));
    const size_t byte_count = size_t(s.numel()) * 4;
    const size_t off = out.size();
    out.resize(off + byte_count);
    std::memcpy(out.data() + off, p->value.data(), byte_count);
  }
  put_u64(out, fnv1a(std::span(out.data(), out.size())));
  return out;
}

void load_bytes(std::span<const uint8_t> bytes, const NamedParams& params) {
  if (bytes.size() < 13 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("weights file: bad magic");
  }
  if (bytes[4] != kVersion) {
    throw FormatError("weights file: unsupported version " + std::to_string(bytes[4]));
  }
  const uint64_t stored = [&] {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= uint64_t(bytes[bytes.size() - 8 + i]) << (8 * i);
    }
    return v;
  }();
  const uint64_t computed = fnv1a(bytes.subspan(0, bytes.size() - 8));
  if (stored != computed) {
    throw FormatError("weights file: FNV-1a hash mismatch");
  }

  std::map<std::string, std::pair<Shape, std::vector<float>>> loaded;
  Reader r{bytes.subspan(0, bytes.size() - 8), 5};
  while (r.remaining() > 0) {
    const uint16_t name_len = r.u16("name length");
    r.need(name_len, "name");
    std::string name(reinterpret_cast<const char*>(bytes.data() + r.pos), name_len);
    r.pos += name_len;
    Shape s;
    s.n = int(r.u32("extent n"));
    s.c = int(r.u32("extent c"));
    s.h = int(r.u32("extent h"));
    s.w = int(r.u32("extent w"));
    const size_t byte_count = size_t(s.numel()) * 4;
    r.need(byte_count, name.c_str());
    std::vector<float> data(size_t(s.numel()));
    std::memcpy(data.data(), bytes.data() + r.pos, byte_count);
    r.pos += byte_count;
    loaded.emplace(std::move(name), std::make_pair(s, std::move(data)));
  }

  for (const auto& [name, p] : params) {
    auto it = loaded.find(name);
    if (it == loaded.end()) {
      throw FormatError("weights file: missing parameter '" + name + "'");
    }
    const auto& [s, data] = it->second;
    if (!(s == p->value.shape())) {
      throw FormatError("weights file: extents " + s.str() + " for '" + name +
                        "' do not match expected " + p->value.shape().str());
    }
    p->value = Tensor(s, data);
    p->grad = Tensor(s);
  }
}

uint64_t content_hash(std::span<const uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError("weights blob too short");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= uint64_t(bytes[bytes.size() - 8 + i]) << (8 * i);
  }
  return v;
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path);
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  in.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(size), uint8_t{0});
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw FormatError("failed reading file: " + path);
  return bytes;
}

void write_file(const std::string& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot create file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw FormatError("failed writing file: " + path);
}

void save(const std::string& path, const NamedParams& params) {
  const auto bytes = serialize(params);
  write_file(path, std::span(bytes.data(), bytes.size()));
}

void load(const std::string& path, const NamedParams& params) {
  const auto bytes = read_file(path);
  load_bytes(std::span(bytes.data(), bytes.size()), params);
}

uint64_t file_hash(const std::string& path) {
  const auto bytes = read_file(path);
  return content_hash(std::span(bytes.data(), bytes.size()));
}

}  // namespace nvc::weights
