#ifndef NVC_WEIGHTS_HPP
#define NVC_WEIGHTS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nvc/tensor.hpp"

namespace nvc::weights {

uint64_t fnv1a(std::span<const uint8_t> bytes);

using NamedParams = std::vector<std::pair<std::string, Parameter*>>;

// Flat binary container: "NVCW", version byte, then one record per
// parameter (u16 name length, UTF-8 name, four u32 extents, float32
// payload), all little-endian, closed by the FNV-1a hash of every
// preceding byte.
std::vector<uint8_t> serialize(const NamedParams& params);
void save(const std::string& path, const NamedParams& params);

// Loads into the given parameters by name; every parameter must be present
// with matching extents, and the trailing hash must verify.
void load_bytes(std::span<const uint8_t> bytes, const NamedParams& params);
void load(const std::string& path, const NamedParams& params);

// Content hash of a serialized weights blob (the trailing FNV-1a value).
uint64_t content_hash(std::span<const uint8_t> bytes);
uint64_t file_hash(const std::string& path);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> bytes);

}  // namespace nvc::weights

#endif
