#ifndef NVC_ENTROPY_HPP
#define NVC_ENTROPY_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "nvc/tensor.hpp"

namespace nvc::entropy {

// Smallest admissible Gaussian scale; params are clamped up to this.
inline constexpr float kSigmaMin = 0.11f;
// Probability floor applied before table quantization: 2^-16.
inline constexpr double kPmfFloor = 1.0 / 65536.0;
// Symbols in [-kSupportMax, kSupportMax] are coded directly; anything
// outside goes through the escape bucket plus a raw 16-bit literal.
inline constexpr int kSupportMax = 64;
inline constexpr uint32_t kTableTotal = 1u << 16;

// Per-element Gaussian model (mu, sigma) for a block of symbols.
struct EntropyParams {
  Tensor mu;
  Tensor sigma;
};

// Integer symbols plus the extents they decode to.
struct QuantizedLatents {
  Shape shape;
  std::vector<int32_t> symbols;
};

double gauss_cdf(double x);

// Mass of the unit bin centered on integer k under N(mu, sigma):
// cdf((k + 0.5 - mu) / sigma) - cdf((k - 0.5 - mu) / sigma).
double pmf_discretized_gaussian(int k, double mu, double sigma);

// -log2(max(bin mass at y, 2^-16)); `y` need not be an integer (during
// training it carries additive uniform noise).
double bits_upper_clamped(double y, double mu, double sigma);

struct BitsGrad {
  double d_value = 0.0, d_mu = 0.0, d_sigma = 0.0;
};
BitsGrad bits_gradient(double y, double mu, double sigma);

// Quantized CDF over the 129 support buckets plus one escape bucket.
// Frequencies are floor-quantized with a one-count reservation per bucket
// and largest-remainder correction (ties to the lower bucket index), so the
// table sums to exactly 2^16, every bucket has freq >= 1, and the
// construction is a pure function of (mu, sigma).
class CdfTable {
 public:
  static constexpr int kBuckets = 2 * kSupportMax + 2;  // incl. escape
  static constexpr int kEscape = kBuckets - 1;

  static CdfTable from_gaussian(double mu, double sigma);

  uint32_t cum(int bucket) const { return cum_[bucket]; }
  uint32_t freq(int bucket) const { return cum_[bucket + 1] - cum_[bucket]; }
  // Bucket whose [cum, cum+freq) interval contains f.
  int find(uint32_t f) const;

  bool operator==(const CdfTable&) const = default;

 private:
  std::vector<uint32_t> cum_;  // kBuckets + 1 entries, cum_[0] = 0
};

// Byte-oriented range coder: 32-bit range, 16-bit probability precision,
// carry propagation via a pending-0xFF cache. The first emitted byte is
// always zero and is skipped by the decoder.
class RangeEncoder {
 public:
  void encode(uint32_t cum, uint32_t freq);
  void encode_symbol(int32_t symbol, const CdfTable& table);
  // Flushes the coder; the encoder cannot be reused afterwards.
  std::vector<uint8_t> finish();

 private:
  void shift_low();
  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  std::vector<uint8_t> bytes_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> bytes);
  int32_t decode_symbol(const CdfTable& table);

 private:
  uint8_t next_byte();
  uint32_t decode_freq();
  void decode_update(uint32_t cum, uint32_t freq);
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

// Bulk helpers used by the codecs: symbols are coded in order under
// per-element models; a null mu means all-zero means (the mean-shifted
// quantization path). Symbols must fit in [-32768, 32767].
std::vector<uint8_t> encode_symbols(std::span<const int32_t> symbols,
                                    const float* mu, const float* sigma);
std::vector<int32_t> decode_symbols(std::span<const uint8_t> bytes,
                                    const float* mu, const float* sigma,
                                    size_t count);

// Sum of bits_upper_clamped over a tensor of (possibly noisy) values.
double estimate_bits(const Tensor& values, const Tensor& mu, const Tensor& sigma);

// Mean-shifted quantization: symbols = round(y - mu) clamped to the escape
// literal range, dequant = symbols + mu.
struct Quantized {
  std::vector<int32_t> symbols;
  Tensor dequant;
};
Quantized quantize_mean_shifted(const Tensor& y, const Tensor& mu);

// Maps a raw network output to an admissible scale: max(softplus(x), 0.11).
float sigma_activation(float raw);
Tensor sigma_map_from_raw(const Tensor& raw);

}  // namespace nvc::entropy

#endif
