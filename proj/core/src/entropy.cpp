#include "nvc/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nvc/errors.hpp"

namespace nvc::entropy {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr uint32_t kTopValue = 1u << 24;

double gauss_pdf(double x) {
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

}  // namespace

double gauss_cdf(double x) {
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double pmf_discretized_gaussian(int k, double mu, double sigma) {
  contract(sigma > 0.0, "pmf: sigma must be positive");
  // Evaluate on the lower tail for precision; the bin mass is symmetric
  // under (k - mu) -> (mu - k).
  const double center = std::fabs(double(k) - mu);
  const double hi = gauss_cdf((-center + 0.5) / sigma);
  const double lo = gauss_cdf((-center - 0.5) / sigma);
  return hi - lo;
}

double bits_upper_clamped(double y, double mu, double sigma) {
  const double center = std::fabs(y - mu);
  const double hi = gauss_cdf((-center + 0.5) / sigma);
  const double lo = gauss_cdf((-center - 0.5) / sigma);
  const double mass = std::max(hi - lo, kPmfFloor);
  return -std::log2(mass);
}

BitsGrad bits_gradient(double y, double mu, double sigma) {
  const double a = (y - mu + 0.5) / sigma;
  const double b = (y - mu - 0.5) / sigma;
  const double mass = gauss_cdf(a) - gauss_cdf(b);
  BitsGrad g;
  if (mass <= kPmfFloor) return g;  // clamped region: no gradient
  const double dbits_dmass = -1.0 / (mass * M_LN2);
  const double pa = gauss_pdf(a), pb = gauss_pdf(b);
  const double dmass_dy = (pa - pb) / sigma;
  const double dmass_dsigma = -(a * pa - b * pb) / sigma;
  g.d_value = dbits_dmass * dmass_dy;
  g.d_mu = -g.d_value;
  g.d_sigma = dbits_dmass * dmass_dsigma;
  return g;
}

CdfTable CdfTable::from_gaussian(double mu, double sigma) {
  sigma = std::max(sigma, double(kSigmaMin));
  double pmf[kBuckets];
  double total = 0.0;
  for (int k = -kSupportMax; k <= kSupportMax; ++k) {
    const double p = std::max(pmf_discretized_gaussian(k, mu, sigma), kPmfFloor);
    pmf[k + kSupportMax] = p;
    total += p;
  }
  const double support_mass =
      gauss_cdf((kSupportMax + 0.5 - mu) / sigma) -
      gauss_cdf((-kSupportMax - 0.5 - mu) / sigma);
  const double escape = std::max(1.0 - support_mass, kPmfFloor);
  pmf[kEscape] = escape;
  total += escape;

  // Reserve one count per bucket, floor-quantize the rest, then hand the
  // deficit to the largest remainders (lower bucket index wins ties).
  const double budget = double(kTableTotal - kBuckets);
  uint32_t freq[kBuckets];
  double remainder[kBuckets];
  uint32_t assigned = 0;
  for (int i = 0; i < kBuckets; ++i) {
    const double scaled = pmf[i] / total * budget;
    const double fl = std::floor(scaled);
    freq[i] = 1 + uint32_t(fl);
    remainder[i] = scaled - fl;
    assigned += freq[i];
  }
  int deficit = int(kTableTotal - assigned);
  if (deficit > 0) {
    int order[kBuckets];
    std::iota(order, order + kBuckets, 0);
    std::sort(order, order + kBuckets, [&](int a, int b) {
      if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
      return a < b;
    });
    for (int j = 0; j < deficit; ++j) freq[order[j]] += 1;
  }

  CdfTable t;
  t.cum_.resize(kBuckets + 1);
  t.cum_[0] = 0;
  for (int i = 0; i < kBuckets; ++i) t.cum_[i + 1] = t.cum_[i] + freq[i];
  return t;
}

int CdfTable::find(uint32_t f) const {
  const auto it = std::upper_bound(cum_.begin() + 1, cum_.end(), f);
  return int(it - cum_.begin()) - 1;
}

void RangeEncoder::shift_low() {
  if (uint32_t(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    uint8_t out = cache_;
    const uint8_t carry = uint8_t(low_ >> 32);
    do {
      bytes_.push_back(uint8_t(out + carry));
      out = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = uint8_t(uint32_t(low_) >> 24);
  }
  ++cache_size_;
  low_ = uint64_t(uint32_t(low_) << 8);
}

void RangeEncoder::encode(uint32_t cum, uint32_t freq) {
  const uint32_t r = range_ >> 16;
  low_ += uint64_t(r) * cum;
  range_ = r * freq;
  while (range_ < kTopValue) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode_symbol(int32_t symbol, const CdfTable& table) {
  if (symbol >= -kSupportMax && symbol <= kSupportMax) {
    const int bucket = symbol + kSupportMax;
    encode(table.cum(bucket), table.freq(bucket));
    return;
  }
  contract(symbol >= -32768 && symbol <= 32767,
           "range_encode: symbol " + std::to_string(symbol) +
               " exceeds the escape literal range");
  encode(table.cum(CdfTable::kEscape), table.freq(CdfTable::kEscape));
  encode(uint32_t(symbol + 32768), 1);  // raw 16-bit literal
}

std::vector<uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(bytes_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> bytes) : bytes_(bytes) {
  next_byte();  // leading zero byte from the encoder cache
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  if (pos_ >= bytes_.size()) {
    throw CorruptionError("range_decode: stream exhausted");
  }
  return bytes_[pos_++];
}

uint32_t RangeDecoder::decode_freq() {
  const uint32_t r = range_ >> 16;
  return std::min(code_ / r, kTableTotal - 1);
}

void RangeDecoder::decode_update(uint32_t cum, uint32_t freq) {
  const uint32_t r = range_ >> 16;
  code_ -= cum * r;
  range_ = r * freq;
  while (range_ < kTopValue) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

int32_t RangeDecoder::decode_symbol(const CdfTable& table) {
  const uint32_t f = decode_freq();
  const int bucket = table.find(f);
  decode_update(table.cum(bucket), table.freq(bucket));
  if (bucket != CdfTable::kEscape) {
    return bucket - kSupportMax;
  }
  const uint32_t literal = decode_freq();
  decode_update(literal, 1);
  return int32_t(literal) - 32768;
}

std::vector<uint8_t> encode_symbols(std::span<const int32_t> symbols,
                                    const float* mu, const float* sigma) {
  RangeEncoder enc;
  for (size_t i = 0; i < symbols.size(); ++i) {
    const double m = mu ? mu[i] : 0.0;
    const CdfTable table = CdfTable::from_gaussian(m, sigma[i]);
    enc.encode_symbol(symbols[i], table);
  }
  return enc.finish();
}

std::vector<int32_t> decode_symbols(std::span<const uint8_t> bytes,
                                    const float* mu, const float* sigma,
                                    size_t count) {
  RangeDecoder dec(bytes);
  std::vector<int32_t> out(count);
  for (size_t i = 0; i < count; ++i) {
    const double m = mu ? mu[i] : 0.0;
    const CdfTable table = CdfTable::from_gaussian(m, sigma[i]);
    out[i] = dec.decode_symbol(table);
  }
  return out;
}

double estimate_bits(const Tensor& values, const Tensor& mu, const Tensor& sigma) {
  contract(values.shape() == mu.shape() && values.shape() == sigma.shape(),
           "estimate_bits: shape mismatch");
  const float* v = values.data();
  const float* m = mu.data();
  const float* s = sigma.data();
  double bits = 0.0;
  for (int64_t i = 0; i < values.numel(); ++i) {
    bits += bits_upper_clamped(v[i], m[i], s[i]);
  }
  return bits;
}

Quantized quantize_mean_shifted(const Tensor& y, const Tensor& mu) {
  contract(y.shape() == mu.shape(), "quantize: shape mismatch");
  Quantized q;
  q.symbols.resize(size_t(y.numel()));
  q.dequant = Tensor(y.shape());
  const float* yp = y.data();
  const float* mp = mu.data();
  float* dp = q.dequant.data();
  for (int64_t i = 0; i < y.numel(); ++i) {
    const float r = std::nearbyint(yp[i] - mp[i]);
    const int32_t s = int32_t(std::clamp(r, -32768.0f, 32767.0f));
    q.symbols[size_t(i)] = s;
    dp[i] = float(s) + mp[i];
  }
  return q;
}

float sigma_activation(float raw) {
  const float sp = raw > 20.0f ? raw : std::log1p(std::exp(raw));
  return std::max(sp, kSigmaMin);
}

Tensor sigma_map_from_raw(const Tensor& raw) {
  Tensor out(raw.shape());
  const float* rp = raw.data();
  float* op = out.data();
  for (int64_t i = 0; i < raw.numel(); ++i) op[i] = sigma_activation(rp[i]);
  return out;
}

}  // namespace nvc::entropy
