#ifndef NVC_TENSOR_HPP
#define NVC_TENSOR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nvc/errors.hpp"

namespace nvc {

// Extents of a rank-4 array: (batch, channels, height, width).
struct Shape {
  int n = 0, c = 0, h = 0, w = 0;

  int64_t numel() const {
    return int64_t(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Dense float32 array in NCHW row-major layout. Values produced by the
// exported ops are always finite; ops validate this on output.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s, float fill = 0.0f);
  Tensor(Shape s, std::vector<float> data);

  const Shape& shape() const { return shape_; }
  int64_t numel() const { return shape_.numel(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& vec() { return data_; }
  const std::vector<float>& vec() const { return data_; }

  float& at(int n, int c, int y, int x) {
    return data_[((int64_t(n) * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }
  float at(int n, int c, int y, int x) const {
    return data_[((int64_t(n) * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }
  // Pointer to the start of one (n, c) plane.
  float* plane(int n, int c) {
    return data_.data() + (int64_t(n) * shape_.c + c) * shape_.h * shape_.w;
  }
  const float* plane(int n, int c) const {
    return data_.data() + (int64_t(n) * shape_.c + c) * shape_.h * shape_.w;
  }

  bool all_finite() const;
  void check_finite(const char* op_name) const;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Trainable tensor: value plus accumulated gradient. Frozen parameters
// receive no gradient accumulation and are skipped by optimizers.
struct Parameter {
  Tensor value;
  Tensor grad;
  bool frozen = false;

  Parameter() = default;
  explicit Parameter(Tensor v) : value(std::move(v)), grad(value.shape()) {}

  void zero_grad() {
    std::fill(grad.vec().begin(), grad.vec().end(), 0.0f);
  }
};

}  // namespace nvc

#endif
