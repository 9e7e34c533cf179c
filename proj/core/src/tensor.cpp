#include "nvc/tensor.hpp"

#include <cmath>

namespace nvc {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + ")";
}

Tensor::Tensor(Shape s, float fill) : shape_(s) {
  contract(s.n >= 0 && s.c >= 0 && s.h >= 0 && s.w >= 0,
           "tensor extents must be nonnegative, got " + s.str());
  data_.assign(size_t(s.numel()), fill);
}

Tensor::Tensor(Shape s, std::vector<float> data) : shape_(s), data_(std::move(data)) {
  contract(int64_t(data_.size()) == s.numel(),
           "tensor data length " + std::to_string(data_.size()) +
               " does not match extents " + s.str());
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::check_finite(const char* op_name) const {
  if (!all_finite()) {
    throw ContractError(std::string(op_name) + " produced a non-finite value");
  }
}

}  // namespace nvc
