#include "nvc/autodiff.hpp"

namespace nvc {

Value Tape::leaf(Tensor v) {
  nodes_.push_back(Node{std::move(v), {}, nullptr, nullptr});
  return Value{int(nodes_.size()) - 1};
}

Value Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Value{it->second};
  nodes_.push_back(Node{p.value, {}, nullptr, &p});
  const int id = int(nodes_.size()) - 1;
  param_nodes_.emplace(&p, id);
  return Value{id};
}

Value Tape::emit(const char* op_name, Tensor out, BackwardFn fn) {
  out.check_finite(op_name);
  nodes_.push_back(Node{std::move(out), {}, std::move(fn), nullptr});
  return Value{int(nodes_.size()) - 1};
}

void Tape::accumulate(Value v, const Tensor& g) {
  Node& node = nodes_[v.id];
  contract(g.shape() == node.value.shape(),
           "gradient shape " + g.shape().str() + " does not match value " +
               node.value.shape().str());
  if (node.grad.empty()) {
    node.grad = g;
    return;
  }
  float* dst = node.grad.data();
  const float* src = g.data();
  const int64_t count = g.numel();
  for (int64_t i = 0; i < count; ++i) dst[i] += src[i];
}

void Tape::backward(Value loss) {
  contract(loss.valid() && loss.id < int(nodes_.size()), "backward: invalid loss node");
  const Shape ls = nodes_[loss.id].value.shape();
  contract(ls.numel() == 1, "backward: loss must be scalar, got " + ls.str());

  accumulate(loss, Tensor(ls, 1.0f));
  for (int id = loss.id; id >= 0; --id) {
    Node& node = nodes_[id];
    if (node.grad.empty()) continue;
    if (node.backward) {
      node.backward(*this, node.grad);
      // Interior gradients are no longer needed once propagated.
      node.grad = Tensor();
    } else if (node.bound_param && !node.bound_param->frozen) {
      Parameter& p = *node.bound_param;
      float* dst = p.grad.data();
      const float* src = node.grad.data();
      const int64_t count = node.grad.numel();
      for (int64_t i = 0; i < count; ++i) dst[i] += src[i];
    }
  }
}

}  // namespace nvc
