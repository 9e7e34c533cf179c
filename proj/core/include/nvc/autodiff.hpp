#ifndef NVC_AUTODIFF_HPP
#define NVC_AUTODIFF_HPP

#include <functional>
#include <unordered_map>
#include <vector>

#include "nvc/tensor.hpp"

namespace nvc {

// Handle to a node on a Tape.
struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over the exported op set. Nodes are appended in
// topological order by construction; backward walks them in reverse.
// One tape = one graph; gradient accumulation is single-threaded.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& self_grad)>;

  Value leaf(Tensor v);
  // Leaf bound to a Parameter; repeated calls return the same node.
  // On backward, the node gradient is added to p.grad unless p is frozen.
  Value param(Parameter& p);

  Value emit(const char* op_name, Tensor out, BackwardFn fn);

  const Tensor& value(Value v) const { return nodes_[v.id].value; }
  // Adds g into the gradient slot of v (allocating it on first use).
  void accumulate(Value v, const Tensor& g);
  bool has_grad(Value v) const { return !nodes_[v.id].grad.empty(); }
  const Tensor& grad(Value v) const { return nodes_[v.id].grad; }

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node,
  // then accumulates into the bound Parameters (skipping frozen ones).
  void backward(Value loss);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* bound_param = nullptr;
  };
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
};

}  // namespace nvc

#endif
