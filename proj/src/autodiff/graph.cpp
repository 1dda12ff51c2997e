#include "mtvqa/autodiff/graph.hpp"

#include "mtvqa/error.hpp"

namespace mtvqa::ad {

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::param(Parameter& p) {
  Node n;
  n.alias = &p.value;
  n.param = &p;
  n.needs_grad = p.trainable;
  n.op = "param";
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::param(const Parameter& p) {
  Node n;
  n.alias = &p.value;
  n.op = "param";
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::make(Tensor value, std::span<const Var> parents, const char* op, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (auto p : parents) {
    if (nodes_[p.id].needs_grad) {
      n.needs_grad = true;
      break;
    }
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Graph::value(Var v) const {
  const auto& n = nodes_[v.id];
  return n.alias ? *n.alias : n.value;
}

Tensor& Graph::grad(Var v) {
  auto& n = nodes_[v.id];
  n.touched = true;
  if (n.param) return n.param->grad;
  if (n.grad.empty()) n.grad = Tensor(value(v).shape());
  return n.grad;
}

void Graph::backward(Var out, double seed) {
  if (out.id >= nodes_.size()) throw ShapeError("backward: unknown node");
  if (!nodes_[out.id].needs_grad) return;
  auto& g = grad(out);
  for (auto& x : g.values()) x += seed;
  for (std::size_t i = out.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.touched || !n.backward) continue;
    // Backward rules never append nodes, so `n` stays valid during the call.
    n.backward(*this, Var{static_cast<std::uint32_t>(i)});
  }
}

}  // namespace mtvqa::ad
