#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "mtvqa/autodiff/tensor.hpp"

namespace mtvqa::ad {

/// Handle to a node of a Graph.
struct Var {
  std::uint32_t id = 0;
};

/// Tape of tensor-valued nodes for one forward/backward pass. Nodes are
/// appended in evaluation order, so reverse insertion order is a valid
/// reverse topological order.
///
/// Parameter leaves alias the parameter's storage: the forward pass reads
/// `Parameter::value` without copying and the backward pass accumulates
/// straight into `Parameter::grad`. Leaves made from a const Parameter are
/// read-only and receive no gradient.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, Var self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var param(Parameter& p);
  Var param(const Parameter& p);

  /// Appends an operator node. `backward` reads grad(self) and adds into
  /// the gradients of those parents for which requires_grad() holds. It is
  /// dropped when no parent requires a gradient.
  Var make(Tensor value, std::span<const Var> parents, const char* op, BackwardFn backward);
  Var make(Tensor value, std::initializer_list<Var> parents, const char* op, BackwardFn backward) {
    return make(std::move(value), std::span<const Var>(parents.begin(), parents.size()), op,
                std::move(backward));
  }

  const Tensor& value(Var v) const;
  /// Gradient buffer of `v`, zero-allocated on first access. Parameter
  /// leaves return the parameter's own accumulator.
  Tensor& grad(Var v);
  bool has_grad(Var v) const { return nodes_[v.id].touched; }
  bool requires_grad(Var v) const { return nodes_[v.id].needs_grad; }
  const char* op(Var v) const { return nodes_[v.id].op; }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(out)/d(out) = seed on every element of `out` and propagates.
  void backward(Var out, double seed = 1.0);

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    const Tensor* alias = nullptr;
    Parameter* param = nullptr;
    bool needs_grad = false;
    bool touched = false;
    const char* op = "const";
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

}  // namespace mtvqa::ad
