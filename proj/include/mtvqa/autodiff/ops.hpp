#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mtvqa/autodiff/graph.hpp"

namespace mtvqa::ad {

// Differentiable operators. All operate on rank-2 tensors (rows x cols);
// a feature vector is a single row. Shape violations throw ShapeError
// naming the operator.

/// x[R,in] * W[in,out] + b[1,out], bias broadcast over rows.
Var affine(Graph& g, Var x, Var w, Var b);

/// Valid-padding 1-D convolution over the rows (token positions) of
/// x[T,E] with window `width`. W is [width*E, F], b is [1,F]; the result is
/// [T-width+1, F]. Requires T >= width.
Var conv1d(Graph& g, Var x, Var w, Var b, std::size_t width);

/// Column-wise maximum over rows: [T,F] -> [1,F]. Ties route the gradient
/// to the first maximal row.
Var max_over_time(Graph& g, Var x);

Var tanh(Graph& g, Var x);
Var sigmoid(Graph& g, Var x);
Var add(Graph& g, Var a, Var b);
/// Elementwise (Hadamard) product of equally shaped tensors.
Var mul(Graph& g, Var a, Var b);

/// Concatenation along the feature (column) axis; all parts share a row count.
Var concat(Graph& g, std::span<const Var> parts);
inline Var concat(Graph& g, std::initializer_list<Var> parts) {
  return concat(g, std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(Graph& g, Var x, std::size_t begin, std::size_t count);
Var select_row(Graph& g, Var x, std::size_t row);

/// Gathers rows of `table` ([V,E]) for `ids` -> [ids.size(), E]. Row 0 is
/// the padding row: it is read like any other row but never receives a
/// gradient.
Var embedding(Graph& g, Var table, std::span<const int> ids);

/// Sum over heads of -log softmax(logits[h])[targets[h]] for heads with
/// mask[h] set. Masked heads contribute nothing to the loss and receive no
/// gradient. Each logits[h] must be [1,K]. Returns a [1,1] node.
Var softmax_cross_entropy_masked(Graph& g, std::span<const Var> logits, std::span<const int> targets,
                                 std::span<const std::uint8_t> mask);

struct LstmWeights {
  Var w;  // [in + hidden, 4*hidden], gate blocks ordered input, forget, output, candidate
  Var b;  // [1, 4*hidden]
};

struct LstmState {
  Var h;
  Var c;
};

/// One LSTM cell step: sigmoid input/forget/output gates, tanh candidate.
LstmState lstm_step(Graph& g, Var x, LstmState prev, const LstmWeights& weights);

/// Reference evaluation helpers shared by tests.
double log_sum_exp(std::span<const double> xs);

}  // namespace mtvqa::ad
