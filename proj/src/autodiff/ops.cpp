#include "mtvqa/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mtvqa/error.hpp"

namespace mtvqa::ad {

namespace {

void require(bool cond, const char* op, const std::string& what) {
  if (!cond) throw ShapeError(std::string(op) + ": " + what);
}

void require_rank2(const Tensor& t, const char* op, const char* name) {
  require(t.rank() == 2, op, std::string(name) + " must be rank 2, got " + shape_string(t.shape()));
}

}  // namespace

Var affine(Graph& g, Var x, Var w, Var b) {
  const Tensor& X = g.value(x);
  const Tensor& W = g.value(w);
  const Tensor& B = g.value(b);
  require_rank2(X, "affine", "input");
  require_rank2(W, "affine", "weight");
  require_rank2(B, "affine", "bias");
  const std::size_t rows = X.rows(), in = X.cols(), out = W.cols();
  require(W.rows() == in, "affine",
          "input " + shape_string(X.shape()) + " incompatible with weight " + shape_string(W.shape()));
  require(B.rows() == 1 && B.cols() == out, "affine",
          "bias " + shape_string(B.shape()) + " incompatible with weight " + shape_string(W.shape()));

  Tensor Y({rows, out});
  for (std::size_t r = 0; r < rows; ++r) {
    double* y = &Y[r * out];
    std::copy_n(&B[0], out, y);
    const double* xr = &X[r * in];
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      if (xi == 0.0) continue;
      const double* wr = &W[i * out];
      for (std::size_t j = 0; j < out; ++j) y[j] += xi * wr[j];
    }
  }

  return g.make(std::move(Y), {x, w, b}, "affine", [x, w, b, rows, in, out](Graph& g, Var self) {
    const Tensor& G = g.grad(self);
    const Tensor& X = g.value(x);
    const Tensor& W = g.value(w);
    if (g.requires_grad(x)) {
      Tensor& dX = g.grad(x);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = &G[r * out];
        for (std::size_t i = 0; i < in; ++i) {
          const double* wr = &W[i * out];
          double acc = 0.0;
          for (std::size_t j = 0; j < out; ++j) acc += gr[j] * wr[j];
          dX[r * in + i] += acc;
        }
      }
    }
    if (g.requires_grad(w)) {
      Tensor& dW = g.grad(w);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = &G[r * out];
        for (std::size_t i = 0; i < in; ++i) {
          const double xi = X[r * in + i];
          if (xi == 0.0) continue;
          double* dw = &dW[i * out];
          for (std::size_t j = 0; j < out; ++j) dw[j] += xi * gr[j];
        }
      }
    }
    if (g.requires_grad(b)) {
      Tensor& dB = g.grad(b);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < out; ++j) dB[j] += G[r * out + j];
    }
  });
}

Var conv1d(Graph& g, Var x, Var w, Var b, std::size_t width) {
  const Tensor& X = g.value(x);
  const Tensor& W = g.value(w);
  const Tensor& B = g.value(b);
  require_rank2(X, "conv1d", "input");
  require_rank2(W, "conv1d", "weight");
  require_rank2(B, "conv1d", "bias");
  require(width >= 1, "conv1d", "width must be positive");
  const std::size_t steps = X.rows(), embed = X.cols(), filters = W.cols();
  const std::size_t window = width * embed;
  require(steps >= width, "conv1d",
          "sequence length " + std::to_string(steps) + " shorter than width " + std::to_string(width));
  require(W.rows() == window, "conv1d",
          "weight " + shape_string(W.shape()) + " does not match width " + std::to_string(width) +
              " x embed " + std::to_string(embed));
  require(B.rows() == 1 && B.cols() == filters, "conv1d", "bias " + shape_string(B.shape()));

  const std::size_t out_steps = steps - width + 1;
  Tensor Y({out_steps, filters});
  for (std::size_t t = 0; t < out_steps; ++t) {
    double* y = &Y[t * filters];
    std::copy_n(&B[0], filters, y);
    // Rows t..t+width-1 are contiguous in row-major storage.
    const double* xw = &X[t * embed];
    for (std::size_t k = 0; k < window; ++k) {
      const double xk = xw[k];
      if (xk == 0.0) continue;
      const double* wr = &W[k * filters];
      for (std::size_t f = 0; f < filters; ++f) y[f] += xk * wr[f];
    }
  }

  return g.make(std::move(Y), {x, w, b}, "conv1d",
                [x, w, b, embed, filters, window, out_steps](Graph& g, Var self) {
                  const Tensor& G = g.grad(self);
                  const Tensor& X = g.value(x);
                  const Tensor& W = g.value(w);
                  if (g.requires_grad(x)) {
                    Tensor& dX = g.grad(x);
                    for (std::size_t t = 0; t < out_steps; ++t) {
                      const double* gr = &G[t * filters];
                      double* dx = &dX[t * embed];
                      for (std::size_t k = 0; k < window; ++k) {
                        const double* wr = &W[k * filters];
                        double acc = 0.0;
                        for (std::size_t f = 0; f < filters; ++f) acc += gr[f] * wr[f];
                        dx[k] += acc;
                      }
                    }
                  }
                  if (g.requires_grad(w)) {
                    Tensor& dW = g.grad(w);
                    for (std::size_t t = 0; t < out_steps; ++t) {
                      const double* gr = &G[t * filters];
                      const double* xw = &X[t * embed];
                      for (std::size_t k = 0; k < window; ++k) {
                        const double xk = xw[k];
                        if (xk == 0.0) continue;
                        double* dw = &dW[k * filters];
                        for (std::size_t f = 0; f < filters; ++f) dw[f] += xk * gr[f];
                      }
                    }
                  }
                  if (g.requires_grad(b)) {
                    Tensor& dB = g.grad(b);
                    for (std::size_t t = 0; t < out_steps; ++t)
                      for (std::size_t f = 0; f < filters; ++f) dB[f] += G[t * filters + f];
                  }
                });
}

Var max_over_time(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  require_rank2(X, "max_over_time", "input");
  const std::size_t steps = X.rows(), cols = X.cols();
  Tensor Y({1, cols});
  std::vector<std::size_t> argmax(cols, 0);
  for (std::size_t c = 0; c < cols; ++c) {
    double best = X[c];
    for (std::size_t t = 1; t < steps; ++t) {
      if (X[t * cols + c] > best) {
        best = X[t * cols + c];
        argmax[c] = t;
      }
    }
    Y[c] = best;
  }
  return g.make(std::move(Y), {x}, "max_over_time", [x, cols, argmax = std::move(argmax)](Graph& g, Var self) {
    const Tensor& G = g.grad(self);
    Tensor& dX = g.grad(x);
    for (std::size_t c = 0; c < cols; ++c) dX[argmax[c] * cols + c] += G[c];
  });
}

Var tanh(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = std::tanh(X[i]);
  return g.make(std::move(Y), {x}, "tanh", [x](Graph& g, Var self) {
    const Tensor& G = g.grad(self);
    const Tensor& Y = g.value(self);
    Tensor& dX = g.grad(x);
    for (std::size_t i = 0; i < Y.size(); ++i) dX[i] += G[i] * (1.0 - Y[i] * Y[i]);
  });
}

Var sigmoid(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double v = X[i];
    if (v >= 0.0) {
      Y[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      Y[i] = e / (1.0 + e);
    }
  }
  return g.make(std::move(Y), {x}, "sigmoid", [x](Graph& g, Var self) {
    const Tensor& G = g.grad(self);
    const Tensor& Y = g.value(self);
    Tensor& dX = g.grad(x);
    for (std::size_t i = 0; i < Y.size(); ++i) dX[i] += G[i] * Y[i] * (1.0 - Y[i]);
  });
}

Var add(Graph& g, Var a, Var b) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  require(A.shape() == B.shape(), "add", shape_string(A.shape()) + " vs " + shape_string(B.shape()));
  Tensor Y(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) Y[i] = A[i] + B[i];
  return g.make(std::move(Y), {a, b}, "add", [a, b](Graph& g, Var self) {
    const Tensor& G = g.grad(self);
    for (Var p : {a, b}) {
      if (!g.requires_grad(p)) continue;
      Tensor& dP = g.grad(p);
      for (std::size_t i = 0; i < G.size(); ++i) dP[i] += G[i];
    }
  });
}

Var mul(Graph& g, Var a, Var b) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  require(A.shape() == B.shape(), "mul", shape_string(A.shape()) + " vs " + shape_string(B.shape()));
  Tensor Y(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) Y[i] = A[i] * B[i];
  return g.make(std::move(Y), {a, b}, "mul", [a, b](Graph& g, Var self) {
    const Tensor& G = g.grad(self);
    const Tensor& A = g.value(a);
    const Tensor& B = g.value(b);
    if (g.requires_grad(a)) {
      Tensor& dA = g.grad(a);
      for (std::size_t i = 0; i < G.size(); ++i) dA[i] += G[i] * B[i];
    }
    if (g.requires_grad(b)) {
      Tensor& dB = g.grad(b);
      for (std::size_t i = 0; i < G.size(); ++i) dB[i] += G[i] * A[i];
    }
  });
}

Var concat(Graph& g, std::span<const Var> parts) {
  require(!parts.empty(), "concat", "no inputs");
  const std::size_t rows = g.value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& T = g.value(p);
    require_rank2(T, "concat", "input");
    require(T.rows() == rows, "concat", "row count " + std::to_string(T.rows()) + " vs " + std::to_string(rows));
    widths.push_back(T.cols());
    total += T.cols();
  }
  Tensor Y({rows, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& T = g.value(parts[k]);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(&T[r * widths[k]], widths[k], &Y[r * total + offset]);
    offset += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.make(std::move(Y), parts, "concat",
                [inputs = std::move(inputs), widths = std::move(widths), rows, total](Graph& g, Var self) {
                  const Tensor& G = g.grad(self);
                  std::size_t offset = 0;
                  for (std::size_t k = 0; k < inputs.size(); ++k) {
                    if (g.requires_grad(inputs[k])) {
                      Tensor& dP = g.grad(inputs[k]);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < widths[k]; ++c) dP[r * widths[k] + c] += G[r * total + offset + c];
                    }
                    offset += widths[k];
                  }
                });
}

Var slice_cols(Graph& g, Var x, std::size_t begin, std::size_t count) {
  const Tensor& X = g.value(x);
  require_rank2(X, "slice_cols", "input");
  require(count > 0 && begin + count <= X.cols(), "slice_cols",
          "range [" + std::to_string(begin) + "," + std::to_string(begin + count) + ") outside " +
              shape_string(X.shape()));
  const std::size_t rows = X.rows(), cols = X.cols();
  Tensor Y({rows, count});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(&X[r * cols + begin], count, &Y[r * count]);
  return g.make(std::move(Y), {x}, "slice_cols", [x, begin, count, rows, cols](Graph& g, Var self) {
    const Tensor& G = g.grad(self);
    Tensor& dX = g.grad(x);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < count; ++c) dX[r * cols + begin + c] += G[r * count + c];
  });
}

Var select_row(Graph& g, Var x, std::size_t row) {
  const Tensor& X = g.value(x);
  require_rank2(X, "select_row", "input");
  require(row < X.rows(), "select_row", "row " + std::to_string(row) + " outside " + shape_string(X.shape()));
  const std::size_t cols = X.cols();
  Tensor Y({1, cols});
  std::copy_n(&X[row * cols], cols, &Y[0]);
  return g.make(std::move(Y), {x}, "select_row", [x, row, cols](Graph& g, Var self) {
    const Tensor& G = g.grad(self);
    Tensor& dX = g.grad(x);
    for (std::size_t c = 0; c < cols; ++c) dX[row * cols + c] += G[c];
  });
}

Var embedding(Graph& g, Var table, std::span<const int> ids) {
  const Tensor& T = g.value(table);
  require_rank2(T, "embedding", "table");
  require(!ids.empty(), "embedding", "empty id sequence");
  const std::size_t vocab = T.rows(), dim = T.cols();
  for (int id : ids) {
    require(id >= 0 && static_cast<std::size_t>(id) < vocab, "embedding",
            "id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab));
  }
  Tensor Y({ids.size(), dim});
  for (std::size_t t = 0; t < ids.size(); ++t) std::copy_n(&T[ids[t] * dim], dim, &Y[t * dim]);
  std::vector<int> held(ids.begin(), ids.end());
  return g.make(std::move(Y), {table}, "embedding", [table, dim, held = std::move(held)](Graph& g, Var self) {
    const Tensor& G = g.grad(self);
    Tensor& dT = g.grad(table);
    for (std::size_t t = 0; t < held.size(); ++t) {
      if (held[t] == 0) continue;  // padding row is never trained
      double* d = &dT[static_cast<std::size_t>(held[t]) * dim];
      for (std::size_t c = 0; c < dim; ++c) d[c] += G[t * dim + c];
    }
  });
}

double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : xs) m = std::max(m, v);
  double s = 0.0;
  for (double v : xs) s += std::exp(v - m);
  return m + std::log(s);
}

Var softmax_cross_entropy_masked(Graph& g, std::span<const Var> logits, std::span<const int> targets,
                                 std::span<const std::uint8_t> mask) {
  require(logits.size() == targets.size() && logits.size() == mask.size(), "softmax_cross_entropy",
          std::to_string(logits.size()) + " heads, " + std::to_string(targets.size()) + " targets, " +
              std::to_string(mask.size()) + " mask flags");
  double loss = 0.0;
  for (std::size_t h = 0; h < logits.size(); ++h) {
    const Tensor& Z = g.value(logits[h]);
    require(Z.rank() == 2 && Z.rows() == 1, "softmax_cross_entropy",
            "head " + std::to_string(h) + " logits must be [1,K], got " + shape_string(Z.shape()));
    if (!mask[h]) continue;
    const int t = targets[h];
    if (t < 0 || static_cast<std::size_t>(t) >= Z.cols()) {
      throw Error("autodiff", "range",
                  "softmax_cross_entropy: target " + std::to_string(t) + " out of range for head " +
                      std::to_string(h) + " with " + std::to_string(Z.cols()) + " classes");
    }
    loss += log_sum_exp(Z.values()) - Z[static_cast<std::size_t>(t)];
  }
  std::vector<Var> heads(logits.begin(), logits.end());
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<std::uint8_t> msk(mask.begin(), mask.end());
  return g.make(Tensor({1, 1}, loss), logits, "softmax_cross_entropy",
                [heads = std::move(heads), tgt = std::move(tgt), msk = std::move(msk)](Graph& g, Var self) {
                  const double up = g.grad(self)[0];
                  for (std::size_t h = 0; h < heads.size(); ++h) {
                    if (!msk[h] || !g.requires_grad(heads[h])) continue;
                    const Tensor& Z = g.value(heads[h]);
                    const double lse = log_sum_exp(Z.values());
                    Tensor& dZ = g.grad(heads[h]);
                    for (std::size_t k = 0; k < Z.size(); ++k) {
                      const double p = std::exp(Z[k] - lse);
                      dZ[k] += up * (p - (static_cast<int>(k) == tgt[h] ? 1.0 : 0.0));
                    }
                  }
                });
}

LstmState lstm_step(Graph& g, Var x, LstmState prev, const LstmWeights& weights) {
  const Tensor& X = g.value(x);
  const Tensor& H = g.value(prev.h);
  const Tensor& C = g.value(prev.c);
  const Tensor& W = g.value(weights.w);
  require_rank2(X, "lstm_step", "input");
  require(X.rows() == 1 && H.rows() == 1 && C.rows() == 1, "lstm_step", "input and state must be single rows");
  const std::size_t hidden = H.cols();
  require(C.cols() == hidden, "lstm_step",
          "cell " + shape_string(C.shape()) + " vs hidden " + shape_string(H.shape()));
  require(W.rank() == 2 && W.rows() == X.cols() + hidden && W.cols() == 4 * hidden, "lstm_step",
          "weight " + shape_string(W.shape()) + " incompatible with input " + shape_string(X.shape()) +
              " and hidden " + std::to_string(hidden));

  Var gates = affine(g, concat(g, {x, prev.h}), weights.w, weights.b);
  Var in_gate = sigmoid(g, slice_cols(g, gates, 0, hidden));
  Var forget_gate = sigmoid(g, slice_cols(g, gates, hidden, hidden));
  Var out_gate = sigmoid(g, slice_cols(g, gates, 2 * hidden, hidden));
  Var candidate = tanh(g, slice_cols(g, gates, 3 * hidden, hidden));
  Var c = add(g, mul(g, forget_gate, prev.c), mul(g, in_gate, candidate));
  Var h = mul(g, out_gate, tanh(g, c));
  return {h, c};
}

}  // namespace mtvqa::ad
