#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "alsim/params.hpp"
#include "alsim/tensor.hpp"

namespace alsim {

/// Reverse-mode autodiff over a dynamic tape. A tape is built fresh for every
/// forward pass (stochastic masks and epsilon draws change per pass), then
/// backward() replays it in reverse and accumulates parameter gradients into
/// the bound ParameterStore. Nodes are appended in creation order, so ids are
/// already a topological order.
class Tape {
 public:
  using Var = int;

  enum class Op {
    kConstant,
    kParam,
    kMatmul,
    kBiasAdd,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kAffine,  // a*x + b elementwise
    kTanh,
    kRelu,
    kLog,
    kExp,
    kSquare,
    kSoftplus,
    kConv1d,
    kMaxOverTime,
    kRowSoftmax,
    kMeanOverRows,
    kConcat,
    kReshape,
    kGatherRows,
    kSumAll,
    kCrossEntropy,
  };

  Var constant(Tensor t) { return push(Op::kConstant, {}, std::move(t)); }

  /// Leases a parameter onto the tape. backward() adds this node's gradient
  /// back into the store. Lease each parameter at most once per tape and
  /// reuse the returned id.
  Var param(ParameterStore& store, const std::string& name) {
    Var id = push(Op::kParam, {}, store.value(name));
    bindings_.push_back({id, &store, name});
    return id;
  }

  // --- primitives -----------------------------------------------------

  Var matmul(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
      throw std::invalid_argument("matmul: incompatible shapes " +
                                  shape_str(A.shape()) + " and " +
                                  shape_str(B.shape()));
    }
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t l = 0; l < k; ++l) {
        const double aval = A.at(i, l);
        if (aval == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) C.at(i, j) += aval * B.at(l, j);
      }
    }
    return push(Op::kMatmul, {a, b}, std::move(C));
  }

  Var bias_add(Var x, Var bias) {
    const Tensor& X = val(x);
    const Tensor& b = val(bias);
    if (X.rank() != 2 || b.rank() != 1 || X.cols() != b.dim(0)) {
      throw std::invalid_argument("bias_add: incompatible shapes " +
                                  shape_str(X.shape()) + " and " +
                                  shape_str(b.shape()));
    }
    Tensor Y = X;
    for (std::size_t i = 0; i < X.rows(); ++i) {
      for (std::size_t j = 0; j < X.cols(); ++j) Y.at(i, j) += b[j];
    }
    return push(Op::kBiasAdd, {x, bias}, std::move(Y));
  }

  Var add(Var a, Var b) { return binary(Op::kAdd, a, b); }
  Var sub(Var a, Var b) { return binary(Op::kSub, a, b); }
  Var mul(Var a, Var b) { return binary(Op::kMul, a, b); }
  Var div(Var a, Var b) { return binary(Op::kDiv, a, b); }

  /// Elementwise a*x + b.
  Var affine(Var x, double a, double b) {
    Tensor Y = val(x);
    for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = a * Y[i] + b;
    Var id = push(Op::kAffine, {x}, std::move(Y));
    nodes_[id].coeff_a = a;
    return id;
  }

  Var tanh(Var x) {
    Tensor Y = val(x);
    for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = std::tanh(Y[i]);
    return push(Op::kTanh, {x}, std::move(Y));
  }

  Var relu(Var x) {
    Tensor Y = val(x);
    for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = std::max(0.0, Y[i]);
    return push(Op::kRelu, {x}, std::move(Y));
  }

  Var log(Var x) {
    Tensor Y = val(x);
    for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = std::log(Y[i]);
    return push(Op::kLog, {x}, std::move(Y));
  }

  Var exp(Var x) {
    Tensor Y = val(x);
    for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = std::exp(Y[i]);
    return push(Op::kExp, {x}, std::move(Y));
  }

  Var square(Var x) {
    Tensor Y = val(x);
    for (std::size_t i = 0; i < Y.size(); ++i) Y[i] *= Y[i];
    return push(Op::kSquare, {x}, std::move(Y));
  }

  Var softplus(Var x) {
    Tensor Y = val(x);
    for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = softplus_val(Y[i]);
    return push(Op::kSoftplus, {x}, std::move(Y));
  }

  /// Valid 1-D convolution over time, stride 1. x is [T x d_in], filters are
  /// [F x w x d_in]; output is [(T-w+1) x F].
  Var conv1d(Var x, Var filters) {
    const Tensor& X = val(x);
    const Tensor& W = val(filters);
    if (X.rank() != 2 || W.rank() != 3 || W.dim(2) != X.cols() ||
        W.dim(1) > X.rows()) {
      throw std::invalid_argument("conv1d: incompatible shapes " +
                                  shape_str(X.shape()) + " and " +
                                  shape_str(W.shape()));
    }
    const std::size_t T = X.rows(), din = X.cols();
    const std::size_t F = W.dim(0), w = W.dim(1);
    const std::size_t To = T - w + 1;
    Tensor Y({To, F});
    for (std::size_t t = 0; t < To; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        double s = 0.0;
        for (std::size_t i = 0; i < w; ++i) {
          for (std::size_t c = 0; c < din; ++c) {
            s += X.at(t + i, c) * W[(f * w + i) * din + c];
          }
        }
        Y.at(t, f) = s;
      }
    }
    return push(Op::kConv1d, {x, filters}, std::move(Y));
  }

  /// Column-wise max over rows: [T x F] -> [F]. First maximal row wins ties.
  Var max_over_time(Var x) {
    const Tensor& X = val(x);
    require_rank(X, 2, "max_over_time");
    const std::size_t T = X.rows(), F = X.cols();
    Tensor Y({F});
    std::vector<long> arg(F, 0);
    for (std::size_t f = 0; f < F; ++f) {
      double best = X.at(0, f);
      for (std::size_t t = 1; t < T; ++t) {
        if (X.at(t, f) > best) {
          best = X.at(t, f);
          arg[f] = static_cast<long>(t);
        }
      }
      Y[f] = best;
    }
    Var id = push(Op::kMaxOverTime, {x}, std::move(Y));
    nodes_[id].iaux = std::move(arg);
    return id;
  }

  Var row_softmax(Var x) {
    const Tensor& X = val(x);
    require_rank(X, 2, "row_softmax");
    Tensor Y = X;
    for (std::size_t i = 0; i < X.rows(); ++i) {
      double mx = Y.at(i, 0);
      for (std::size_t j = 1; j < X.cols(); ++j) mx = std::max(mx, Y.at(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < X.cols(); ++j) {
        Y.at(i, j) = std::exp(Y.at(i, j) - mx);
        sum += Y.at(i, j);
      }
      for (std::size_t j = 0; j < X.cols(); ++j) Y.at(i, j) /= sum;
    }
    return push(Op::kRowSoftmax, {x}, std::move(Y));
  }

  Var mean_over_rows(Var x) {
    const Tensor& X = val(x);
    require_rank(X, 2, "mean_over_rows");
    Tensor Y({X.cols()});
    for (std::size_t i = 0; i < X.rows(); ++i) {
      for (std::size_t j = 0; j < X.cols(); ++j) Y[j] += X.at(i, j);
    }
    for (std::size_t j = 0; j < X.cols(); ++j) {
      Y[j] /= static_cast<double>(X.rows());
    }
    return push(Op::kMeanOverRows, {x}, std::move(Y));
  }

  /// Concatenate along axis 0. All inputs must share rank and trailing dims.
  Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const Tensor& first = val(parts[0]);
    Shape out_shape = first.shape();
    if (out_shape.empty()) throw std::invalid_argument("concat: scalar input");
    std::size_t total = 0;
    for (Var p : parts) {
      const Tensor& t = val(p);
      if (t.rank() != first.rank() ||
          !std::equal(t.shape().begin() + 1, t.shape().end(),
                      first.shape().begin() + 1)) {
        throw std::invalid_argument("concat: incompatible shapes " +
                                    shape_str(first.shape()) + " and " +
                                    shape_str(t.shape()));
      }
      total += t.dim(0);
    }
    out_shape[0] = total;
    Tensor Y(out_shape);
    std::size_t off = 0;
    for (Var p : parts) {
      const Tensor& t = val(p);
      std::copy(t.data(), t.data() + t.size(), Y.data() + off);
      off += t.size();
    }
    return push(Op::kConcat, parts, std::move(Y));
  }

  Var reshape(Var x, Shape new_shape) {
    const Tensor& X = val(x);
    if (numel(new_shape) != X.size()) {
      throw std::invalid_argument("reshape: cannot view " +
                                  shape_str(X.shape()) + " as " +
                                  shape_str(new_shape));
    }
    Tensor Y(std::move(new_shape),
             std::vector<double>(X.data(), X.data() + X.size()));
    return push(Op::kReshape, {x}, std::move(Y));
  }

  /// Row gather: out[i, :] = table[ids[i], :]. Backward scatter-adds.
  Var gather_rows(Var table, const std::vector<long>& ids) {
    const Tensor& E = val(table);
    require_rank(E, 2, "gather_rows");
    if (ids.empty()) throw std::invalid_argument("gather_rows: empty id list");
    Tensor Y({ids.size(), E.cols()});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= E.rows()) {
        throw std::invalid_argument("gather_rows: id " +
                                    std::to_string(ids[i]) +
                                    " out of range for " +
                                    shape_str(E.shape()));
      }
      for (std::size_t j = 0; j < E.cols(); ++j) {
        Y.at(i, j) = E.at(static_cast<std::size_t>(ids[i]), j);
      }
    }
    Var id = push(Op::kGatherRows, {table}, std::move(Y));
    nodes_[id].iaux = ids;
    return id;
  }

  Var sum_all(Var x) {
    const Tensor& X = val(x);
    double s = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) s += X[i];
    return push(Op::kSumAll, {x}, Tensor::scalar(s));
  }

  /// Mean over the batch of -log softmax(logits)[target].
  Var cross_entropy(Var logits, const std::vector<long>& targets) {
    const Tensor& L = val(logits);
    require_rank(L, 2, "cross_entropy");
    if (targets.size() != L.rows()) {
      throw std::invalid_argument(
          "cross_entropy: " + std::to_string(targets.size()) +
          " targets for logits " + shape_str(L.shape()));
    }
    const std::size_t n = L.rows(), c = L.cols();
    Tensor probs({n, c});
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= c) {
        throw std::invalid_argument("cross_entropy: target " +
                                    std::to_string(targets[i]) +
                                    " out of range [0, " + std::to_string(c) +
                                    ")");
      }
      double mx = L.at(i, 0);
      for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, L.at(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        probs.at(i, j) = std::exp(L.at(i, j) - mx);
        sum += probs.at(i, j);
      }
      for (std::size_t j = 0; j < c; ++j) probs.at(i, j) /= sum;
      loss += mx + std::log(sum) - L.at(i, static_cast<std::size_t>(targets[i]));
    }
    loss /= static_cast<double>(n);
    Var id = push(Op::kCrossEntropy, {logits}, Tensor::scalar(loss));
    nodes_[id].iaux = targets;
    nodes_[id].cache = std::move(probs);
    return id;
  }

  // --- access ----------------------------------------------------------

  const Tensor& value(Var id) const { return val(id); }
  std::size_t node_count() const { return nodes_.size(); }

  /// Reverse pass from a scalar loss. Parameter gradients are accumulated
  /// into the bound stores; all per-node gradient buffers are then released.
  void backward(Var loss) {
    if (nodes_.empty()) throw std::invalid_argument("backward: empty tape");
    if (!val(loss).is_scalar()) {
      throw std::invalid_argument("backward: loss has shape " +
                                  shape_str(val(loss).shape()) +
                                  ", expected a scalar");
    }
    for (auto& n : nodes_) n.grad = Tensor::zeros(n.value.shape());
    nodes_[static_cast<std::size_t>(loss)].grad[0] = 1.0;
    for (int id = loss; id >= 0; --id) backward_node(id);
    for (const auto& b : bindings_) {
      Tensor& g = b.store->grad(b.name);
      const Tensor& ng = nodes_[static_cast<std::size_t>(b.node)].grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ng[i];
    }
    for (auto& n : nodes_) n.grad = Tensor();
  }

  static double softplus_val(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }

 private:
  struct Node {
    Op op;
    std::vector<Var> inputs;
    Tensor value;
    Tensor grad;
    Tensor cache;             // cross-entropy softmax probabilities
    std::vector<long> iaux;   // targets / gather ids / argmax rows
    double coeff_a = 0.0;     // affine slope
  };

  struct Binding {
    Var node;
    ParameterStore* store;
    std::string name;
  };

  const Tensor& val(Var id) const {
    return nodes_.at(static_cast<std::size_t>(id)).value;
  }

  static void require_rank(const Tensor& t, std::size_t r, const char* op) {
    if (t.rank() != r) {
      throw std::invalid_argument(std::string(op) + ": expected rank " +
                                  std::to_string(r) + ", got " +
                                  shape_str(t.shape()));
    }
  }

  Var push(Op op, std::vector<Var> inputs, Tensor value) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
  }

  Var binary(Op op, Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) {
      throw std::invalid_argument("elementwise op: shape mismatch " +
                                  shape_str(A.shape()) + " vs " +
                                  shape_str(B.shape()));
    }
    Tensor Y = A;
    switch (op) {
      case Op::kAdd:
        for (std::size_t i = 0; i < Y.size(); ++i) Y[i] += B[i];
        break;
      case Op::kSub:
        for (std::size_t i = 0; i < Y.size(); ++i) Y[i] -= B[i];
        break;
      case Op::kMul:
        for (std::size_t i = 0; i < Y.size(); ++i) Y[i] *= B[i];
        break;
      case Op::kDiv:
        for (std::size_t i = 0; i < Y.size(); ++i) Y[i] /= B[i];
        break;
      default:
        throw std::logic_error("binary: bad op");
    }
    return push(op, {a, b}, std::move(Y));
  }

  Tensor& g(Var id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  const Tensor& v(Var id) { return nodes_[static_cast<std::size_t>(id)].value; }

  void backward_node(Var id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor& dy = n.grad;
    switch (n.op) {
      case Op::kConstant:
      case Op::kParam:
        break;
      case Op::kMatmul: {
        const Tensor& A = v(n.inputs[0]);
        const Tensor& B = v(n.inputs[1]);
        Tensor& dA = g(n.inputs[0]);
        Tensor& dB = g(n.inputs[1]);
        const std::size_t m = A.rows(), k = A.cols(), c = B.cols();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            const double dval = dy.at(i, j);
            if (dval == 0.0) continue;
            for (std::size_t l = 0; l < k; ++l) {
              dA.at(i, l) += dval * B.at(l, j);
              dB.at(l, j) += dval * A.at(i, l);
            }
          }
        }
        break;
      }
      case Op::kBiasAdd: {
        Tensor& dX = g(n.inputs[0]);
        Tensor& db = g(n.inputs[1]);
        for (std::size_t i = 0; i < dy.rows(); ++i) {
          for (std::size_t j = 0; j < dy.cols(); ++j) {
            dX.at(i, j) += dy.at(i, j);
            db[j] += dy.at(i, j);
          }
        }
        break;
      }
      case Op::kAdd: {
        accumulate(g(n.inputs[0]), dy, 1.0);
        accumulate(g(n.inputs[1]), dy, 1.0);
        break;
      }
      case Op::kSub: {
        accumulate(g(n.inputs[0]), dy, 1.0);
        accumulate(g(n.inputs[1]), dy, -1.0);
        break;
      }
      case Op::kMul: {
        const Tensor& A = v(n.inputs[0]);
        const Tensor& B = v(n.inputs[1]);
        Tensor& dA = g(n.inputs[0]);
        Tensor& dB = g(n.inputs[1]);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          dA[i] += dy[i] * B[i];
          dB[i] += dy[i] * A[i];
        }
        break;
      }
      case Op::kDiv: {
        const Tensor& A = v(n.inputs[0]);
        const Tensor& B = v(n.inputs[1]);
        Tensor& dA = g(n.inputs[0]);
        Tensor& dB = g(n.inputs[1]);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          dA[i] += dy[i] / B[i];
          dB[i] -= dy[i] * A[i] / (B[i] * B[i]);
        }
        break;
      }
      case Op::kAffine: {
        accumulate(g(n.inputs[0]), dy, n.coeff_a);
        break;
      }
      case Op::kTanh: {
        Tensor& dX = g(n.inputs[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          dX[i] += dy[i] * (1.0 - n.value[i] * n.value[i]);
        }
        break;
      }
      case Op::kRelu: {
        const Tensor& X = v(n.inputs[0]);
        Tensor& dX = g(n.inputs[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          if (X[i] > 0.0) dX[i] += dy[i];
        }
        break;
      }
      case Op::kLog: {
        const Tensor& X = v(n.inputs[0]);
        Tensor& dX = g(n.inputs[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) dX[i] += dy[i] / X[i];
        break;
      }
      case Op::kExp: {
        Tensor& dX = g(n.inputs[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) dX[i] += dy[i] * n.value[i];
        break;
      }
      case Op::kSquare: {
        const Tensor& X = v(n.inputs[0]);
        Tensor& dX = g(n.inputs[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          dX[i] += dy[i] * 2.0 * X[i];
        }
        break;
      }
      case Op::kSoftplus: {
        const Tensor& X = v(n.inputs[0]);
        Tensor& dX = g(n.inputs[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          dX[i] += dy[i] / (1.0 + std::exp(-X[i]));
        }
        break;
      }
      case Op::kConv1d: {
        const Tensor& X = v(n.inputs[0]);
        const Tensor& W = v(n.inputs[1]);
        Tensor& dX = g(n.inputs[0]);
        Tensor& dW = g(n.inputs[1]);
        const std::size_t din = X.cols(), F = W.dim(0), w = W.dim(1);
        const std::size_t To = n.value.rows();
        for (std::size_t t = 0; t < To; ++t) {
          for (std::size_t f = 0; f < F; ++f) {
            const double dval = dy.at(t, f);
            if (dval == 0.0) continue;
            for (std::size_t i = 0; i < w; ++i) {
              for (std::size_t c = 0; c < din; ++c) {
                dX.at(t + i, c) += dval * W[(f * w + i) * din + c];
                dW[(f * w + i) * din + c] += dval * X.at(t + i, c);
              }
            }
          }
        }
        break;
      }
      case Op::kMaxOverTime: {
        Tensor& dX = g(n.inputs[0]);
        for (std::size_t f = 0; f < dy.size(); ++f) {
          dX.at(static_cast<std::size_t>(n.iaux[f]), f) += dy[f];
        }
        break;
      }
      case Op::kRowSoftmax: {
        Tensor& dX = g(n.inputs[0]);
        const Tensor& Y = n.value;
        for (std::size_t i = 0; i < Y.rows(); ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < Y.cols(); ++j) {
            dot += dy.at(i, j) * Y.at(i, j);
          }
          for (std::size_t j = 0; j < Y.cols(); ++j) {
            dX.at(i, j) += Y.at(i, j) * (dy.at(i, j) - dot);
          }
        }
        break;
      }
      case Op::kMeanOverRows: {
        const Tensor& X = v(n.inputs[0]);
        Tensor& dX = g(n.inputs[0]);
        const double inv = 1.0 / static_cast<double>(X.rows());
        for (std::size_t i = 0; i < X.rows(); ++i) {
          for (std::size_t j = 0; j < X.cols(); ++j) {
            dX.at(i, j) += dy[j] * inv;
          }
        }
        break;
      }
      case Op::kConcat: {
        std::size_t off = 0;
        for (Var p : n.inputs) {
          Tensor& dP = g(p);
          for (std::size_t i = 0; i < dP.size(); ++i) dP[i] += dy[off + i];
          off += dP.size();
        }
        break;
      }
      case Op::kReshape: {
        Tensor& dX = g(n.inputs[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) dX[i] += dy[i];
        break;
      }
      case Op::kGatherRows: {
        Tensor& dE = g(n.inputs[0]);
        const std::size_t d = dE.cols();
        for (std::size_t i = 0; i < n.iaux.size(); ++i) {
          const std::size_t row = static_cast<std::size_t>(n.iaux[i]);
          for (std::size_t j = 0; j < d; ++j) dE.at(row, j) += dy.at(i, j);
        }
        break;
      }
      case Op::kSumAll: {
        Tensor& dX = g(n.inputs[0]);
        for (std::size_t i = 0; i < dX.size(); ++i) dX[i] += dy[0];
        break;
      }
      case Op::kCrossEntropy: {
        Tensor& dL = g(n.inputs[0]);
        const Tensor& P = n.cache;
        const double scale = dy[0] / static_cast<double>(P.rows());
        for (std::size_t i = 0; i < P.rows(); ++i) {
          for (std::size_t j = 0; j < P.cols(); ++j) {
            double ind = (static_cast<long>(j) == n.iaux[i]) ? 1.0 : 0.0;
            dL.at(i, j) += scale * (P.at(i, j) - ind);
          }
        }
        break;
      }
    }
  }

  static void accumulate(Tensor& dst, const Tensor& src, double scale) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  }

  // Deque keeps value() references stable while later ops append nodes.
  std::deque<Node> nodes_;
  std::vector<Binding> bindings_;
};

}  // namespace alsim
