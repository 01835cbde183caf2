#pragma once

// Reverse-mode automatic differentiation over dense arrays.
//
// A Graph is a tape: every operation appends a node holding its value, the
// ids of its inputs and a closure that pushes the output gradient back to
// them. Nodes are appended after their inputs, so reverse creation order is
// a valid topological order for backward(). Graphs are built per batch and
// thrown away.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tempocc/array.hpp"
#include "tempocc/error.hpp"

namespace tempocc::ad {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  inline const Array& value() const;
  inline const Array& grad() const;
  inline const Shape& shape() const;
  inline bool requires_grad() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that receives a gradient.
  Var parameter(Array value) { return push(std::move(value), {}, nullptr, true, "parameter"); }
  /// Leaf that never receives a gradient.
  Var constant(Array value) { return push(std::move(value), {}, nullptr, false, "constant"); }

  std::size_t size() const { return nodes_.size(); }
  const Array& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient of a node; zero-filled if nothing has flowed into it yet.
  const Array& grad(std::size_t id) const {
    const Node& n = nodes_.at(id);
    if (!n.grad) n.grad.emplace(n.value.shape(), 0.0);
    return *n.grad;
  }

  /// Mutable gradient buffer used by backward rules.
  Array& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.grad) n.grad.emplace(n.value.shape(), 0.0);
    return *n.grad;
  }

  /// Records an op result. Parents that do not require a gradient are kept
  /// for bookkeeping but the backward rule is dropped when none of them do.
  Var record(Array value, std::vector<std::size_t> parents, BackwardFn backward, const char* op) {
    if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
    bool needs = false;
    for (auto p : parents) needs = needs || nodes_[p].requires_grad;
    if (!needs) backward = nullptr;
    return push(std::move(value), std::move(parents), std::move(backward), needs, op);
  }

  /// Accumulates d(loss)/d(node) into every node reachable from `loss`.
  /// Calling twice without zero_grad() adds the gradients up.
  void backward(Var loss) {
    if (&loss.graph() != this) throw Error("backward on a variable of another graph");
    const Node& root = nodes_.at(loss.id());
    if (root.value.size() != 1)
      throw DimensionError("backward needs a scalar loss, got shape " + to_string(root.value.shape()));
    grad_buffer(loss.id())[0] += 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.backward && n.grad) n.backward(*this, id);
    }
  }

  void zero_grad() {
    for (auto& n : nodes_) n.grad.reset();
  }

  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_.at(id).parents; }
  const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }

 private:
  struct Node {
    Array value;
    mutable std::optional<Array> grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    std::string op;
  };

  Var push(Array value, std::vector<std::size_t> parents, BackwardFn backward, bool requires_grad, const char* op) {
    nodes_.push_back(Node{std::move(value), std::nullopt, std::move(parents), std::move(backward), requires_grad, op});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

inline const Array& Var::value() const { return graph_->value(id_); }
inline const Array& Var::grad() const { return graph_->grad(id_); }
inline const Shape& Var::shape() const { return graph_->value(id_).shape(); }
inline bool Var::requires_grad() const { return graph_->requires_grad(id_); }

namespace detail {

inline Graph& same_graph(const Var& a, const Var& b) {
  if (&a.graph() != &b.graph()) throw Error("operands belong to different graphs");
  return a.graph();
}

// Strides of `operand` when broadcast against `out`; zero stride on
// broadcast axes. A single-element operand broadcasts everywhere.
inline std::vector<std::size_t> broadcast_strides(const Shape& operand, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  if (numel(operand) == 1) return strides;
  std::size_t stride = 1;
  for (std::size_t i = out.size(); i-- > 0;) {
    strides[i] = operand[i] == 1 ? 0 : stride;
    stride *= operand[i];
  }
  return strides;
}

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return a;
  if (numel(b) == 1) return a;
  if (numel(a) == 1) return b;
  if (a.size() != b.size())
    throw DimensionError(std::string(op) + ": cannot broadcast " + to_string(a) + " with " + to_string(b));
  Shape out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i] || b[i] == 1) out[i] = a[i];
    else if (a[i] == 1) out[i] = b[i];
    else throw DimensionError(std::string(op) + ": cannot broadcast " + to_string(a) + " with " + to_string(b));
  }
  return out;
}

// Calls f(out_index, a_index, b_index) for every element of the broadcast result.
template <class F>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b, F&& f) {
  const std::size_t total = numel(out);
  if (a == out && b == out) {
    for (std::size_t i = 0; i < total; ++i) f(i, i, i);
    return;
  }
  auto sa = broadcast_strides(a, out);
  auto sb = broadcast_strides(b, out);
  if (out.size() == 2) {
    for (std::size_t r = 0, i = 0; r < out[0]; ++r)
      for (std::size_t c = 0; c < out[1]; ++c, ++i) f(i, r * sa[0] + c * sa[1], r * sb[0] + c * sb[1]);
    return;
  }
  std::vector<std::size_t> idx(out.size(), 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    f(i, ia, ib);
    for (std::size_t ax = out.size(); ax-- > 0;) {
      if (++idx[ax] < out[ax]) {
        ia += sa[ax];
        ib += sb[ax];
        break;
      }
      ia -= sa[ax] * (out[ax] - 1);
      ib -= sb[ax] * (out[ax] - 1);
      idx[ax] = 0;
    }
  }
}

// da(out) -> contributions to the two operands of a broadcasting binary op.
template <class Fwd, class DA, class DB>
Var binary(const Var& a, const Var& b, const char* op, Fwd fwd, DA da, DB db) {
  Graph& g = same_graph(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  Shape out_shape = broadcast_shape(av.shape(), bv.shape(), op);
  Array out(out_shape);
  for_each_broadcast(out_shape, av.shape(), bv.shape(),
                     [&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = fwd(av[ia], bv[ib]); });
  std::size_t ida = a.id(), idb = b.id();
  return g.record(
      std::move(out), {ida, idb},
      [ida, idb, out_shape, da, db](Graph& g, std::size_t self) {
        const Array& gout = g.grad(self);
        const Array& av = g.value(ida);
        const Array& bv = g.value(idb);
        bool need_a = g.requires_grad(ida), need_b = g.requires_grad(idb);
        Array* ga = need_a ? &g.grad_buffer(ida) : nullptr;
        Array* gb = need_b ? &g.grad_buffer(idb) : nullptr;
        for_each_broadcast(out_shape, av.shape(), bv.shape(), [&](std::size_t i, std::size_t ia, std::size_t ib) {
          if (ga) (*ga)[ia] += gout[i] * da(av[ia], bv[ib]);
          if (gb) (*gb)[ib] += gout[i] * db(av[ia], bv[ib]);
        });
      },
      op);
}

// Elementwise unary op; `deriv(x, y)` is dy/dx given input x and output y.
template <class Fwd, class Deriv>
Var unary(const Var& x, const char* op, Fwd fwd, Deriv deriv) {
  Graph& g = x.graph();
  const Array& xv = x.value();
  Array out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  std::size_t idx = x.id();
  return g.record(
      std::move(out), {idx},
      [idx, deriv](Graph& g, std::size_t self) {
        const Array& gout = g.grad(self);
        const Array& xv = g.value(idx);
        const Array& yv = g.value(self);
        Array& gx = g.grad_buffer(idx);
        for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += gout[i] * deriv(xv[i], yv[i]);
      },
      op);
}

// (outer, length, inner) decomposition of a shape around `axis`.
struct AxisView {
  std::size_t outer = 1, length = 1, inner = 1;
};

inline AxisView axis_view(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size())
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(shape));
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops. Binary ops broadcast: each axis must match or be 1, and a
// single-element operand broadcasts against anything.

inline Var add(const Var& a, const Var& b) {
  return detail::binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

inline Var sub(const Var& a, const Var& b) {
  return detail::binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

inline Var mul(const Var& a, const Var& b) {
  return detail::binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

inline Var div(const Var& a, const Var& b) {
  return detail::binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

inline Var tanh(const Var& x) {
  return detail::unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(const Var& x) {
  return detail::unary(
      x, "sigmoid",
      [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var square(const Var& x) {
  return detail::unary(
      x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Var exp(const Var& x) {
  return detail::unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Var log(const Var& x) {
  return detail::unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

inline Var sqrt(const Var& x) {
  return detail::unary(
      x, "sqrt", [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

inline Var abs(const Var& x) {
  return detail::unary(
      x, "abs", [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

/// factor * x
inline Var scale(const Var& x, double factor) {
  return detail::unary(
      x, "scale", [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

/// factor * x + offset
inline Var affine(const Var& x, double factor, double offset) {
  return detail::unary(
      x, "affine", [factor, offset](double v) { return factor * v + offset; },
      [factor](double, double) { return factor; });
}

// ---------------------------------------------------------------------------
// Linear algebra and shape ops.

inline Var matmul(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  Array out = tempocc::matmul(a.value(), b.value());
  std::size_t ida = a.id(), idb = b.id();
  return g.record(
      std::move(out), {ida, idb},
      [ida, idb](Graph& g, std::size_t self) {
        auto gout = tempocc::detail::view(g.grad(self));
        if (g.requires_grad(ida)) {
          auto ga = tempocc::detail::view(g.grad_buffer(ida));
          if (ga.size()) ga.noalias() += gout * tempocc::detail::view(g.value(idb)).transpose();
        }
        if (g.requires_grad(idb)) {
          auto gb = tempocc::detail::view(g.grad_buffer(idb));
          if (gb.size()) gb.noalias() += tempocc::detail::view(g.value(ida)).transpose() * gout;
        }
      },
      "matmul");
}

inline Var transpose(const Var& x) {
  Array out = x.value().transposed();
  std::size_t idx = x.id();
  return x.graph().record(
      std::move(out), {idx},
      [idx](Graph& g, std::size_t self) {
        const Array& gout = g.grad(self);
        Array& gx = g.grad_buffer(idx);
        const std::size_t r = gx.rows(), c = gx.cols();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gout[j * r + i];
      },
      "transpose");
}

inline Var reshape(const Var& x, Shape shape) {
  Array out = x.value().reshaped(std::move(shape));
  std::size_t idx = x.id();
  return x.graph().record(
      std::move(out), {idx},
      [idx](Graph& g, std::size_t self) {
        const Array& gout = g.grad(self);
        Array& gx = g.grad_buffer(idx);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gout[i];
      },
      "reshape");
}

/// Sum of all elements; rank-0 result.
inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  std::size_t idx = x.id();
  return x.graph().record(
      Array::scalar(s), {idx},
      [idx](Graph& g, std::size_t self) {
        double go = g.grad(self)[0];
        Array& gx = g.grad_buffer(idx);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go;
      },
      "sum");
}

/// Sum along one axis; the axis is kept with length 1.
inline Var sum(const Var& x, std::size_t axis) {
  const Array& xv = x.value();
  auto v = detail::axis_view(xv.shape(), axis, "sum");
  Shape out_shape = xv.shape();
  out_shape[axis] = 1;
  Array out(out_shape);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t l = 0; l < v.length; ++l)
      for (std::size_t i = 0; i < v.inner; ++i) out[o * v.inner + i] += xv[(o * v.length + l) * v.inner + i];
  std::size_t idx = x.id();
  return x.graph().record(
      std::move(out), {idx},
      [idx, v](Graph& g, std::size_t self) {
        const Array& gout = g.grad(self);
        Array& gx = g.grad_buffer(idx);
        for (std::size_t o = 0; o < v.outer; ++o)
          for (std::size_t l = 0; l < v.length; ++l)
            for (std::size_t i = 0; i < v.inner; ++i) gx[(o * v.length + l) * v.inner + i] += gout[o * v.inner + i];
      },
      "sum_axis");
}

inline Var mean(const Var& x) {
  if (x.value().size() == 0) throw DimensionError("mean of an empty array");
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

inline Var mean(const Var& x, std::size_t axis) {
  auto v = detail::axis_view(x.shape(), axis, "mean");
  if (v.length == 0) throw DimensionError("mean over an empty axis");
  return scale(sum(x, axis), 1.0 / static_cast<double>(v.length));
}

/// Joins arrays along `axis`; all other extents must agree.
inline Var concat(const std::vector<Var>& xs, std::size_t axis) {
  if (xs.empty()) throw DimensionError("concat of no arrays");
  Graph& g = xs.front().graph();
  Shape out_shape = xs.front().shape();
  detail::axis_view(out_shape, axis, "concat");
  out_shape[axis] = 0;
  std::vector<std::size_t> ids, lengths;
  for (const auto& x : xs) {
    if (&x.graph() != &g) throw Error("concat operands belong to different graphs");
    Shape s = x.shape();
    if (s.size() != out_shape.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != out_shape[i])
        throw DimensionError("concat: inconsistent shapes " + to_string(xs.front().shape()) + " and " + to_string(s));
    out_shape[axis] += s[axis];
    ids.push_back(x.id());
    lengths.push_back(s[axis]);
  }
  auto v = detail::axis_view(out_shape, axis, "concat");
  Array out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const Array& xv = xs[k].value();
    const std::size_t len = lengths[k];
    for (std::size_t o = 0; o < v.outer; ++o)
      std::copy_n(xv.data() + o * len * v.inner, len * v.inner, out.data() + (o * v.length + offset) * v.inner);
    offset += len;
  }
  return g.record(
      std::move(out), ids,
      [ids, lengths, v](Graph& g, std::size_t self) {
        const Array& gout = g.grad(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          const std::size_t len = lengths[k];
          if (g.requires_grad(ids[k])) {
            Array& gx = g.grad_buffer(ids[k]);
            for (std::size_t o = 0; o < v.outer; ++o)
              for (std::size_t j = 0; j < len * v.inner; ++j)
                gx[o * len * v.inner + j] += gout[(o * v.length + offset) * v.inner + j];
          }
          offset += len;
        }
      },
      "concat");
}

/// Elements [start, start+length) along `axis`.
inline Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Array& xv = x.value();
  auto v = detail::axis_view(xv.shape(), axis, "slice");
  if (start + length > v.length)
    throw DimensionError("slice [" + std::to_string(start) + "," + std::to_string(start + length) +
                         ") out of range for axis of length " + std::to_string(v.length));
  Shape out_shape = xv.shape();
  out_shape[axis] = length;
  Array out(out_shape);
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(xv.data() + (o * v.length + start) * v.inner, length * v.inner, out.data() + o * length * v.inner);
  std::size_t idx = x.id();
  return x.graph().record(
      std::move(out), {idx},
      [idx, v, start, length](Graph& g, std::size_t self) {
        const Array& gout = g.grad(self);
        Array& gx = g.grad_buffer(idx);
        for (std::size_t o = 0; o < v.outer; ++o)
          for (std::size_t j = 0; j < length * v.inner; ++j)
            gx[(o * v.length + start) * v.inner + j] += gout[o * length * v.inner + j];
      },
      "slice");
}

/// Rows `idx` of a rank-2 array (repeats allowed; gradients accumulate).
inline Var gather_rows(const Var& x, std::vector<std::size_t> rows) {
  const Array& xv = x.value();
  if (xv.rank() != 2) throw DimensionError("gather_rows needs a rank-2 array");
  for (auto r : rows)
    if (r >= xv.rows()) throw DimensionError("gather_rows: row index out of range");
  Array out = xv.rows_at(rows);
  std::size_t idx = x.id();
  const std::size_t cols = xv.cols();
  return x.graph().record(
      std::move(out), {idx},
      [idx, rows = std::move(rows), cols](Graph& g, std::size_t self) {
        const Array& gout = g.grad(self);
        Array& gx = g.grad_buffer(idx);
        for (std::size_t i = 0; i < rows.size(); ++i)
          for (std::size_t c = 0; c < cols; ++c) gx[rows[i] * cols + c] += gout[i * cols + c];
      },
      "gather_rows");
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }

}  // namespace tempocc::ad
