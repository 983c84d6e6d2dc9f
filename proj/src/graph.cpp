#include "hred/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hred {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::MatMul: return "matmul";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Softmax: return "softmax";
    case OpKind::LogSoftmax: return "log_softmax";
    case OpKind::Log: return "log";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::Square: return "square";
    case OpKind::Sqrt: return "sqrt";
    case OpKind::Max: return "max";
    case OpKind::Scale: return "scale";
    case OpKind::Row: return "row";
    case OpKind::Pick: return "pick";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (!graph_) throw std::logic_error("value() on an unbound Var");
  return graph_->value(*this);
}

namespace {

[[noreturn]] void shape_fail(OpKind kind, std::span<const Tensor* const> in, std::string_view why) {
  std::string msg = std::string(op_name(kind)) + ": " + std::string(why) + " (shapes";
  for (const Tensor* t : in) msg += " " + shape_string(t->shape());
  msg += ")";
  throw ShapeError(msg);
}

void expect_arity(OpKind kind, std::span<const Tensor* const> in, std::size_t n) {
  if (in.size() != n) {
    shape_fail(kind, in, "expected " + std::to_string(n) + " inputs, got " + std::to_string(in.size()));
  }
}

void expect_same(OpKind kind, std::span<const Tensor* const> in) {
  expect_arity(kind, in, 2);
  if (in[0]->shape() != in[1]->shape()) shape_fail(kind, in, "shape mismatch");
}

void expect_vector(OpKind kind, std::span<const Tensor* const> in) {
  expect_arity(kind, in, 1);
  if (in[0]->rank() != 1) shape_fail(kind, in, "expected a rank-1 input");
}

template <class F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  const double* x = a.data();
  double* y = out.data();
  for (std::size_t i = 0, n = a.size(); i < n; ++i) y[i] = f(x[i]);
  return out;
}

template <class F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  const double* x = a.data();
  const double* z = b.data();
  double* y = out.data();
  for (std::size_t i = 0, n = a.size(); i < n; ++i) y[i] = f(x[i], z[i]);
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sum_exp(const Tensor& a) {
  const double m = *std::max_element(a.data(), a.data() + a.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::exp(a[i] - m);
  return m + std::log(s);
}

Tensor forward_op(OpKind kind, std::span<const Tensor* const> in, const OpAttrs& attrs) {
  switch (kind) {
    case OpKind::Leaf:
      throw std::logic_error("apply(leaf) is not an operation");
    case OpKind::Add:
      expect_same(kind, in);
      return map_binary(*in[0], *in[1], [](double x, double y) { return x + y; });
    case OpKind::Sub:
      expect_same(kind, in);
      return map_binary(*in[0], *in[1], [](double x, double y) { return x - y; });
    case OpKind::Mul:
      expect_same(kind, in);
      return map_binary(*in[0], *in[1], [](double x, double y) { return x * y; });
    case OpKind::Max:
      expect_same(kind, in);
      return map_binary(*in[0], *in[1], [](double x, double y) { return x >= y ? x : y; });
    case OpKind::MatMul: {
      expect_arity(kind, in, 2);
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      if (a.rank() != 2 || b.rank() > 2 || a.cols() != b.rows()) shape_fail(kind, in, "inner dimension mismatch");
      const std::size_t m = a.rows(), k = a.cols();
      if (b.rank() == 1) {
        Tensor out({m});
        for (std::size_t i = 0; i < m; ++i) {
          const double* ar = a.data() + i * k;
          double s = 0.0;
          for (std::size_t j = 0; j < k; ++j) s += ar[j] * b[j];
          out[i] = s;
        }
        return out;
      }
      const std::size_t n = b.cols();
      Tensor out({m, n});
      for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = a.data()[i * k + p];
          const double* brow = b.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
      }
      return out;
    }
    case OpKind::Tanh:
      expect_arity(kind, in, 1);
      return map_unary(*in[0], [](double x) { return std::tanh(x); });
    case OpKind::Sigmoid:
      expect_arity(kind, in, 1);
      return map_unary(*in[0], stable_sigmoid);
    case OpKind::Concat: {
      if (in.empty()) throw ShapeError("concat: no inputs");
      std::vector<double> out;
      for (const Tensor* t : in) {
        if (t->rank() != 1) shape_fail(kind, in, "expected rank-1 inputs");
        out.insert(out.end(), t->data(), t->data() + t->size());
      }
      return Tensor::vector(std::move(out));
    }
    case OpKind::Slice: {
      expect_vector(kind, in);
      if (attrs.length == 0 || attrs.index + attrs.length > in[0]->size()) {
        shape_fail(kind, in, "slice [" + std::to_string(attrs.index) + ", +" +
                                 std::to_string(attrs.length) + ") out of range");
      }
      const double* p = in[0]->data() + attrs.index;
      return Tensor::vector(std::vector<double>(p, p + attrs.length));
    }
    case OpKind::Softmax: {
      expect_vector(kind, in);
      const double lse = log_sum_exp(*in[0]);
      return map_unary(*in[0], [lse](double x) { return std::exp(x - lse); });
    }
    case OpKind::LogSoftmax: {
      expect_vector(kind, in);
      const double lse = log_sum_exp(*in[0]);
      return map_unary(*in[0], [lse](double x) { return x - lse; });
    }
    case OpKind::Log:
      expect_arity(kind, in, 1);
      return map_unary(*in[0], [](double x) { return std::log(x); });
    case OpKind::Sum: {
      expect_arity(kind, in, 1);
      double s = 0.0;
      for (double v : in[0]->values()) s += v;
      return Tensor::scalar(s);
    }
    case OpKind::Mean: {
      expect_arity(kind, in, 1);
      double s = 0.0;
      for (double v : in[0]->values()) s += v;
      return Tensor::scalar(s / static_cast<double>(in[0]->size()));
    }
    case OpKind::Square:
      expect_arity(kind, in, 1);
      return map_unary(*in[0], [](double x) { return x * x; });
    case OpKind::Sqrt:
      expect_arity(kind, in, 1);
      return map_unary(*in[0], [](double x) { return std::sqrt(x); });
    case OpKind::Scale: {
      expect_arity(kind, in, 1);
      const double c = attrs.scalar;
      return map_unary(*in[0], [c](double x) { return x * c; });
    }
    case OpKind::Row: {
      expect_arity(kind, in, 1);
      const Tensor& m = *in[0];
      if (m.rank() != 2) shape_fail(kind, in, "expected a rank-2 input");
      if (attrs.index >= m.rows()) {
        shape_fail(kind, in, "row " + std::to_string(attrs.index) + " out of range");
      }
      const double* p = m.data() + attrs.index * m.cols();
      return Tensor::vector(std::vector<double>(p, p + m.cols()));
    }
    case OpKind::Pick: {
      expect_vector(kind, in);
      if (attrs.index >= in[0]->size()) {
        shape_fail(kind, in, "index " + std::to_string(attrs.index) + " out of range");
      }
      return Tensor::scalar((*in[0])[attrs.index]);
    }
  }
  throw std::logic_error("unhandled op kind");
}

void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0, n = dst.size(); i < n; ++i) d[i] += s[i];
}

}  // namespace

Var Graph::push_leaf(Tensor t, const Tensor* external, bool requires_grad) {
  const Tensor& v = external ? *external : t;
  if (v.empty()) throw ShapeError("leaf tensor is empty");
  if (!v.all_finite()) throw NumericError("leaf tensor " + shape_string(v.shape()) + " has non-finite values");
  Node node;
  node.kind = OpKind::Leaf;
  node.owned = std::move(t);
  node.external = external;
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::constant(Tensor t) { return push_leaf(std::move(t), nullptr, false); }
Var Graph::input(Tensor t) { return push_leaf(std::move(t), nullptr, true); }
Var Graph::parameter(const Tensor& t) { return push_leaf(Tensor(), &t, true); }

void Graph::check_owner(Var v) const {
  if (v.graph_ != this || v.id_ >= nodes_.size()) {
    throw std::logic_error("Var does not belong to this graph");
  }
}

Var Graph::apply(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs) {
  std::vector<const Tensor*> in;
  in.reserve(inputs.size());
  Node node;
  node.kind = kind;
  node.attrs = attrs;
  node.inputs.reserve(inputs.size());
  for (Var v : inputs) {
    check_owner(v);
    in.push_back(&nodes_[v.id_].value());
    node.inputs.push_back(v.id_);
    node.requires_grad = node.requires_grad || nodes_[v.id_].requires_grad;
  }
  node.owned = forward_op(kind, in, attrs);
  if (!node.owned.all_finite()) {
    throw NumericError(std::string(op_name(kind)) + ": produced non-finite values");
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Graph::value(Var v) const {
  check_owner(v);
  return nodes_[v.id_].value();
}

bool Graph::has_grad(Var v) const {
  check_owner(v);
  return v.id_ < grads_.size() && !grads_[v.id_].empty();
}

Tensor Graph::grad(Var v) const {
  check_owner(v);
  if (has_grad(v)) return grads_[v.id_];
  return Tensor(nodes_[v.id_].value().shape());
}

Tensor& Graph::grad_slot(std::uint32_t id) {
  Tensor& g = grads_[id];
  if (g.empty()) g = Tensor(nodes_[id].value().shape());
  return g;
}

void Graph::backward(Var loss) {
  check_owner(loss);
  if (consumed_) throw std::logic_error("backward: graph already consumed");
  if (nodes_[loss.id_].value().size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     shape_string(nodes_[loss.id_].value().shape()));
  }
  consumed_ = true;
  grads_.assign(nodes_.size(), Tensor());
  grads_[loss.id_] = Tensor::scalar(1.0);
  for (std::uint32_t id = loss.id_ + 1; id-- > 0;) {
    if (grads_[id].empty() || !nodes_[id].requires_grad) continue;
    if (nodes_[id].kind == OpKind::Leaf) continue;
    backprop_node(id);
  }
}

void Graph::backprop_node(std::uint32_t id) {
  const Node& node = nodes_[id];
  const Tensor& g = grads_[id];
  const Tensor& y = node.owned;
  auto in_value = [&](std::size_t k) -> const Tensor& { return nodes_[node.inputs[k]].value(); };
  auto wants = [&](std::size_t k) { return nodes_[node.inputs[k]].requires_grad; };
  auto slot = [&](std::size_t k) -> Tensor& { return grad_slot(node.inputs[k]); };
  const std::size_t n = g.size();

  switch (node.kind) {
    case OpKind::Leaf:
      return;
    case OpKind::Add:
      if (wants(0)) accumulate(slot(0), g);
      if (wants(1)) accumulate(slot(1), g);
      return;
    case OpKind::Sub:
      if (wants(0)) accumulate(slot(0), g);
      if (wants(1)) {
        Tensor& d = slot(1);
        for (std::size_t i = 0; i < n; ++i) d[i] -= g[i];
      }
      return;
    case OpKind::Mul: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      if (wants(0)) {
        Tensor& d = slot(0);
        for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * b[i];
      }
      if (wants(1)) {
        Tensor& d = slot(1);
        for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * a[i];
      }
      return;
    }
    case OpKind::Max: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      if (wants(0)) {
        Tensor& d = slot(0);
        for (std::size_t i = 0; i < n; ++i) if (a[i] >= b[i]) d[i] += g[i];
      }
      if (wants(1)) {
        Tensor& d = slot(1);
        for (std::size_t i = 0; i < n; ++i) if (a[i] < b[i]) d[i] += g[i];
      }
      return;
    }
    case OpKind::MatMul: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      const std::size_t m = a.rows(), k = a.cols();
      if (b.rank() == 1) {
        if (wants(0)) {
          Tensor& da = slot(0);
          for (std::size_t i = 0; i < m; ++i) {
            const double gi = g[i];
            if (gi == 0.0) continue;
            double* row = da.data() + i * k;
            for (std::size_t j = 0; j < k; ++j) row[j] += gi * b[j];
          }
        }
        if (wants(1)) {
          Tensor& db = slot(1);
          for (std::size_t i = 0; i < m; ++i) {
            const double gi = g[i];
            const double* row = a.data() + i * k;
            for (std::size_t j = 0; j < k; ++j) db[j] += gi * row[j];
          }
        }
        return;
      }
      const std::size_t cols = b.cols();
      if (wants(0)) {
        Tensor& da = slot(0);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols; ++j) s += g.data()[i * cols + j] * b.data()[p * cols + j];
            da.data()[i * k + p] += s;
          }
      }
      if (wants(1)) {
        Tensor& db = slot(1);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = a.data()[i * k + p];
            for (std::size_t j = 0; j < cols; ++j) db.data()[p * cols + j] += av * g.data()[i * cols + j];
          }
      }
      return;
    }
    case OpKind::Tanh: {
      Tensor& d = slot(0);
      for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
      return;
    }
    case OpKind::Sigmoid: {
      Tensor& d = slot(0);
      for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
      return;
    }
    case OpKind::Concat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const std::size_t len = in_value(k).size();
        if (wants(k)) {
          Tensor& d = slot(k);
          for (std::size_t i = 0; i < len; ++i) d[i] += g[offset + i];
        }
        offset += len;
      }
      return;
    }
    case OpKind::Slice: {
      Tensor& d = slot(0);
      for (std::size_t i = 0; i < n; ++i) d[node.attrs.index + i] += g[i];
      return;
    }
    case OpKind::Softmax: {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += g[i] * y[i];
      Tensor& d = slot(0);
      for (std::size_t i = 0; i < n; ++i) d[i] += y[i] * (g[i] - dot);
      return;
    }
    case OpKind::LogSoftmax: {
      double gsum = 0.0;
      for (std::size_t i = 0; i < n; ++i) gsum += g[i];
      Tensor& d = slot(0);
      for (std::size_t i = 0; i < n; ++i) d[i] += g[i] - std::exp(y[i]) * gsum;
      return;
    }
    case OpKind::Log: {
      const Tensor& a = in_value(0);
      Tensor& d = slot(0);
      for (std::size_t i = 0; i < n; ++i) d[i] += g[i] / a[i];
      return;
    }
    case OpKind::Sum: {
      Tensor& d = slot(0);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0];
      return;
    }
    case OpKind::Mean: {
      Tensor& d = slot(0);
      const double share = g[0] / static_cast<double>(d.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += share;
      return;
    }
    case OpKind::Square: {
      const Tensor& a = in_value(0);
      Tensor& d = slot(0);
      for (std::size_t i = 0; i < n; ++i) d[i] += 2.0 * a[i] * g[i];
      return;
    }
    case OpKind::Sqrt: {
      // Subgradient 0 at the origin.
      Tensor& d = slot(0);
      for (std::size_t i = 0; i < n; ++i) if (y[i] > 0.0) d[i] += 0.5 * g[i] / y[i];
      return;
    }
    case OpKind::Scale: {
      Tensor& d = slot(0);
      for (std::size_t i = 0; i < n; ++i) d[i] += node.attrs.scalar * g[i];
      return;
    }
    case OpKind::Row: {
      Tensor& d = slot(0);
      double* row = d.data() + node.attrs.index * d.cols();
      for (std::size_t i = 0; i < n; ++i) row[i] += g[i];
      return;
    }
    case OpKind::Pick: {
      Tensor& d = slot(0);
      d[node.attrs.index] += g[0];
      return;
    }
  }
}

namespace ag {

namespace {
Graph& owner(Var a) {
  if (!a.valid()) throw std::logic_error("operation on an unbound Var");
  return *a.graph();
}
Var unary(OpKind k, Var a, OpAttrs attrs = {}) { return owner(a).apply(k, {a}, attrs); }
Var binary(OpKind k, Var a, Var b) { return owner(a).apply(k, {a, b}); }
}  // namespace

Var add(Var a, Var b) { return binary(OpKind::Add, a, b); }
Var sub(Var a, Var b) { return binary(OpKind::Sub, a, b); }
Var mul(Var a, Var b) { return binary(OpKind::Mul, a, b); }
Var matmul(Var a, Var b) { return binary(OpKind::MatMul, a, b); }
Var tanh(Var a) { return unary(OpKind::Tanh, a); }
Var sigmoid(Var a) { return unary(OpKind::Sigmoid, a); }
Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  return owner(parts.front()).apply(OpKind::Concat, parts);
}
Var concat(Var a, Var b) { return binary(OpKind::Concat, a, b); }
Var slice(Var a, std::size_t offset, std::size_t length) {
  return unary(OpKind::Slice, a, OpAttrs{offset, length, 1.0});
}
Var softmax(Var a) { return unary(OpKind::Softmax, a); }
Var log_softmax(Var a) { return unary(OpKind::LogSoftmax, a); }
Var log(Var a) { return unary(OpKind::Log, a); }
Var sum(Var a) { return unary(OpKind::Sum, a); }
Var mean(Var a) { return unary(OpKind::Mean, a); }
Var square(Var a) { return unary(OpKind::Square, a); }
Var sqrt(Var a) { return unary(OpKind::Sqrt, a); }
Var maximum(Var a, Var b) { return binary(OpKind::Max, a, b); }
Var scale(Var a, double factor) { return unary(OpKind::Scale, a, OpAttrs{0, 0, factor}); }
Var row(Var matrix, std::size_t index) { return unary(OpKind::Row, matrix, OpAttrs{index, 0, 1.0}); }
Var pick(Var a, std::size_t index) { return unary(OpKind::Pick, a, OpAttrs{index, 0, 1.0}); }

}  // namespace ag

}  // namespace hred
