#include "pmd/tape.hpp"

#include <cmath>
#include <limits>

namespace pmd {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kAdd: return "add";
    case OpKind::kMultiply: return "multiply";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kRowLookup: return "row-lookup";
    case OpKind::kLogSoftmax: return "log-softmax";
    case OpKind::kSum: return "sum";
    case OpKind::kScale: return "scale";
    case OpKind::kNegate: return "negate";
    case OpKind::kTanh: return "tanh";
  }
  return "?";
}

void Tape::fail(const std::string& msg) const { throw TapeError(msg); }

const Tape::Node& Tape::checked(NodeId id, const char* op) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    fail(std::string(op) + ": invalid node id " + std::to_string(id));
  return nodes_[static_cast<std::size_t>(id)];
}

NodeId Tape::push(Node n) {
  if (forwarded_) fail("tape: cannot grow the graph after forward()");
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(const RealArray& value, ParamId id) {
  if (value.size() == 0) fail("leaf: empty array");
  for (const auto& [pid, _] : leaves_)
    if (pid == id) fail("leaf: duplicate parameter id " + std::to_string(id));
  Node n;
  n.op = OpKind::kLeaf;
  n.value = value;
  n.param = id;
  NodeId nid = push(std::move(n));
  leaves_.emplace_back(id, nid);
  return nid;
}

NodeId Tape::constant(RealArray value) {
  if (value.size() == 0) fail("constant: empty array");
  Node n;
  n.op = OpKind::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Node& na = checked(a, "add");
  const Node& nb = checked(b, "add");
  if (!na.value.same_shape(nb.value))
    fail("add: shape mismatch " + na.value.shape_str() + " + " +
         nb.value.shape_str());
  Node n;
  n.op = OpKind::kAdd;
  n.in = {a, b};
  n.value = RealArray::zeros(na.value.shape);
  return push(std::move(n));
}

NodeId Tape::multiply(NodeId a, NodeId b) {
  const Node& na = checked(a, "multiply");
  const Node& nb = checked(b, "multiply");
  if (!na.value.same_shape(nb.value))
    fail("multiply: shape mismatch " + na.value.shape_str() + " * " +
         nb.value.shape_str());
  Node n;
  n.op = OpKind::kMultiply;
  n.in = {a, b};
  n.value = RealArray::zeros(na.value.shape);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Node& na = checked(a, "matmul");
  const Node& nb = checked(b, "matmul");
  if (na.value.rank() != 2 || nb.value.rank() != 2 ||
      na.value.shape[1] != nb.value.shape[0])
    fail("matmul: shape mismatch " + na.value.shape_str() + " * " +
         nb.value.shape_str());
  Node n;
  n.op = OpKind::kMatMul;
  n.in = {a, b};
  n.value = RealArray::zeros({na.value.shape[0], nb.value.shape[1]});
  return push(std::move(n));
}

NodeId Tape::row_lookup(NodeId table, std::vector<std::int32_t> rows) {
  const Node& nt = checked(table, "row-lookup");
  if (nt.value.rank() != 2) fail("row-lookup: table must be rank 2");
  if (rows.empty()) fail("row-lookup: empty index list");
  const auto nrows = static_cast<std::int32_t>(nt.value.shape[0]);
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i] < 0 || rows[i] >= nrows)
      fail("row-lookup: index " + std::to_string(rows[i]) + " at position " +
           std::to_string(i) + " outside table " + nt.value.shape_str());
  Node n;
  n.op = OpKind::kRowLookup;
  n.in = {table, -1};
  n.value = RealArray::zeros({rows.size(), nt.value.shape[1]});
  n.rows = std::move(rows);
  return push(std::move(n));
}

NodeId Tape::log_softmax(NodeId a) {
  const Node& na = checked(a, "log-softmax");
  if (na.value.rank() != 2 || na.value.shape[1] == 0)
    fail("log-softmax: input must be rank 2 with nonzero columns, got " +
         na.value.shape_str());
  Node n;
  n.op = OpKind::kLogSoftmax;
  n.in = {a, -1};
  n.value = RealArray::zeros(na.value.shape);
  return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
  checked(a, "sum");
  Node n;
  n.op = OpKind::kSum;
  n.in = {a, -1};
  n.value = RealArray::zeros({1});
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double factor) {
  const Node& na = checked(a, "scale");
  if (!std::isfinite(factor)) fail("scale: non-finite factor");
  Node n;
  n.op = OpKind::kScale;
  n.in = {a, -1};
  n.value = RealArray::zeros(na.value.shape);
  n.factor = factor;
  return push(std::move(n));
}

NodeId Tape::negate(NodeId a) {
  const Node& na = checked(a, "negate");
  Node n;
  n.op = OpKind::kNegate;
  n.in = {a, -1};
  n.value = RealArray::zeros(na.value.shape);
  return push(std::move(n));
}

NodeId Tape::tanh(NodeId a) {
  const Node& na = checked(a, "tanh");
  Node n;
  n.op = OpKind::kTanh;
  n.in = {a, -1};
  n.value = RealArray::zeros(na.value.shape);
  return push(std::move(n));
}

double Tape::forward(NodeId root) {
  const Node& r = checked(root, "forward");
  if (!r.value.is_scalar())
    fail("forward: root must be scalar, got " + r.value.shape_str());
  if (forwarded_) fail("forward: tape already evaluated");

  for (Node& n : nodes_) {
    switch (n.op) {
      case OpKind::kLeaf:
      case OpKind::kConstant:
        break;
      case OpKind::kAdd: {
        const auto& a = nodes_[n.in[0]].value.data;
        const auto& b = nodes_[n.in[1]].value.data;
        for (std::size_t i = 0; i < a.size(); ++i)
          n.value.data[i] = a[i] + b[i];
        break;
      }
      case OpKind::kMultiply: {
        const auto& a = nodes_[n.in[0]].value.data;
        const auto& b = nodes_[n.in[1]].value.data;
        for (std::size_t i = 0; i < a.size(); ++i)
          n.value.data[i] = a[i] * b[i];
        break;
      }
      case OpKind::kMatMul: {
        const RealArray& a = nodes_[n.in[0]].value;
        const RealArray& b = nodes_[n.in[1]].value;
        const std::size_t rows = a.shape[0], inner = a.shape[1],
                          cols = b.shape[1];
        for (std::size_t i = 0; i < rows; ++i) {
          double* out = &n.value.data[i * cols];
          for (std::size_t k = 0; k < inner; ++k) {
            const double aik = a.data[i * inner + k];
            const double* brow = &b.data[k * cols];
            for (std::size_t j = 0; j < cols; ++j) out[j] += aik * brow[j];
          }
        }
        break;
      }
      case OpKind::kRowLookup: {
        const RealArray& t = nodes_[n.in[0]].value;
        const std::size_t cols = t.shape[1];
        for (std::size_t i = 0; i < n.rows.size(); ++i)
          for (std::size_t j = 0; j < cols; ++j)
            n.value.data[i * cols + j] =
                t.data[static_cast<std::size_t>(n.rows[i]) * cols + j];
        break;
      }
      case OpKind::kLogSoftmax: {
        const RealArray& x = nodes_[n.in[0]].value;
        const std::size_t rows = x.shape[0], cols = x.shape[1];
        for (std::size_t i = 0; i < rows; ++i) {
          const double* xr = &x.data[i * cols];
          double m = xr[0];
          for (std::size_t j = 1; j < cols; ++j) m = std::max(m, xr[j]);
          double s = 0.0;
          for (std::size_t j = 0; j < cols; ++j) s += std::exp(xr[j] - m);
          const double lse = m + std::log(s);
          for (std::size_t j = 0; j < cols; ++j)
            n.value.data[i * cols + j] = xr[j] - lse;
        }
        break;
      }
      case OpKind::kSum: {
        double s = 0.0;
        for (double v : nodes_[n.in[0]].value.data) s += v;
        n.value.data[0] = s;
        break;
      }
      case OpKind::kScale: {
        const auto& a = nodes_[n.in[0]].value.data;
        for (std::size_t i = 0; i < a.size(); ++i)
          n.value.data[i] = n.factor * a[i];
        break;
      }
      case OpKind::kNegate: {
        const auto& a = nodes_[n.in[0]].value.data;
        for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = -a[i];
        break;
      }
      case OpKind::kTanh: {
        const auto& a = nodes_[n.in[0]].value.data;
        for (std::size_t i = 0; i < a.size(); ++i)
          n.value.data[i] = std::tanh(a[i]);
        break;
      }
    }
  }
  forwarded_ = true;
  return nodes_[static_cast<std::size_t>(root)].value.data[0];
}

GradientMap Tape::backward(NodeId root) {
  const Node& r = checked(root, "backward");
  if (!forwarded_) fail("backward: called before forward()");
  if (!r.value.is_scalar())
    fail("backward: root must be scalar, got " + r.value.shape_str());

  for (Node& n : nodes_) n.adjoint = RealArray::zeros(n.value.shape);
  nodes_[static_cast<std::size_t>(root)].adjoint.data[0] = 1.0;

  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    Node& n = nodes_[idx];
    switch (n.op) {
      case OpKind::kLeaf:
      case OpKind::kConstant:
        break;
      case OpKind::kAdd: {
        auto& da = nodes_[n.in[0]].adjoint.data;
        auto& db = nodes_[n.in[1]].adjoint.data;
        for (std::size_t i = 0; i < da.size(); ++i) {
          da[i] += n.adjoint.data[i];
          db[i] += n.adjoint.data[i];
        }
        break;
      }
      case OpKind::kMultiply: {
        const auto& a = nodes_[n.in[0]].value.data;
        const auto& b = nodes_[n.in[1]].value.data;
        auto& da = nodes_[n.in[0]].adjoint.data;
        auto& db = nodes_[n.in[1]].adjoint.data;
        for (std::size_t i = 0; i < a.size(); ++i) {
          da[i] += n.adjoint.data[i] * b[i];
          db[i] += n.adjoint.data[i] * a[i];
        }
        break;
      }
      case OpKind::kMatMul: {
        const RealArray& a = nodes_[n.in[0]].value;
        const RealArray& b = nodes_[n.in[1]].value;
        RealArray& da = nodes_[n.in[0]].adjoint;
        RealArray& db = nodes_[n.in[1]].adjoint;
        const std::size_t rows = a.shape[0], inner = a.shape[1],
                          cols = b.shape[1];
        // dA += dY * B^T ; dB += A^T * dY
        for (std::size_t i = 0; i < rows; ++i) {
          const double* dyr = &n.adjoint.data[i * cols];
          for (std::size_t k = 0; k < inner; ++k) {
            const double* brow = &b.data[k * cols];
            double acc = 0.0;
            for (std::size_t j = 0; j < cols; ++j) acc += dyr[j] * brow[j];
            da.data[i * inner + k] += acc;
          }
          const double* arow = &a.data[i * inner];
          for (std::size_t k = 0; k < inner; ++k) {
            const double aik = arow[k];
            double* dbrow = &db.data[k * cols];
            for (std::size_t j = 0; j < cols; ++j) dbrow[j] += aik * dyr[j];
          }
        }
        break;
      }
      case OpKind::kRowLookup: {
        RealArray& dt = nodes_[n.in[0]].adjoint;
        const std::size_t cols = dt.shape[1];
        for (std::size_t i = 0; i < n.rows.size(); ++i)
          for (std::size_t j = 0; j < cols; ++j)
            dt.data[static_cast<std::size_t>(n.rows[i]) * cols + j] +=
                n.adjoint.data[i * cols + j];
        break;
      }
      case OpKind::kLogSoftmax: {
        // dx = dy - softmax(x) * rowsum(dy), softmax(x) = exp(y)
        RealArray& dx = nodes_[n.in[0]].adjoint;
        const std::size_t rows = n.value.shape[0], cols = n.value.shape[1];
        for (std::size_t i = 0; i < rows; ++i) {
          const double* dyr = &n.adjoint.data[i * cols];
          double rowsum = 0.0;
          for (std::size_t j = 0; j < cols; ++j) rowsum += dyr[j];
          for (std::size_t j = 0; j < cols; ++j)
            dx.data[i * cols + j] +=
                dyr[j] - std::exp(n.value.data[i * cols + j]) * rowsum;
        }
        break;
      }
      case OpKind::kSum: {
        auto& da = nodes_[n.in[0]].adjoint.data;
        const double g = n.adjoint.data[0];
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += g;
        break;
      }
      case OpKind::kScale: {
        auto& da = nodes_[n.in[0]].adjoint.data;
        for (std::size_t i = 0; i < da.size(); ++i)
          da[i] += n.factor * n.adjoint.data[i];
        break;
      }
      case OpKind::kNegate: {
        auto& da = nodes_[n.in[0]].adjoint.data;
        for (std::size_t i = 0; i < da.size(); ++i)
          da[i] -= n.adjoint.data[i];
        break;
      }
      case OpKind::kTanh: {
        auto& da = nodes_[n.in[0]].adjoint.data;
        for (std::size_t i = 0; i < da.size(); ++i) {
          const double y = n.value.data[i];
          da[i] += n.adjoint.data[i] * (1.0 - y * y);
        }
        break;
      }
    }
  }

  GradientMap grads;
  for (const auto& [pid, nid] : leaves_)
    grads[pid] = nodes_[static_cast<std::size_t>(nid)].adjoint;
  return grads;
}

const RealArray& Tape::value(NodeId id) const {
  const Node& n = checked(id, "value");
  if (!forwarded_) fail("value: tape not evaluated yet");
  return n.value;
}

}  // namespace pmd
