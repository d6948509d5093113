#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmd/array.hpp"

namespace pmd {

using NodeId = std::int32_t;
using ParamId = std::int32_t;

struct TapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Gradient of the root with respect to each registered leaf, keyed by the
// caller-chosen parameter id. Leaves that do not influence the root map to
// zero arrays, never to missing entries.
using GradientMap = std::map<ParamId, RealArray>;

enum class OpKind : std::uint8_t {
  kLeaf,
  kConstant,
  kAdd,
  kMultiply,
  kMatMul,
  kRowLookup,
  kLogSoftmax,
  kSum,
  kScale,
  kNegate,
  kTanh,
};

const char* op_name(OpKind op);

// Single-use computation tape. Usage is strictly three-phase: build the graph
// (shapes are validated eagerly, so a malformed graph fails at construction),
// call forward() once on a scalar root, then optionally backward() on the
// same root. Leaf and constant payloads are copied in at build time, so the
// tape stays valid even if the source parameters are updated afterwards.
class Tape {
 public:
  NodeId leaf(const RealArray& value, ParamId id);
  NodeId constant(RealArray value);

  NodeId add(NodeId a, NodeId b);        // elementwise, shapes must match
  NodeId multiply(NodeId a, NodeId b);   // elementwise, shapes must match
  NodeId matmul(NodeId a, NodeId b);     // (n x k) * (k x m)
  NodeId row_lookup(NodeId table, std::vector<std::int32_t> rows);
  NodeId log_softmax(NodeId a);          // row-wise over a rank-2 input
  NodeId sum(NodeId a);                  // all entries -> scalar
  NodeId scale(NodeId a, double factor);
  NodeId negate(NodeId a);
  NodeId tanh(NodeId a);

  // Evaluates every node in construction order; returns the root's value.
  // The root must be a scalar.
  double forward(NodeId root);

  // Reverse sweep from the forwarded root. Errors if forward() has not run.
  GradientMap backward(NodeId root);

  // Value of any node after forward(). Errors before forward().
  const RealArray& value(NodeId id) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind op;
    std::array<NodeId, 2> in{-1, -1};
    RealArray value;    // shape fixed at build; entries filled by forward()
    RealArray adjoint;  // allocated by backward()
    double factor = 0.0;
    std::vector<std::int32_t> rows;  // kRowLookup gather indices
    ParamId param = -1;
  };

  NodeId push(Node n);
  const Node& checked(NodeId id, const char* op) const;
  [[noreturn]] void fail(const std::string& msg) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<ParamId, NodeId>> leaves_;
  bool forwarded_ = false;
};

}  // namespace pmd
