// Reverse-mode differentiation over dense arrays. A Tape owns a flat list of
// nodes (value, gradient accumulator, parent links, op id); building ops
// appends nodes, backward() walks the list in reverse. Scalars are 1x1,
// vectors are single-column. The truncation index of the phase-type density
// op is fixed by its forward pass, so gradients differentiate exactly the
// polynomial that was evaluated.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "phtail/phase_type.hpp"

namespace phtail {

using NodeId = std::int32_t;

class Tape {
 public:
  NodeId leaf(Eigen::MatrixXd value);
  NodeId leaf(double scalar);

  // Elementwise ops accept equal shapes or a 1x1 on either side (broadcast).
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId softplus(NodeId a);
  NodeId softmax(NodeId a);  // single column
  NodeId cumsum(NodeId a);   // single column
  NodeId clamp(NodeId a, double lo, double hi);  // gradient 1 inside, 0 outside
  NodeId relu(NodeId a);
  NodeId negate(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId square(NodeId a);
  NodeId slice_rows(NodeId a, Eigen::Index row0, Eigen::Index nrows);

  // Log-density of the canonical phase type at x >= 0 with the underflow
  // sentinel semantics of log_pdf; partial derivatives are computed by the
  // forward pass and are zero at the sentinel.
  NodeId ph_log_pdf(NodeId alpha, NodeId lambda, double x,
                    const UniformizationConfig& cfg = {});

  // Resets all gradients, seeds the 1x1 root with 1 and sweeps the list in
  // reverse. Throws std::invalid_argument when the root is not scalar.
  void backward(NodeId root);

  const Eigen::MatrixXd& value(NodeId id) const { return nodes_[id].value; }
  const Eigen::MatrixXd& grad(NodeId id) const { return nodes_[id].grad; }
  double scalar(NodeId id) const;

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf, kAdd, kMul, kMatMul, kExp, kLog, kSoftplus, kSoftmax, kCumsum,
    kClamp, kNegate, kSum, kMean, kSquare, kSlice, kPhLogPdf,
  };

  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::array<NodeId, 2> parents{-1, -1};
    Op op = Op::kLeaf;
    double aux0 = 0.0;  // clamp lower bound / slice start
    double aux1 = 0.0;  // clamp upper bound / slice height
    Eigen::MatrixXd extra_a;  // ph op: d value / d alpha
    Eigen::MatrixXd extra_b;  // ph op: d value / d lambda
  };

  NodeId push(Node node);
  const Eigen::MatrixXd& val(NodeId id) const { return nodes_[id].value; }
  static void accumulate(Eigen::MatrixXd& target, const Eigen::MatrixXd& g);

  std::vector<Node> nodes_;
};

}  // namespace phtail
