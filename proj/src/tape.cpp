#include "phtail/tape.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "phtail/special.hpp"

namespace phtail {
namespace {

bool same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

bool is_scalar(const Eigen::MatrixXd& a) {
  return a.rows() == 1 && a.cols() == 1;
}

void require_broadcastable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           const char* what) {
  if (!same_shape(a, b) && !is_scalar(a) && !is_scalar(b)) {
    throw std::invalid_argument(std::string(what) +
                                ": shapes neither equal nor scalar");
  }
}

void require_column(const Eigen::MatrixXd& a, const char* what) {
  if (a.cols() != 1) {
    throw std::invalid_argument(std::string(what) + ": expected a column");
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Eigen::MatrixXd value) {
  Node n;
  n.value = std::move(value);
  n.op = Op::kLeaf;
  return push(std::move(n));
}

NodeId Tape::leaf(double scalar) {
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = scalar;
  return leaf(std::move(v));
}

NodeId Tape::add(NodeId a, NodeId b) {
  require_broadcastable(val(a), val(b), "add");
  Node n;
  if (same_shape(val(a), val(b))) {
    n.value = val(a) + val(b);
  } else if (is_scalar(val(b))) {
    n.value = val(a).array() + val(b)(0, 0);
  } else {
    n.value = val(b).array() + val(a)(0, 0);
  }
  n.parents = {a, b};
  n.op = Op::kAdd;
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  require_broadcastable(val(a), val(b), "mul");
  Node n;
  if (same_shape(val(a), val(b))) {
    n.value = val(a).cwiseProduct(val(b));
  } else if (is_scalar(val(b))) {
    n.value = val(a) * val(b)(0, 0);
  } else {
    n.value = val(b) * val(a)(0, 0);
  }
  n.parents = {a, b};
  n.op = Op::kMul;
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  if (val(a).cols() != val(b).rows()) {
    throw std::invalid_argument("matmul: inner dimensions disagree");
  }
  Node n;
  n.value = val(a) * val(b);
  n.parents = {a, b};
  n.op = Op::kMatMul;
  return push(std::move(n));
}

NodeId Tape::exp(NodeId a) {
  Node n;
  n.value = val(a).array().exp();
  n.parents = {a, -1};
  n.op = Op::kExp;
  return push(std::move(n));
}

NodeId Tape::log(NodeId a) {
  Node n;
  n.value = val(a).array().log();
  n.parents = {a, -1};
  n.op = Op::kLog;
  return push(std::move(n));
}

NodeId Tape::softplus(NodeId a) {
  Node n;
  n.value = val(a).unaryExpr(&phtail::softplus);
  n.parents = {a, -1};
  n.op = Op::kSoftplus;
  return push(std::move(n));
}

NodeId Tape::softmax(NodeId a) {
  require_column(val(a), "softmax");
  Node n;
  n.value = phtail::softmax(val(a).col(0));
  n.parents = {a, -1};
  n.op = Op::kSoftmax;
  return push(std::move(n));
}

NodeId Tape::cumsum(NodeId a) {
  require_column(val(a), "cumsum");
  Node n;
  n.value.resize(val(a).rows(), 1);
  double running = 0.0;
  for (Eigen::Index i = 0; i < val(a).rows(); ++i) {
    running += val(a)(i, 0);
    n.value(i, 0) = running;
  }
  n.parents = {a, -1};
  n.op = Op::kCumsum;
  return push(std::move(n));
}

NodeId Tape::clamp(NodeId a, double lo, double hi) {
  if (!(lo <= hi)) {
    throw std::invalid_argument("clamp: lower bound above upper bound");
  }
  Node n;
  n.value = val(a).cwiseMax(lo).cwiseMin(hi);
  n.parents = {a, -1};
  n.op = Op::kClamp;
  n.aux0 = lo;
  n.aux1 = hi;
  return push(std::move(n));
}

NodeId Tape::relu(NodeId a) {
  return clamp(a, 0.0, std::numeric_limits<double>::infinity());
}

NodeId Tape::negate(NodeId a) {
  Node n;
  n.value = -val(a);
  n.parents = {a, -1};
  n.op = Op::kNegate;
  return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
  Node n;
  n.value.resize(1, 1);
  n.value(0, 0) = val(a).sum();
  n.parents = {a, -1};
  n.op = Op::kSum;
  return push(std::move(n));
}

NodeId Tape::mean(NodeId a) {
  if (val(a).size() == 0) {
    throw std::invalid_argument("mean: empty operand");
  }
  Node n;
  n.value.resize(1, 1);
  n.value(0, 0) = val(a).mean();
  n.parents = {a, -1};
  n.op = Op::kMean;
  return push(std::move(n));
}

NodeId Tape::square(NodeId a) {
  Node n;
  n.value = val(a).array().square();
  n.parents = {a, -1};
  n.op = Op::kSquare;
  return push(std::move(n));
}

NodeId Tape::slice_rows(NodeId a, Eigen::Index row0, Eigen::Index nrows) {
  if (row0 < 0 || nrows < 0 || row0 + nrows > val(a).rows()) {
    throw std::invalid_argument("slice_rows: range outside operand");
  }
  Node n;
  n.value = val(a).middleRows(row0, nrows);
  n.parents = {a, -1};
  n.op = Op::kSlice;
  n.aux0 = static_cast<double>(row0);
  n.aux1 = static_cast<double>(nrows);
  return push(std::move(n));
}

NodeId Tape::ph_log_pdf(NodeId alpha, NodeId lambda, double x,
                        const UniformizationConfig& cfg) {
  require_column(val(alpha), "ph_log_pdf");
  require_column(val(lambda), "ph_log_pdf");
  const CanonicalPH ph(val(alpha).col(0), val(lambda).col(0));
  const CanonicalLogPdf r = log_pdf_grad(ph, x, cfg);
  Node n;
  n.value.resize(1, 1);
  n.value(0, 0) = r.value;
  n.parents = {alpha, lambda};
  n.op = Op::kPhLogPdf;
  n.aux0 = x;
  n.extra_a = r.d_alpha;
  n.extra_b = r.d_lambda;
  return push(std::move(n));
}

double Tape::scalar(NodeId id) const {
  if (!is_scalar(nodes_[id].value)) {
    throw std::invalid_argument("scalar: node is not 1x1");
  }
  return nodes_[id].value(0, 0);
}

void Tape::accumulate(Eigen::MatrixXd& target, const Eigen::MatrixXd& g) {
  if (same_shape(target, g)) {
    target += g;
  } else {
    // Broadcast operand: fan the incoming gradient back into the 1x1 slot.
    target(0, 0) += g.sum();
  }
}

void Tape::backward(NodeId root) {
  if (root < 0 || static_cast<std::size_t>(root) >= nodes_.size()) {
    throw std::invalid_argument("backward: root outside tape");
  }
  if (!is_scalar(nodes_[root].value)) {
    throw std::invalid_argument("backward: root is not scalar");
  }
  for (Node& n : nodes_) {
    n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  }
  nodes_[root].grad(0, 0) = 1.0;

  for (NodeId id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.op == Op::kLeaf || n.grad.isZero(0.0)) {
      continue;
    }
    const Eigen::MatrixXd& g = n.grad;
    Node& pa = nodes_[n.parents[0]];
    switch (n.op) {
      case Op::kAdd: {
        Node& pb = nodes_[n.parents[1]];
        accumulate(pa.grad, g);
        accumulate(pb.grad, g);
        break;
      }
      case Op::kMul: {
        Node& pb = nodes_[n.parents[1]];
        if (same_shape(pa.value, pb.value)) {
          pa.grad += g.cwiseProduct(pb.value);
          pb.grad += g.cwiseProduct(pa.value);
        } else if (is_scalar(pb.value)) {
          pa.grad += g * pb.value(0, 0);
          pb.grad(0, 0) += g.cwiseProduct(pa.value).sum();
        } else {
          pb.grad += g * pa.value(0, 0);
          pa.grad(0, 0) += g.cwiseProduct(pb.value).sum();
        }
        break;
      }
      case Op::kMatMul: {
        Node& pb = nodes_[n.parents[1]];
        pa.grad.noalias() += g * pb.value.transpose();
        pb.grad.noalias() += pa.value.transpose() * g;
        break;
      }
      case Op::kExp:
        pa.grad += g.cwiseProduct(n.value);
        break;
      case Op::kLog:
        pa.grad += g.cwiseQuotient(pa.value);
        break;
      case Op::kSoftplus:
        pa.grad += g.cwiseProduct(pa.value.unaryExpr(&sigmoid_scalar));
        break;
      case Op::kSoftmax: {
        const double dot = g.cwiseProduct(n.value).sum();
        pa.grad += (n.value.array() * (g.array() - dot)).matrix();
        break;
      }
      case Op::kCumsum: {
        double running = 0.0;
        for (Eigen::Index i = n.value.rows() - 1; i >= 0; --i) {
          running += g(i, 0);
          pa.grad(i, 0) += running;
        }
        break;
      }
      case Op::kClamp: {
        const auto inside = (pa.value.array() >= n.aux0 &&
                             pa.value.array() <= n.aux1)
                                .cast<double>();
        pa.grad += g.cwiseProduct(inside.matrix());
        break;
      }
      case Op::kNegate:
        pa.grad -= g;
        break;
      case Op::kSum:
        pa.grad.array() += g(0, 0);
        break;
      case Op::kMean:
        pa.grad.array() += g(0, 0) / static_cast<double>(pa.value.size());
        break;
      case Op::kSquare:
        pa.grad += 2.0 * g.cwiseProduct(pa.value);
        break;
      case Op::kSlice: {
        const auto row0 = static_cast<Eigen::Index>(n.aux0);
        const auto nrows = static_cast<Eigen::Index>(n.aux1);
        pa.grad.middleRows(row0, nrows) += g;
        break;
      }
      case Op::kPhLogPdf: {
        Node& pb = nodes_[n.parents[1]];
        pa.grad += g(0, 0) * n.extra_a;
        pb.grad += g(0, 0) * n.extra_b;
        break;
      }
      case Op::kLeaf:
        break;
    }
  }
}

}  // namespace phtail
