#include "phtail/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace phtail {

MlpParams make_mlp(const std::vector<Eigen::Index>& widths,
                   bool activate_output, Rng& rng) {
  if (widths.size() < 2) {
    throw std::invalid_argument("make_mlp: need at least input and output");
  }
  for (const Eigen::Index w : widths) {
    if (w <= 0) {
      throw std::invalid_argument("make_mlp: widths must be positive");
    }
  }
  MlpParams p;
  p.activate_output = activate_output;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Eigen::Index fan_in = widths[l];
    const Eigen::Index fan_out = widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
      }
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::MatrixXd::Zero(fan_out, 1));
  }
  return p;
}

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& x) {
  if (x.size() != p.in_dim()) {
    throw std::invalid_argument("mlp_forward: input width mismatch");
  }
  Eigen::VectorXd h = x;
  for (Eigen::Index l = 0; l < p.layer_count(); ++l) {
    h = p.weights[l] * h + p.biases[l].col(0);
    if (l + 1 < p.layer_count() || p.activate_output) {
      h = h.cwiseMax(0.0);
    }
  }
  return h;
}

MlpVars register_mlp(Tape& t, const MlpParams& p) {
  MlpVars v;
  v.activate_output = p.activate_output;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    v.weights.push_back(t.leaf(p.weights[l]));
    v.biases.push_back(t.leaf(p.biases[l]));
  }
  return v;
}

NodeId mlp_forward(Tape& t, const MlpVars& v, NodeId x) {
  NodeId h = x;
  const std::size_t layers = v.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = t.add(t.matmul(v.weights[l], h), v.biases[l]);
    if (l + 1 < layers || v.activate_output) {
      h = t.relu(h);
    }
  }
  return h;
}

void collect_params(MlpParams& p, std::vector<Eigen::MatrixXd*>& out) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    out.push_back(&p.weights[l]);
    out.push_back(&p.biases[l]);
  }
}

}  // namespace phtail
