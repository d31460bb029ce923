// Small fully connected networks with rectifier activations, in two flavors:
// a plain double-precision forward pass and a tape forward pass that shares
// the same parameters. Weight matrices are (out x in), biases are columns.
#pragma once

#include <vector>

#include <Eigen/Core>

#include "phtail/rng.hpp"
#include "phtail/tape.hpp"

namespace phtail {

struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::MatrixXd> biases;
  // Apply the rectifier after the last affine layer too. Decoder trunks that
  // feed linear heads use this; plain output layers leave it off.
  bool activate_output = false;

  Eigen::Index layer_count() const {
    return static_cast<Eigen::Index>(weights.size());
  }
  Eigen::Index in_dim() const { return weights.front().cols(); }
  Eigen::Index out_dim() const { return weights.back().rows(); }
};

// widths = {in, hidden..., out}. Weights draw uniformly from
// [-limit, limit] with limit = sqrt(6 / (fan_in + fan_out)), filled in
// Eigen's column-major storage order layer by layer; biases start at zero.
MlpParams make_mlp(const std::vector<Eigen::Index>& widths,
                   bool activate_output, Rng& rng);

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& x);

// Node ids of the parameters on some tape, in registration order
// (W0, b0, W1, b1, ...).
struct MlpVars {
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;
  bool activate_output = false;
};

MlpVars register_mlp(Tape& t, const MlpParams& p);
NodeId mlp_forward(Tape& t, const MlpVars& v, NodeId x);

// Appends pointers to every parameter matrix in registration order, matching
// register_mlp node for node. The optimizer walks this list.
void collect_params(MlpParams& p, std::vector<Eigen::MatrixXd*>& out);

}  // namespace phtail
