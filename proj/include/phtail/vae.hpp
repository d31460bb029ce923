// Variational autoencoder for nonnegative heavy-tailed data. The encoder is a
// diagonal Gaussian; the decoder is either a per-dimension series-canonical
// phase type (heads produce softmax weights and cumulative-softplus rates from
// a shared trunk) or a diagonal Gaussian baseline. One reparameterized sample
// per datum estimates the objective.
#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "phtail/mlp.hpp"
#include "phtail/phase_type.hpp"
#include "phtail/rng.hpp"
#include "phtail/tape.hpp"

namespace phtail {

enum class DecoderKind { kPhaseType, kGaussian };

struct VaeConfig {
  Eigen::Index data_dim = 1;
  Eigen::Index latent_dim = 2;
  Eigen::Index phases = 10;  // phases per output dimension
  double beta = 1.0;         // weight on the divergence term
  Eigen::Index hidden = 64;  // width of the two hidden layers everywhere
  double logvar_min = -30.0;
  double logvar_max = 20.0;
  double data_floor = 1e-8;  // observations are lifted to at least this
  UniformizationConfig uniformization;
};

struct Vae {
  VaeConfig config;
  DecoderKind kind = DecoderKind::kPhaseType;
  MlpParams encoder;  // data_dim -> hidden -> hidden -> 2 latent_dim
  // Phase-type decoder: shared rectified trunk plus two bias-free linear
  // heads per output dimension.
  MlpParams trunk;  // latent_dim -> hidden -> hidden
  std::vector<Eigen::MatrixXd> alpha_w;  // per dim, phases x hidden
  std::vector<Eigen::MatrixXd> rate_w;   // per dim, phases x hidden
  // Gaussian decoder: latent_dim -> hidden -> hidden -> 2 data_dim.
  MlpParams gauss;
};

Vae make_ph_vae(const VaeConfig& cfg, Rng& rng);
Vae make_gaussian_vae(const VaeConfig& cfg, Rng& rng);

// Every parameter matrix in a stable order (encoder layers, then decoder).
// Registration on a tape, the optimizer state and checkpoints all follow
// this order.
std::vector<Eigen::MatrixXd*> parameters(Vae& v);

struct Encoded {
  Eigen::VectorXd mu;
  Eigen::VectorXd logvar;  // already clamped
};

Encoded encode(const Vae& v, const Eigen::VectorXd& x);

Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu,
                               const Eigen::VectorXd& logvar,
                               const Eigen::VectorXd& eps);

std::vector<CanonicalPH> decode_ph(const Vae& v, const Eigen::VectorXd& z);

struct GaussianOut {
  Eigen::VectorXd mu;
  Eigen::VectorXd logvar;  // already clamped
};

GaussianOut decode_gaussian(const Vae& v, const Eigen::VectorXd& z);

// 0.5 sum(exp(lv) + mu^2 - 1 - lv), the divergence from the standard normal.
double kl_gaussian(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar);

// Diagonal Gaussian log density.
double gaussian_log_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                        const Eigen::VectorXd& logvar);

struct ElboParts {
  double elbo = 0.0;
  double log_lik = 0.0;
  double kl = 0.0;
};

// Single-sample objective at noise eps (eps = 0 gives the posterior mean
// path). x must be finite and nonnegative; it is lifted to data_floor before
// both encoding and likelihood evaluation.
ElboParts elbo_parts(const Vae& v, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& eps);
double elbo(const Vae& v, const Eigen::VectorXd& x, const Eigen::VectorXd& eps);

// Negative reconstruction log-likelihood at the posterior mean (eps = 0).
double nll(const Vae& v, const Eigen::VectorXd& x);

// Parameter node ids for one tape; register once, reuse across the batch.
struct VaeVars {
  MlpVars encoder;
  MlpVars trunk;
  std::vector<NodeId> alpha_w;
  std::vector<NodeId> rate_w;
  MlpVars gauss;
};

VaeVars register_vae(Tape& t, const Vae& v);

// Builds the objective for one datum and returns its (scalar) node. The
// optional out-parameters receive the log-likelihood and divergence nodes so
// a caller can read their values without a second pass.
NodeId elbo_node(Tape& t, const VaeVars& vars, const Vae& v,
                 const Eigen::VectorXd& x, const Eigen::VectorXd& eps,
                 NodeId* log_lik_out = nullptr, NodeId* kl_out = nullptr);

// Ancestral sampling: per row draw z from the latent prior, decode, then draw
// one observation per dimension. Gaussian decoder output is cut off at zero
// to stay inside the data domain.
Eigen::MatrixXd generate(const Vae& v, Eigen::Index n, Rng& rng);

void save_vae(const Vae& v, const std::string& path);
Vae load_vae(const std::string& path);

}  // namespace phtail
