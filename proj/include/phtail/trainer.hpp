// AdamW training loop: decoupled weight decay, bias-corrected moments,
// global gradient-norm clipping, tenfold learning-rate decay every ten
// epochs, deterministic batch shuffling and per-epoch checkpoints.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phtail/vae.hpp"

namespace phtail {

struct TrainConfig {
  int epochs = 13;
  Eigen::Index batch_size = 256;
  double lr0 = 1e-3;
  double weight_decay = 1e-5;
  double clip_norm = 5.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  // When nonempty, receives epoch_{k}.json checkpoints, trainlog.{json,csv}
  // and timing.json. Created if missing.
  std::string run_dir;
  bool dry_run = false;  // validate, skip all updates, leave params untouched
};

struct EpochStats {
  int epoch = 0;
  double mean_elbo = 0.0;
  double mean_log_lik = 0.0;
  double mean_kl = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  double final_nll = 0.0;  // eval_nll on the training data after the last epoch
  double total_seconds = 0.0;
};

// lr0 * 0.1^floor(epoch / 10); pure in the epoch index.
double lr_at_epoch(double lr0, int epoch);

// Scales all gradients by cap/norm when the joint l2 norm exceeds cap.
void clip_global_norm(std::vector<Eigen::MatrixXd>& grads, double cap);

// Mean over rows of -log p(x | z = posterior mean); deterministic.
double eval_nll(const Vae& v, const Eigen::MatrixXd& data);

TrainLog train(Vae& v, const Eigen::MatrixXd& data, const TrainConfig& cfg);

// Maximum-likelihood fit of one series-canonical phase type to scalar data,
// run through the same optimizer on softmax / cumulative-softplus leaves.
CanonicalPH fit_canonical_ph(const Eigen::VectorXd& data, Eigen::Index phases,
                             const TrainConfig& cfg);

}  // namespace phtail
