#include "phtail/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>
#include <string>

#include "phtail/jsonio.hpp"
#include "phtail/special.hpp"

namespace phtail {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.epochs < 1) {
    throw std::invalid_argument("TrainConfig: epochs must be at least 1");
  }
  if (cfg.batch_size < 1) {
    throw std::invalid_argument("TrainConfig: batch_size must be at least 1");
  }
  if (!(cfg.lr0 > 0.0) || !(cfg.clip_norm > 0.0) || !(cfg.adam_eps > 0.0)) {
    throw std::invalid_argument(
        "TrainConfig: lr0, clip_norm and adam_eps must be positive");
  }
  if (!(cfg.weight_decay >= 0.0)) {
    throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  }
  if (!(cfg.adam_beta1 > 0.0 && cfg.adam_beta1 < 1.0) ||
      !(cfg.adam_beta2 > 0.0 && cfg.adam_beta2 < 1.0)) {
    throw std::invalid_argument("TrainConfig: moment decays must be in (0,1)");
  }
}

void validate_data(const Eigen::MatrixXd& data, Eigen::Index dim) {
  if (data.rows() < 1) {
    throw std::invalid_argument("train: dataset is empty");
  }
  if (data.cols() != dim) {
    throw std::invalid_argument("train: dataset width mismatch");
  }
  if (!data.allFinite() || (data.array() < 0.0).any()) {
    throw std::invalid_argument("train: dataset must be finite and nonnegative");
  }
}

// Bias-corrected Adam moments with decoupled weight decay.
class AdamW {
 public:
  AdamW(const std::vector<Eigen::MatrixXd*>& params, const TrainConfig& cfg)
      : cfg_(cfg) {
    for (const Eigen::MatrixXd* p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }

  void update(const std::vector<Eigen::MatrixXd*>& params,
              const std::vector<Eigen::MatrixXd>& grads, double lr) {
    ++step_;
    const double c1 = 1.0 - std::pow(cfg_.adam_beta1, step_);
    const double c2 = 1.0 - std::pow(cfg_.adam_beta2, step_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = cfg_.adam_beta1 * m_[k] + (1.0 - cfg_.adam_beta1) * grads[k];
      v_[k] = cfg_.adam_beta2 * v_[k] +
              (1.0 - cfg_.adam_beta2) * grads[k].cwiseProduct(grads[k]);
      Eigen::MatrixXd& p = *params[k];
      p.array() -= lr * ((m_[k].array() / c1) /
                             ((v_[k].array() / c2).sqrt() + cfg_.adam_eps) +
                         cfg_.weight_decay * p.array());
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
  long long step_ = 0;
};

void write_train_logs(const TrainLog& log, const std::string& dir) {
  JsonWriter w;
  w.begin_object();
  w.key("epochs");
  w.begin_array();
  for (const EpochStats& s : log.epochs) {
    w.begin_object();
    w.field("epoch", s.epoch);
    w.field("mean_elbo", s.mean_elbo);
    w.field("mean_log_lik", s.mean_log_lik);
    w.field("mean_kl", s.mean_kl);
    w.end_object();
  }
  w.end_array();
  w.field("final_nll", log.final_nll);
  w.end_object();
  write_text_file(dir + "/trainlog.json", w.take());

  std::string csv = "epoch,mean_elbo,mean_log_lik,mean_kl\n";
  for (const EpochStats& s : log.epochs) {
    csv += std::to_string(s.epoch) + "," + format_double(s.mean_elbo) + "," +
           format_double(s.mean_log_lik) + "," + format_double(s.mean_kl) +
           "\n";
  }
  write_text_file(dir + "/trainlog.csv", csv);

  // Wall-clock numbers vary run to run, so they live in their own file and
  // stay out of any byte-for-byte artifact comparison.
  JsonWriter tw;
  tw.begin_object();
  tw.key("epoch_seconds");
  tw.begin_array();
  for (const EpochStats& s : log.epochs) {
    tw.number(s.seconds);
  }
  tw.end_array();
  tw.field("total_seconds", log.total_seconds);
  tw.end_object();
  write_text_file(dir + "/timing.json", tw.take());
}

}  // namespace

double lr_at_epoch(double lr0, int epoch) {
  if (epoch < 0) {
    throw std::invalid_argument("lr_at_epoch: negative epoch");
  }
  return lr0 * std::pow(0.1, epoch / 10);
}

void clip_global_norm(std::vector<Eigen::MatrixXd>& grads, double cap) {
  if (!(cap > 0.0)) {
    throw std::invalid_argument("clip_global_norm: cap must be positive");
  }
  double sq = 0.0;
  for (const Eigen::MatrixXd& g : grads) {
    sq += g.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm > cap) {
    const double scale = cap / norm;
    for (Eigen::MatrixXd& g : grads) {
      g *= scale;
    }
  }
}

double eval_nll(const Vae& v, const Eigen::MatrixXd& data) {
  validate_data(data, v.config.data_dim);
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    total += nll(v, data.row(i).transpose());
  }
  return total / static_cast<double>(data.rows());
}

TrainLog train(Vae& v, const Eigen::MatrixXd& data, const TrainConfig& cfg) {
  validate_config(cfg);
  validate_data(data, v.config.data_dim);
  const auto start = Clock::now();
  TrainLog log;
  if (!cfg.run_dir.empty()) {
    std::filesystem::create_directories(cfg.run_dir);
  }

  if (!cfg.dry_run) {
    const std::vector<Eigen::MatrixXd*> params = parameters(v);
    AdamW opt(params, cfg);
    Rng shuffle_rng(cfg.seed);
    Rng noise_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    const Eigen::Index n = data.rows();
    const Eigen::Index d = v.config.latent_dim;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const auto epoch_start = Clock::now();
      const double lr = lr_at_epoch(cfg.lr0, epoch);
      shuffle_rng.shuffle(order);
      double sum_elbo = 0.0, sum_ll = 0.0, sum_kl = 0.0;

      for (Eigen::Index b0 = 0; b0 < n; b0 += cfg.batch_size) {
        const std::string where = "batch " +
                                  std::to_string(b0 / cfg.batch_size) +
                                  " of epoch " + std::to_string(epoch);
        const Eigen::Index bsz = std::min(cfg.batch_size, n - b0);
        Tape tape;
        const VaeVars vars = register_vae(tape, v);
        NodeId batch_sum = -1;
        Eigen::VectorXd eps(d);
        try {
          for (Eigen::Index i = 0; i < bsz; ++i) {
            const Eigen::VectorXd row =
                data.row(order[static_cast<std::size_t>(b0 + i)]).transpose();
            for (Eigen::Index k = 0; k < d; ++k) {
              eps(k) = noise_rng.normal();
            }
            NodeId ll = -1, kl = -1;
            const NodeId e = elbo_node(tape, vars, v, row, eps, &ll, &kl);
            sum_elbo += tape.scalar(e);
            sum_ll += tape.scalar(ll);
            sum_kl += tape.scalar(kl);
            batch_sum = (i == 0) ? e : tape.add(batch_sum, e);
          }
        } catch (const std::exception& ex) {
          // NaN parameters surface here as constructor rejections inside the
          // density op; keep the batch coordinates in the diagnostic.
          throw std::runtime_error("training aborted in " + where + ": " +
                                   ex.what());
        }
        const NodeId loss = tape.negate(
            tape.mul(batch_sum, tape.leaf(1.0 / static_cast<double>(bsz))));
        if (std::isnan(tape.scalar(loss))) {
          throw std::runtime_error("training aborted: loss is NaN in " +
                                   where);
        }
        tape.backward(loss);
        // Parameter leaves hold ids 0..k-1: registration order matches
        // parameters().
        std::vector<Eigen::MatrixXd> grads;
        grads.reserve(params.size());
        for (std::size_t k = 0; k < params.size(); ++k) {
          grads.push_back(tape.grad(static_cast<NodeId>(k)));
        }
        clip_global_norm(grads, cfg.clip_norm);
        opt.update(params, grads, lr);
      }

      EpochStats stats;
      stats.epoch = epoch;
      stats.mean_elbo = sum_elbo / static_cast<double>(n);
      stats.mean_log_lik = sum_ll / static_cast<double>(n);
      stats.mean_kl = sum_kl / static_cast<double>(n);
      stats.seconds = seconds_since(epoch_start);
      log.epochs.push_back(stats);
      if (!cfg.run_dir.empty()) {
        save_vae(v, cfg.run_dir + "/epoch_" + std::to_string(epoch) + ".json");
      }
    }
  }

  log.final_nll = eval_nll(v, data);
  log.total_seconds = seconds_since(start);
  if (!cfg.run_dir.empty()) {
    write_train_logs(log, cfg.run_dir);
  }
  return log;
}

CanonicalPH fit_canonical_ph(const Eigen::VectorXd& data, Eigen::Index phases,
                             const TrainConfig& cfg) {
  validate_config(cfg);
  validate_data(data, 1);
  if (phases < 1) {
    throw std::invalid_argument("fit_canonical_ph: phases must be positive");
  }

  Eigen::MatrixXd raw_a = Eigen::MatrixXd::Zero(phases, 1);
  Eigen::MatrixXd raw_r = Eigen::MatrixXd::Zero(phases, 1);
  const std::vector<Eigen::MatrixXd*> params = {&raw_a, &raw_r};
  AdamW opt(params, cfg);
  Rng shuffle_rng(cfg.seed);
  const Eigen::Index n = data.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  if (!cfg.dry_run) {
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const double lr = lr_at_epoch(cfg.lr0, epoch);
      shuffle_rng.shuffle(order);
      for (Eigen::Index b0 = 0; b0 < n; b0 += cfg.batch_size) {
        const Eigen::Index bsz = std::min(cfg.batch_size, n - b0);
        Tape tape;
        const NodeId a_leaf = tape.leaf(raw_a);
        const NodeId r_leaf = tape.leaf(raw_r);
        const NodeId alpha = tape.softmax(a_leaf);
        const NodeId lambda = tape.cumsum(tape.softplus(r_leaf));
        NodeId batch_sum = -1;
        for (Eigen::Index i = 0; i < bsz; ++i) {
          const double x = data(order[static_cast<std::size_t>(b0 + i)]);
          const NodeId lp = tape.ph_log_pdf(alpha, lambda, x);
          batch_sum = (i == 0) ? lp : tape.add(batch_sum, lp);
        }
        const NodeId loss = tape.negate(
            tape.mul(batch_sum, tape.leaf(1.0 / static_cast<double>(bsz))));
        if (std::isnan(tape.scalar(loss))) {
          throw std::runtime_error(
              "fit aborted: loss is NaN in batch " +
              std::to_string(b0 / cfg.batch_size) + " of epoch " +
              std::to_string(epoch));
        }
        tape.backward(loss);
        std::vector<Eigen::MatrixXd> grads = {tape.grad(a_leaf),
                                              tape.grad(r_leaf)};
        clip_global_norm(grads, cfg.clip_norm);
        opt.update(params, grads, lr);
      }
    }
  }

  Eigen::VectorXd lambda(phases);
  double running = 0.0;
  for (Eigen::Index i = 0; i < phases; ++i) {
    running += softplus(raw_r(i, 0));
    lambda(i) = running;
  }
  return CanonicalPH(softmax(raw_a.col(0)), lambda);
}

}  // namespace phtail
