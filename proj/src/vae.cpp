#include "phtail/vae.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "phtail/jsonio.hpp"
#include "phtail/special.hpp"

namespace phtail {
namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

void validate_config(const VaeConfig& c) {
  if (c.data_dim < 1 || c.latent_dim < 1 || c.phases < 1 || c.hidden < 1) {
    throw std::invalid_argument("VaeConfig: dimensions must be positive");
  }
  if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) {
    throw std::invalid_argument("VaeConfig: beta must be finite and >= 0");
  }
  if (!(c.logvar_min < c.logvar_max)) {
    throw std::invalid_argument("VaeConfig: empty logvar interval");
  }
  if (!(c.data_floor > 0.0)) {
    throw std::invalid_argument("VaeConfig: data_floor must be positive");
  }
}

Eigen::MatrixXd xavier_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
    }
  }
  return m;
}

void require_data_point(const Vae& v, const Eigen::VectorXd& x) {
  if (x.size() != v.config.data_dim) {
    throw std::invalid_argument("data point width mismatch");
  }
  if (!x.allFinite() || (x.array() < 0.0).any()) {
    throw std::invalid_argument("data point must be finite and nonnegative");
  }
}

void require_noise(const Vae& v, const Eigen::VectorXd& eps) {
  if (eps.size() != v.config.latent_dim || !eps.allFinite()) {
    throw std::invalid_argument("noise vector must be finite with latent width");
  }
}

}  // namespace

Vae make_ph_vae(const VaeConfig& cfg, Rng& rng) {
  validate_config(cfg);
  Vae v;
  v.config = cfg;
  v.kind = DecoderKind::kPhaseType;
  v.encoder = make_mlp(
      {cfg.data_dim, cfg.hidden, cfg.hidden, 2 * cfg.latent_dim}, false, rng);
  v.trunk = make_mlp({cfg.latent_dim, cfg.hidden, cfg.hidden}, true, rng);
  for (Eigen::Index j = 0; j < cfg.data_dim; ++j) {
    v.alpha_w.push_back(xavier_matrix(cfg.phases, cfg.hidden, rng));
  }
  for (Eigen::Index j = 0; j < cfg.data_dim; ++j) {
    v.rate_w.push_back(xavier_matrix(cfg.phases, cfg.hidden, rng));
  }
  return v;
}

Vae make_gaussian_vae(const VaeConfig& cfg, Rng& rng) {
  validate_config(cfg);
  Vae v;
  v.config = cfg;
  v.kind = DecoderKind::kGaussian;
  v.encoder = make_mlp(
      {cfg.data_dim, cfg.hidden, cfg.hidden, 2 * cfg.latent_dim}, false, rng);
  v.gauss = make_mlp(
      {cfg.latent_dim, cfg.hidden, cfg.hidden, 2 * cfg.data_dim}, false, rng);
  return v;
}

std::vector<Eigen::MatrixXd*> parameters(Vae& v) {
  std::vector<Eigen::MatrixXd*> out;
  collect_params(v.encoder, out);
  if (v.kind == DecoderKind::kPhaseType) {
    collect_params(v.trunk, out);
    for (Eigen::MatrixXd& w : v.alpha_w) {
      out.push_back(&w);
    }
    for (Eigen::MatrixXd& w : v.rate_w) {
      out.push_back(&w);
    }
  } else {
    collect_params(v.gauss, out);
  }
  return out;
}

Encoded encode(const Vae& v, const Eigen::VectorXd& x) {
  if (x.size() != v.config.data_dim || !x.allFinite()) {
    throw std::invalid_argument("encode: input must be finite with data width");
  }
  const Eigen::VectorXd out = mlp_forward(v.encoder, x);
  Encoded e;
  e.mu = out.head(v.config.latent_dim);
  e.logvar = out.tail(v.config.latent_dim)
                 .cwiseMax(v.config.logvar_min)
                 .cwiseMin(v.config.logvar_max);
  return e;
}

Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu,
                               const Eigen::VectorXd& logvar,
                               const Eigen::VectorXd& eps) {
  if (mu.size() != logvar.size() || mu.size() != eps.size()) {
    throw std::invalid_argument("reparameterize: width mismatch");
  }
  return mu.array() + (0.5 * logvar.array()).exp() * eps.array();
}

std::vector<CanonicalPH> decode_ph(const Vae& v, const Eigen::VectorXd& z) {
  if (v.kind != DecoderKind::kPhaseType) {
    throw std::logic_error("decode_ph: model has a Gaussian decoder");
  }
  if (z.size() != v.config.latent_dim || !z.allFinite()) {
    throw std::invalid_argument("decode_ph: z must be finite with latent width");
  }
  const Eigen::VectorXd h = mlp_forward(v.trunk, z);
  std::vector<CanonicalPH> out;
  out.reserve(static_cast<std::size_t>(v.config.data_dim));
  for (Eigen::Index j = 0; j < v.config.data_dim; ++j) {
    const Eigen::VectorXd alpha = softmax(v.alpha_w[j] * h);
    const Eigen::VectorXd lraw = v.rate_w[j] * h;
    Eigen::VectorXd lambda(v.config.phases);
    double running = 0.0;
    for (Eigen::Index i = 0; i < v.config.phases; ++i) {
      running += softplus(lraw(i));
      lambda(i) = running;
    }
    out.emplace_back(alpha, lambda);
  }
  return out;
}

GaussianOut decode_gaussian(const Vae& v, const Eigen::VectorXd& z) {
  if (v.kind != DecoderKind::kGaussian) {
    throw std::logic_error("decode_gaussian: model has a phase-type decoder");
  }
  if (z.size() != v.config.latent_dim || !z.allFinite()) {
    throw std::invalid_argument(
        "decode_gaussian: z must be finite with latent width");
  }
  const Eigen::VectorXd out = mlp_forward(v.gauss, z);
  GaussianOut g;
  g.mu = out.head(v.config.data_dim);
  g.logvar = out.tail(v.config.data_dim)
                 .cwiseMax(v.config.logvar_min)
                 .cwiseMin(v.config.logvar_max);
  return g;
}

double kl_gaussian(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar) {
  if (mu.size() != logvar.size()) {
    throw std::invalid_argument("kl_gaussian: width mismatch");
  }
  return 0.5 * (logvar.array().exp() + mu.array().square() - 1.0 -
                logvar.array())
                   .sum();
}

double gaussian_log_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                        const Eigen::VectorXd& logvar) {
  if (x.size() != mu.size() || x.size() != logvar.size()) {
    throw std::invalid_argument("gaussian_log_pdf: width mismatch");
  }
  const Eigen::ArrayXd diff = x.array() - mu.array();
  const double s =
      (logvar.array() + diff.square() * (-logvar.array()).exp()).sum();
  return -0.5 * s - 0.5 * kLogTwoPi * static_cast<double>(x.size());
}

ElboParts elbo_parts(const Vae& v, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& eps) {
  require_data_point(v, x);
  require_noise(v, eps);
  const Eigen::VectorXd xf = x.cwiseMax(v.config.data_floor);
  const Encoded enc = encode(v, xf);
  const Eigen::VectorXd z = reparameterize(enc.mu, enc.logvar, eps);
  ElboParts parts;
  parts.kl = kl_gaussian(enc.mu, enc.logvar);
  if (v.kind == DecoderKind::kPhaseType) {
    const std::vector<CanonicalPH> phs = decode_ph(v, z);
    for (Eigen::Index j = 0; j < v.config.data_dim; ++j) {
      parts.log_lik += log_pdf(phs[j], xf(j), v.config.uniformization);
    }
  } else {
    const GaussianOut g = decode_gaussian(v, z);
    parts.log_lik = gaussian_log_pdf(xf, g.mu, g.logvar);
  }
  parts.elbo = parts.log_lik - v.config.beta * parts.kl;
  return parts;
}

double elbo(const Vae& v, const Eigen::VectorXd& x,
            const Eigen::VectorXd& eps) {
  return elbo_parts(v, x, eps).elbo;
}

double nll(const Vae& v, const Eigen::VectorXd& x) {
  return -elbo_parts(v, x, Eigen::VectorXd::Zero(v.config.latent_dim)).log_lik;
}

VaeVars register_vae(Tape& t, const Vae& v) {
  VaeVars vars;
  vars.encoder = register_mlp(t, v.encoder);
  if (v.kind == DecoderKind::kPhaseType) {
    vars.trunk = register_mlp(t, v.trunk);
    for (const Eigen::MatrixXd& w : v.alpha_w) {
      vars.alpha_w.push_back(t.leaf(w));
    }
    for (const Eigen::MatrixXd& w : v.rate_w) {
      vars.rate_w.push_back(t.leaf(w));
    }
  } else {
    vars.gauss = register_mlp(t, v.gauss);
  }
  return vars;
}

NodeId elbo_node(Tape& t, const VaeVars& vars, const Vae& v,
                 const Eigen::VectorXd& x, const Eigen::VectorXd& eps,
                 NodeId* log_lik_out, NodeId* kl_out) {
  require_data_point(v, x);
  require_noise(v, eps);
  const Eigen::VectorXd xf = x.cwiseMax(v.config.data_floor);
  const Eigen::Index d = v.config.latent_dim;
  const Eigen::Index data_dim = v.config.data_dim;

  const NodeId enc_out = mlp_forward(t, vars.encoder, t.leaf(xf));
  const NodeId mu = t.slice_rows(enc_out, 0, d);
  const NodeId lv = t.clamp(t.slice_rows(enc_out, d, d), v.config.logvar_min,
                            v.config.logvar_max);
  const NodeId z =
      t.add(mu, t.mul(t.exp(t.mul(lv, t.leaf(0.5))), t.leaf(Eigen::MatrixXd(eps))));

  const NodeId kl_core = t.add(t.add(t.exp(lv), t.square(mu)),
                               t.negate(t.add(lv, t.leaf(1.0))));
  const NodeId kl = t.mul(t.leaf(0.5), t.sum(kl_core));

  NodeId log_lik;
  if (v.kind == DecoderKind::kPhaseType) {
    const NodeId h = mlp_forward(t, vars.trunk, z);
    log_lik = -1;
    for (Eigen::Index j = 0; j < data_dim; ++j) {
      const NodeId alpha = t.softmax(t.matmul(vars.alpha_w[j], h));
      const NodeId lambda = t.cumsum(t.softplus(t.matmul(vars.rate_w[j], h)));
      const NodeId lj =
          t.ph_log_pdf(alpha, lambda, xf(j), v.config.uniformization);
      log_lik = (j == 0) ? lj : t.add(log_lik, lj);
    }
  } else {
    const NodeId out = mlp_forward(t, vars.gauss, z);
    const NodeId gmu = t.slice_rows(out, 0, data_dim);
    const NodeId glv = t.clamp(t.slice_rows(out, data_dim, data_dim),
                               v.config.logvar_min, v.config.logvar_max);
    const NodeId diff = t.add(t.leaf(Eigen::MatrixXd(xf)), t.negate(gmu));
    const NodeId term = t.mul(t.square(diff), t.exp(t.negate(glv)));
    const NodeId ssum = t.sum(t.add(glv, term));
    log_lik = t.add(t.mul(t.leaf(-0.5), ssum),
                    t.leaf(-0.5 * kLogTwoPi * static_cast<double>(data_dim)));
  }
  if (log_lik_out != nullptr) {
    *log_lik_out = log_lik;
  }
  if (kl_out != nullptr) {
    *kl_out = kl;
  }
  return t.add(log_lik, t.negate(t.mul(t.leaf(v.config.beta), kl)));
}

Eigen::MatrixXd generate(const Vae& v, Eigen::Index n, Rng& rng) {
  if (n < 0) {
    throw std::invalid_argument("generate: negative count");
  }
  Eigen::MatrixXd table(n, v.config.data_dim);
  Eigen::VectorXd z(v.config.latent_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < v.config.latent_dim; ++k) {
      z(k) = rng.normal();
    }
    if (v.kind == DecoderKind::kPhaseType) {
      const std::vector<CanonicalPH> phs = decode_ph(v, z);
      for (Eigen::Index j = 0; j < v.config.data_dim; ++j) {
        table(i, j) = sample(phs[j], rng);
      }
    } else {
      const GaussianOut g = decode_gaussian(v, z);
      for (Eigen::Index j = 0; j < v.config.data_dim; ++j) {
        const double draw =
            g.mu(j) + std::exp(0.5 * g.logvar(j)) * rng.normal();
        table(i, j) = std::max(draw, 0.0);
      }
    }
  }
  return table;
}

namespace {

void write_matrix(JsonWriter& w, const Eigen::MatrixXd& m) {
  w.begin_array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    w.begin_array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      w.number(m(i, j));
    }
    w.end_array();
  }
  w.end_array();
}

void write_mlp(JsonWriter& w, const MlpParams& p) {
  w.begin_object();
  w.field("activate_output", p.activate_output);
  w.key("weights");
  w.begin_array();
  for (const Eigen::MatrixXd& m : p.weights) {
    write_matrix(w, m);
  }
  w.end_array();
  w.key("biases");
  w.begin_array();
  for (const Eigen::MatrixXd& m : p.biases) {
    write_matrix(w, m);
  }
  w.end_array();
  w.end_object();
}

Eigen::MatrixXd read_matrix(const nlohmann::json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) {
    return Eigen::MatrixXd(0, 0);
  }
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::invalid_argument("checkpoint: ragged matrix");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
  }
  return m;
}

MlpParams read_mlp(const nlohmann::json& j) {
  MlpParams p;
  p.activate_output = j.at("activate_output").get<bool>();
  for (const auto& m : j.at("weights")) {
    p.weights.push_back(read_matrix(m));
  }
  for (const auto& m : j.at("biases")) {
    p.biases.push_back(read_matrix(m));
  }
  if (p.weights.size() != p.biases.size() || p.weights.empty()) {
    throw std::invalid_argument("checkpoint: malformed network block");
  }
  return p;
}

}  // namespace

void save_vae(const Vae& v, const std::string& path) {
  JsonWriter w;
  w.begin_object();
  w.field("kind", v.kind == DecoderKind::kPhaseType ? "ph" : "gaussian");
  w.key("config");
  w.begin_object();
  w.field("data_dim", static_cast<long long>(v.config.data_dim));
  w.field("latent_dim", static_cast<long long>(v.config.latent_dim));
  w.field("phases", static_cast<long long>(v.config.phases));
  w.field("beta", v.config.beta);
  w.field("hidden", static_cast<long long>(v.config.hidden));
  w.field("logvar_min", v.config.logvar_min);
  w.field("logvar_max", v.config.logvar_max);
  w.field("data_floor", v.config.data_floor);
  w.key("uniformization");
  w.begin_object();
  w.field("tolerance", v.config.uniformization.tolerance);
  w.field("max_terms", static_cast<long long>(v.config.uniformization.max_terms));
  w.end_object();
  w.end_object();
  w.key("encoder");
  write_mlp(w, v.encoder);
  if (v.kind == DecoderKind::kPhaseType) {
    w.key("trunk");
    write_mlp(w, v.trunk);
    w.key("alpha_heads");
    w.begin_array();
    for (const Eigen::MatrixXd& m : v.alpha_w) {
      write_matrix(w, m);
    }
    w.end_array();
    w.key("rate_heads");
    w.begin_array();
    for (const Eigen::MatrixXd& m : v.rate_w) {
      write_matrix(w, m);
    }
    w.end_array();
  } else {
    w.key("gauss");
    write_mlp(w, v.gauss);
  }
  w.end_object();
  write_text_file(path, w.take());
}

Vae load_vae(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(read_text_file(path));
  Vae v;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "ph") {
    v.kind = DecoderKind::kPhaseType;
  } else if (kind == "gaussian") {
    v.kind = DecoderKind::kGaussian;
  } else {
    throw std::invalid_argument("checkpoint: unknown decoder kind " + kind);
  }
  const auto& c = j.at("config");
  v.config.data_dim = c.at("data_dim").get<Eigen::Index>();
  v.config.latent_dim = c.at("latent_dim").get<Eigen::Index>();
  v.config.phases = c.at("phases").get<Eigen::Index>();
  v.config.beta = c.at("beta").get<double>();
  v.config.hidden = c.at("hidden").get<Eigen::Index>();
  v.config.logvar_min = c.at("logvar_min").get<double>();
  v.config.logvar_max = c.at("logvar_max").get<double>();
  v.config.data_floor = c.at("data_floor").get<double>();
  v.config.uniformization.tolerance =
      c.at("uniformization").at("tolerance").get<double>();
  v.config.uniformization.max_terms =
      c.at("uniformization").at("max_terms").get<int>();
  validate_config(v.config);
  v.encoder = read_mlp(j.at("encoder"));
  if (v.encoder.out_dim() != 2 * v.config.latent_dim) {
    throw std::invalid_argument("checkpoint: encoder output width mismatch");
  }
  if (v.kind == DecoderKind::kPhaseType) {
    v.trunk = read_mlp(j.at("trunk"));
    for (const auto& m : j.at("alpha_heads")) {
      v.alpha_w.push_back(read_matrix(m));
    }
    for (const auto& m : j.at("rate_heads")) {
      v.rate_w.push_back(read_matrix(m));
    }
    const auto dims = static_cast<std::size_t>(v.config.data_dim);
    if (v.alpha_w.size() != dims || v.rate_w.size() != dims) {
      throw std::invalid_argument("checkpoint: head count mismatch");
    }
    for (const Eigen::MatrixXd& m : v.alpha_w) {
      if (m.rows() != v.config.phases) {
        throw std::invalid_argument("checkpoint: head width mismatch");
      }
    }
    for (const Eigen::MatrixXd& m : v.rate_w) {
      if (m.rows() != v.config.phases) {
        throw std::invalid_argument("checkpoint: head width mismatch");
      }
    }
  } else {
    v.gauss = read_mlp(j.at("gauss"));
    if (v.gauss.out_dim() != 2 * v.config.data_dim) {
      throw std::invalid_argument("checkpoint: decoder output width mismatch");
    }
  }
  return v;
}

}  // namespace phtail
