#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "oracles.hpp"
#include "phtail/jsonio.hpp"
#include "phtail/vae.hpp"

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace phtail;

namespace {

VaeConfig tiny_config(Index data_dim, Index latent_dim, Index phases,
                      Index hidden, double beta = 1.0) {
  VaeConfig cfg;
  cfg.data_dim = data_dim;
  cfg.latent_dim = latent_dim;
  cfg.phases = phases;
  cfg.hidden = hidden;
  cfg.beta = beta;
  return cfg;
}

void zero_params(Vae& v) {
  for (MatrixXd* p : parameters(v)) {
    p->setZero();
  }
}

// Zero-initialized biases can leave rectifier pre-activations exactly on the
// kink (a dead first layer makes every second-layer pre-activation 0), where
// central differences see half the one-sided slope. Small nonzero biases
// move the network off that measure-zero set before a finite-difference run.
void jitter_biases(Vae& v, Rng& rng) {
  for (MatrixXd* p : parameters(v)) {
    if (p->cols() == 1) {
      for (Index i = 0; i < p->rows(); ++i) {
        (*p)(i, 0) = 0.05 + 0.1 * rng.uniform();
      }
    }
  }
}

// D=1 model whose decoder ignores z and always emits exponential(rate):
// zero everything, point the trunk at a constant unit vector and aim the
// rate head so the softplus lands exactly on the target.
Vae frozen_exponential_vae(double rate) {
  Rng rng(1);
  Vae v = make_ph_vae(tiny_config(1, 1, 1, 2), rng);
  zero_params(v);
  v.trunk.biases[1](0, 0) = 1.0;
  v.rate_w[0](0, 0) = std::log(std::exp(rate) - 1.0);
  return v;
}

double tape_elbo(const Vae& v, const VectorXd& x, const VectorXd& eps) {
  Tape t;
  const VaeVars vars = register_vae(t, v);
  return t.scalar(elbo_node(t, vars, v, x, eps));
}

}  // namespace

TEST_CASE("zero weight encoder maps any input to the origin") {
  Rng rng(7);
  Vae v = make_ph_vae(tiny_config(2, 2, 3, 4), rng);
  zero_params(v);
  VectorXd x(2);
  x << 3.5, 0.25;
  const Encoded e = encode(v, x);
  CHECK(e.mu.isZero(0.0));
  CHECK(e.logvar.isZero(0.0));
}

TEST_CASE("raw log variance clamps into the stability interval") {
  Rng rng(7);
  Vae v = make_ph_vae(tiny_config(1, 1, 2, 2), rng);
  zero_params(v);
  VectorXd x(1);
  x << 1.0;
  v.encoder.biases[2](1, 0) = 25.0;
  CHECK(encode(v, x).logvar(0) == 20.0);
  v.encoder.biases[2](1, 0) = -40.0;
  CHECK(encode(v, x).logvar(0) == -30.0);
}

TEST_CASE("reparameterization is an affine map of the noise") {
  VectorXd mu(3), lv(3), eps(3);
  mu << 0.5, -1.0, 2.0;
  lv << 0.0, 1.0, -2.0;
  eps.setZero();
  CHECK(reparameterize(mu, lv, eps) == mu);
  eps << 1.0, -2.0, 0.5;
  CHECK(reparameterize(VectorXd::Zero(3), VectorXd::Zero(3), eps) == eps);

  // d z_i / d logvar_i = 0.5 exp(logvar_i / 2) eps_i.
  const double h = 1e-6;
  for (Index i = 0; i < 3; ++i) {
    VectorXd up = lv, dn = lv;
    up(i) += h;
    dn(i) -= h;
    const double fd = (reparameterize(mu, up, eps)(i) -
                       reparameterize(mu, dn, eps)(i)) /
                      (2.0 * h);
    const double analytic = 0.5 * std::exp(0.5 * lv(i)) * eps(i);
    CHECK(oracle::rel_err(analytic, fd) < 1e-5);
  }
}

TEST_CASE("decoder heads at zero give uniform mixing and a softplus ladder") {
  Rng rng(7);
  Vae v = make_ph_vae(tiny_config(1, 2, 5, 4), rng);
  zero_params(v);
  const std::vector<CanonicalPH> phs = decode_ph(v, VectorXd::Zero(2));
  REQUIRE(phs.size() == 1);
  CHECK(phs[0].alpha.isApproxToConstant(0.2, 1e-15));
  const double ln2 = std::log(2.0);
  for (Index i = 0; i < 5; ++i) {
    CHECK(phs[0].lambda(i) ==
          doctest::Approx(static_cast<double>(i + 1) * ln2).epsilon(1e-13));
  }
}

TEST_CASE("decoded parameters stay valid across a wide latent sweep") {
  Rng rng(11);
  Vae v = make_ph_vae(tiny_config(2, 4, 10, 16), rng);
  Rng zrng(99);
  for (int trial = 0; trial < 10000; ++trial) {
    VectorXd z(4);
    for (Index k = 0; k < 4; ++k) {
      z(k) = zrng.normal();
    }
    const double scale = 100.0 * zrng.uniform();
    z *= scale / std::max(z.norm(), 1e-12);
    // The constructor revalidates the simplex and rate ordering; a violation
    // would throw here.
    const std::vector<CanonicalPH> phs = decode_ph(v, z);
    for (const CanonicalPH& ph : phs) {
      CHECK(std::abs(ph.alpha.sum() - 1.0) <= 1e-9);
      CHECK(ph.lambda(0) > 0.0);
      for (Index i = 1; i < ph.lambda.size(); ++i) {
        CHECK(ph.lambda(i) >= ph.lambda(i - 1));
      }
    }
  }
}

TEST_CASE("gaussian decoder at zero weights returns its output biases") {
  Rng rng(7);
  Vae v = make_gaussian_vae(tiny_config(2, 2, 1, 4), rng);
  zero_params(v);
  v.gauss.biases[2](0, 0) = 1.5;
  v.gauss.biases[2](1, 0) = -2.0;
  v.gauss.biases[2](2, 0) = 3.0;
  v.gauss.biases[2](3, 0) = 25.0;
  const GaussianOut g = decode_gaussian(v, VectorXd::Zero(2));
  CHECK(g.mu(0) == 1.5);
  CHECK(g.mu(1) == -2.0);
  CHECK(g.logvar(0) == 3.0);
  CHECK(g.logvar(1) == 20.0);
}

TEST_CASE("gaussian log density at the mean with unit variance") {
  const VectorXd x = VectorXd::Constant(1, 0.7);
  CHECK(gaussian_log_pdf(x, x, VectorXd::Zero(1)) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-15));
  const VectorXd x3 = VectorXd::Constant(3, -1.2);
  CHECK(gaussian_log_pdf(x3, x3, VectorXd::Zero(3)) ==
        doctest::Approx(3.0 * -0.9189385332046727).epsilon(1e-15));
}

TEST_CASE("divergence closed forms") {
  CHECK(kl_gaussian(VectorXd::Zero(1), VectorXd::Zero(1)) == 0.0);
  CHECK(kl_gaussian(VectorXd::Constant(1, 1.0), VectorXd::Zero(1)) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK(kl_gaussian(VectorXd::Zero(1), VectorXd::Constant(1, std::log(4.0))) ==
        doctest::Approx(0.8068528194400547).epsilon(1e-14));
  CHECK(kl_gaussian(VectorXd::Constant(2, 0.3),
                    VectorXd::Constant(2, -0.7)) >= 0.0);
}

TEST_CASE("beta zero reduces the objective to pure reconstruction") {
  Rng rng(3);
  Vae v = make_ph_vae(tiny_config(2, 2, 3, 4, 0.0), rng);
  VectorXd x(2), eps(2);
  x << 0.9, 2.0;
  eps << 0.4, -0.2;
  const ElboParts parts = elbo_parts(v, x, eps);
  CHECK(parts.elbo == parts.log_lik);
  CHECK(parts.kl > 0.0);
}

TEST_CASE("frozen exponential decoder yields an objective of minus one") {
  const Vae v = frozen_exponential_vae(1.0);
  const VectorXd x = VectorXd::Constant(1, 1.0);
  const VectorXd eps = VectorXd::Zero(1);
  const ElboParts parts = elbo_parts(v, x, eps);
  CHECK(parts.kl == 0.0);
  CHECK(parts.log_lik == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(parts.elbo == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(tape_elbo(v, x, eps) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(nll(v, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("objective gradient matches finite differences on a toy model") {
  Rng rng(17);
  Vae v = make_ph_vae(tiny_config(2, 2, 3, 4), rng);
  jitter_biases(v, rng);
  VectorXd x(2), eps(2);
  x << 0.8, 2.5;
  eps << 0.3, -0.7;

  Tape t;
  const VaeVars vars = register_vae(t, v);
  t.backward(elbo_node(t, vars, v, x, eps));
  // Parameter leaves occupy ids 0..k-1 in the parameters() order because
  // register_vae ran first on an empty tape.
  std::vector<MatrixXd> grads;
  const std::vector<MatrixXd*> params = parameters(v);
  for (std::size_t k = 0; k < params.size(); ++k) {
    grads.push_back(t.grad(static_cast<NodeId>(k)));
  }

  const double h = 1e-4;
  int checked = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    MatrixXd& p = *params[k];
    for (Index j = 0; j < p.cols(); ++j) {
      for (Index i = 0; i < p.rows(); ++i) {
        const double keep = p(i, j);
        p(i, j) = keep + h;
        const double up = elbo(v, x, eps);
        p(i, j) = keep - h;
        const double dn = elbo(v, x, eps);
        p(i, j) = keep;
        const double fd = (up - dn) / (2.0 * h);
        CAPTURE(k);
        CAPTURE(i);
        CAPTURE(j);
        CHECK(oracle::rel_err(grads[k](i, j), fd) < 1e-3);
        ++checked;
      }
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("gaussian objective gradient matches finite differences") {
  Rng rng(23);
  Vae v = make_gaussian_vae(tiny_config(2, 2, 1, 4), rng);
  jitter_biases(v, rng);
  VectorXd x(2), eps(2);
  x << 0.8, 2.5;
  eps << 0.3, -0.7;

  Tape t;
  const VaeVars vars = register_vae(t, v);
  t.backward(elbo_node(t, vars, v, x, eps));
  const std::vector<MatrixXd*> params = parameters(v);

  const double h = 1e-5;
  for (std::size_t k = 0; k < params.size(); ++k) {
    MatrixXd& p = *params[k];
    const MatrixXd g = t.grad(static_cast<NodeId>(k));
    for (Index j = 0; j < p.cols(); ++j) {
      for (Index i = 0; i < p.rows(); ++i) {
        const double keep = p(i, j);
        p(i, j) = keep + h;
        const double up = elbo(v, x, eps);
        p(i, j) = keep - h;
        const double dn = elbo(v, x, eps);
        p(i, j) = keep;
        const double fd = (up - dn) / (2.0 * h);
        CAPTURE(k);
        CAPTURE(i);
        CAPTURE(j);
        CAPTURE(g(i, j));
        CHECK(oracle::rel_err(g(i, j), fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("tape and plain objective values agree for both decoders") {
  Rng rng(31);
  Rng draw(77);
  for (int trial = 0; trial < 50; ++trial) {
    const bool ph = (trial % 2 == 0);
    const VaeConfig cfg = tiny_config(2, 2, 4, 6, 0.5 + draw.uniform());
    Vae v = ph ? make_ph_vae(cfg, rng) : make_gaussian_vae(cfg, rng);
    VectorXd x(2), eps(2);
    x << 5.0 * draw.uniform(), 5.0 * draw.uniform();
    eps << draw.normal(), draw.normal();
    const double plain = elbo(v, x, eps);
    const double taped = tape_elbo(v, x, eps);
    CHECK(std::abs(taped - plain) <= 1e-10 * std::max(1.0, std::abs(plain)));
  }
}

TEST_CASE("objective stays finite from the floor to the deep tail") {
  Rng rng(5);
  Vae v = make_ph_vae(tiny_config(1, 2, 10, 8), rng);
  const VectorXd eps = VectorXd::Zero(2);
  for (const double xv : {0.0, 1e-12, 1.0, 1e3, 1e6}) {
    const double value = elbo(v, VectorXd::Constant(1, xv), eps);
    CHECK(std::isfinite(value));
  }
}

TEST_CASE("eval path mean is invariant to row order") {
  Rng rng(13);
  Vae v = make_ph_vae(tiny_config(2, 2, 5, 8), rng);
  Rng draw(29);
  const Index n = 64;
  MatrixXd data(n, 2);
  for (Index i = 0; i < n; ++i) {
    data(i, 0) = draw.exponential(1.0);
    data(i, 1) = draw.exponential(0.5);
  }
  double fwd = 0.0, rev = 0.0;
  for (Index i = 0; i < n; ++i) {
    fwd += nll(v, data.row(i).transpose());
    rev += nll(v, data.row(n - 1 - i).transpose());
  }
  CHECK(fwd / n == doctest::Approx(rev / n).epsilon(1e-12));
}

TEST_CASE("generation is reproducible and respects the data domain") {
  Rng rng(41);
  Vae v = make_ph_vae(tiny_config(2, 2, 4, 6), rng);
  Rng g1(123), g2(123);
  const MatrixXd a = generate(v, 200, g1);
  const MatrixXd b = generate(v, 200, g2);
  CHECK(a == b);
  CHECK((a.array() > 0.0).all());
  CHECK(generate(v, 0, g1).rows() == 0);

  Rng rng2(42);
  Vae gv = make_gaussian_vae(tiny_config(2, 2, 1, 6), rng2);
  Rng g3(7);
  const MatrixXd c = generate(gv, 500, g3);
  CHECK((c.array() >= 0.0).all());
}

TEST_CASE("frozen exponential decoder generates with the right mean") {
  const Vae v = frozen_exponential_vae(2.0);
  Rng rng(2024);
  const Index n = 100000;
  const MatrixXd table = generate(v, n, rng);
  const double mean = table.col(0).mean();
  const double se = 0.5 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean - 0.5) < 3.0 * se);
}

TEST_CASE("checkpoints round trip bitwise for both decoder kinds") {
  Rng rng(55);
  Vae ph = make_ph_vae(tiny_config(3, 4, 5, 6, 1.5), rng);
  Vae gauss = make_gaussian_vae(tiny_config(2, 2, 1, 4, 0.25), rng);
  for (Vae* src : {&ph, &gauss}) {
    const std::string path = "/tmp/phtail_vae_ckpt_test.json";
    save_vae(*src, path);
    Vae back = load_vae(path);
    CHECK(back.kind == src->kind);
    CHECK(back.config.data_dim == src->config.data_dim);
    CHECK(back.config.latent_dim == src->config.latent_dim);
    CHECK(back.config.phases == src->config.phases);
    CHECK(back.config.beta == src->config.beta);
    const std::vector<MatrixXd*> pa = parameters(*src);
    const std::vector<MatrixXd*> pb = parameters(back);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) {
      CHECK(*pa[k] == *pb[k]);
    }
    const std::string first = read_text_file(path);
    save_vae(back, path);
    CHECK(read_text_file(path) == first);
    std::remove(path.c_str());
  }
}

TEST_CASE("model inputs are validated") {
  Rng rng(9);
  Vae v = make_ph_vae(tiny_config(2, 2, 3, 4), rng);
  VectorXd bad(2), eps(2);
  bad << 1.0, std::nan("");
  eps.setZero();
  CHECK_THROWS_AS(encode(v, bad), std::invalid_argument);
  VectorXd neg(2);
  neg << -1.0, 1.0;
  CHECK_THROWS_AS(elbo(v, neg, eps), std::invalid_argument);
  CHECK_THROWS_AS(elbo(v, VectorXd::Ones(2), VectorXd::Zero(3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(decode_gaussian(v, VectorXd::Zero(2)), std::logic_error);
  Rng rng2(9);
  Vae g = make_gaussian_vae(tiny_config(2, 2, 1, 4), rng2);
  CHECK_THROWS_AS(decode_ph(g, VectorXd::Zero(2)), std::logic_error);
}
