#include "phtail/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "phtail/jsonio.hpp"
#include "phtail/special.hpp"

namespace phtail {
namespace {

constexpr double kOpenEps = 0x1p-53;

// The quantile maps, shared by true_quantile and the samplers. u is the
// lower-tail probability.
double quantile_impl(const MarginalSpec& spec, double u) {
  switch (spec.family) {
    case Family::kWeibull:
      return spec.p2 * std::pow(-std::log1p(-u), 1.0 / spec.p1);
    case Family::kPareto:
      return spec.p2 * std::pow(1.0 - u, -1.0 / spec.p1);
    case Family::kLognormal:
      return std::exp(spec.p1 + spec.p2 * normal_quantile(u));
    case Family::kBurr:
      return std::pow(std::pow(1.0 - u, -1.0 / spec.p2) - 1.0, 1.0 / spec.p1);
  }
  throw std::logic_error("unreachable");
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::kWeibull: return "weibull";
    case Family::kPareto: return "pareto";
    case Family::kLognormal: return "lognormal";
    case Family::kBurr: return "burr";
  }
  throw std::logic_error("unreachable");
}

std::string describe(const MarginalSpec& spec) {
  return family_name(spec.family) + "(" + format_double(spec.p1) + "," +
         format_double(spec.p2) + ")";
}

void validate_marginal(const MarginalSpec& spec) {
  switch (spec.family) {
    case Family::kWeibull:
    case Family::kPareto:
    case Family::kBurr:
      if (!(spec.p1 > 0.0) || !(spec.p2 > 0.0)) {
        throw std::invalid_argument(family_name(spec.family) +
                                    ": parameters must be positive");
      }
      return;
    case Family::kLognormal:
      if (!std::isfinite(spec.p1) || !(spec.p2 > 0.0)) {
        throw std::invalid_argument("lognormal: sigma must be positive");
      }
      return;
  }
  throw std::logic_error("unreachable");
}

double true_cdf(const MarginalSpec& spec, double x) {
  validate_marginal(spec);
  if (!(x >= 0.0)) {
    throw std::invalid_argument("true_cdf: x must be >= 0");
  }
  switch (spec.family) {
    case Family::kWeibull:
      return -std::expm1(-std::pow(x / spec.p2, spec.p1));
    case Family::kPareto:
      return x <= spec.p2 ? 0.0 : 1.0 - std::pow(spec.p2 / x, spec.p1);
    case Family::kLognormal:
      return x == 0.0 ? 0.0
                      : normal_cdf((std::log(x) - spec.p1) / spec.p2);
    case Family::kBurr:
      return 1.0 - std::pow(1.0 + std::pow(x, spec.p1), -spec.p2);
  }
  throw std::logic_error("unreachable");
}

double true_quantile(const MarginalSpec& spec, double q) {
  validate_marginal(spec);
  if (!(q > 0.0) || !(q < 1.0)) {
    throw std::invalid_argument("true_quantile: q must lie in (0, 1)");
  }
  return quantile_impl(spec, q);
}

double sample_marginal(const MarginalSpec& spec, Rng& rng) {
  const double u = rng.uniform();
  // Uniform draws live on the open interval, and the direct u forms below
  // match the quantile map composed with u -> 1-u in distribution.
  switch (spec.family) {
    case Family::kWeibull:
      return spec.p2 * std::pow(-std::log(u), 1.0 / spec.p1);
    case Family::kPareto:
      return spec.p2 * std::pow(u, -1.0 / spec.p1);
    case Family::kLognormal:
      return std::exp(spec.p1 + spec.p2 * normal_quantile(u));
    case Family::kBurr:
      return std::pow(std::pow(u, -1.0 / spec.p2) - 1.0, 1.0 / spec.p1);
  }
  throw std::logic_error("unreachable");
}

Dataset gen_marginal(const MarginalSpec& spec, Eigen::Index n,
                     std::uint64_t seed) {
  validate_marginal(spec);
  if (n < 1) {
    throw std::invalid_argument("gen_marginal: n must be >= 1");
  }
  Rng rng(seed);
  Dataset d;
  d.columns = {"x0"};
  d.values.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.values(i, 0) = sample_marginal(spec, rng);
  }
  d.provenance = "gen_marginal " + describe(spec) + " n=" + std::to_string(n) +
                 " seed=" + std::to_string(seed);
  return d;
}

void validate_copula(const CopulaSpec& spec) {
  const Eigen::Index dims = static_cast<Eigen::Index>(spec.marginals.size());
  if (dims < 1) {
    throw std::invalid_argument("copula: needs at least one marginal");
  }
  for (const MarginalSpec& m : spec.marginals) {
    validate_marginal(m);
  }
  if (spec.correlation.rows() != dims || spec.correlation.cols() != dims) {
    throw std::invalid_argument("copula: correlation must be D x D");
  }
  if (!spec.correlation.allFinite()) {
    throw std::invalid_argument("copula: correlation must be finite");
  }
  for (Eigen::Index i = 0; i < dims; ++i) {
    if (spec.correlation(i, i) != 1.0) {
      throw std::invalid_argument("copula: correlation diagonal must be 1");
    }
    for (Eigen::Index j = 0; j < i; ++j) {
      if (spec.correlation(i, j) != spec.correlation(j, i)) {
        throw std::invalid_argument("copula: correlation must be symmetric");
      }
    }
  }
  if (!(spec.nu > 0.0) || !std::isfinite(spec.nu)) {
    throw std::invalid_argument("copula: nu must be positive");
  }
  std::vector<bool> seen(static_cast<std::size_t>(dims), false);
  for (const Eigen::Index d : spec.independent_dims) {
    if (d < 0 || d >= dims) {
      throw std::invalid_argument("copula: independent dim out of range");
    }
    if (seen[static_cast<std::size_t>(d)]) {
      throw std::invalid_argument("copula: independent dim listed twice");
    }
    seen[static_cast<std::size_t>(d)] = true;
    for (Eigen::Index j = 0; j < dims; ++j) {
      if (j != d && spec.correlation(d, j) != 0.0) {
        throw std::invalid_argument(
            "copula: independent dim has nonzero correlation");
      }
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(spec.correlation);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("copula: correlation is not positive definite");
  }
}

Dataset gen_t_copula(const CopulaSpec& spec, Eigen::Index n,
                     std::uint64_t seed) {
  validate_copula(spec);
  if (n < 1) {
    throw std::invalid_argument("gen_t_copula: n must be >= 1");
  }
  const Eigen::Index dims = static_cast<Eigen::Index>(spec.marginals.size());
  const Eigen::MatrixXd chol =
      Eigen::LLT<Eigen::MatrixXd>(spec.correlation).matrixL();

  std::vector<bool> independent(static_cast<std::size_t>(dims), false);
  for (const Eigen::Index d : spec.independent_dims) {
    independent[static_cast<std::size_t>(d)] = true;
  }

  Rng rng(seed);
  Dataset d;
  d.columns.reserve(static_cast<std::size_t>(dims));
  for (Eigen::Index j = 0; j < dims; ++j) {
    d.columns.push_back("x" + std::to_string(j));
  }
  d.values.resize(n, dims);
  Eigen::VectorXd g(dims);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dims; ++j) {
      g(j) = rng.normal();
    }
    const Eigen::VectorXd y = chol * g;
    const double mix = std::sqrt(rng.chi_square(spec.nu) / spec.nu);
    for (Eigen::Index j = 0; j < dims; ++j) {
      double u;
      if (independent[static_cast<std::size_t>(j)]) {
        u = rng.uniform();
      } else {
        u = student_t_cdf(y(j) / mix, spec.nu);
        u = std::min(std::max(u, kOpenEps), 1.0 - kOpenEps);
      }
      d.values(i, j) = quantile_impl(spec.marginals[static_cast<std::size_t>(j)], u);
    }
  }

  std::string marg = "[";
  for (std::size_t j = 0; j < spec.marginals.size(); ++j) {
    if (j > 0) marg += ",";
    marg += describe(spec.marginals[j]);
  }
  marg += "]";
  std::string indep = "[";
  for (std::size_t j = 0; j < spec.independent_dims.size(); ++j) {
    if (j > 0) indep += ",";
    indep += std::to_string(spec.independent_dims[j]);
  }
  indep += "]";
  d.provenance = "gen_t_copula nu=" + format_double(spec.nu) +
                 " marginals=" + marg + " independent=" + indep +
                 " n=" + std::to_string(n) + " seed=" + std::to_string(seed);
  return d;
}

CopulaSpec benchmark_5d() {
  CopulaSpec spec;
  spec.marginals = {
      {Family::kWeibull, 0.8, 1.0},   {Family::kPareto, 2.4, 1.0},
      {Family::kLognormal, 0.0, 1.5}, {Family::kBurr, 1.5, 0.8},
      {Family::kWeibull, 1.2, 2.0},
  };
  spec.nu = 4.0;
  spec.independent_dims = {0, 1};
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(5, 5);
  c(2, 3) = c(3, 2) = 0.6;
  c(2, 4) = c(4, 2) = 0.35;
  c(3, 4) = c(4, 3) = 0.5;
  spec.correlation = c;
  return spec;
}

}  // namespace phtail
