// Heavy-tailed synthetic data with analytically known ground truth: four
// marginal families sampled by inverse CDF, and a Student-t copula
// construction for dependent multivariate tables with designated independent
// dimensions as negative controls.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phtail/dataset.hpp"
#include "phtail/rng.hpp"

namespace phtail {

enum class Family { kWeibull, kPareto, kLognormal, kBurr };

// Parameter slots by family:
//   weibull(k, lambda)    p1 = shape k,      p2 = scale lambda
//   pareto(alpha, x_m)    p1 = tail alpha,   p2 = minimum x_m
//   lognormal(mu, sigma)  p1 = log-mean mu,  p2 = log-sd sigma
//   burr(c, k)            p1 = shape c,      p2 = shape k
struct MarginalSpec {
  Family family = Family::kWeibull;
  double p1 = 1.0;
  double p2 = 1.0;
};

std::string family_name(Family f);
std::string describe(const MarginalSpec& spec);

// Throws when the parameter slots are out of range for the family.
void validate_marginal(const MarginalSpec& spec);

double true_cdf(const MarginalSpec& spec, double x);

// q in (0, 1).
double true_quantile(const MarginalSpec& spec, double q);

// One inverse-CDF draw.
double sample_marginal(const MarginalSpec& spec, Rng& rng);

Dataset gen_marginal(const MarginalSpec& spec, Eigen::Index n,
                     std::uint64_t seed);

struct CopulaSpec {
  std::vector<MarginalSpec> marginals;
  Eigen::MatrixXd correlation;  // D x D, symmetric, unit diagonal, PD
  double nu = 4.0;              // copula degrees of freedom
  // Dimensions generated from fresh independent uniforms instead of the
  // copula coordinates; their correlation rows must be zero off-diagonal.
  std::vector<Eigen::Index> independent_dims;
};

// Throws on asymmetry, non-unit diagonal, failed Cholesky, out-of-range or
// correlated independent dims, or nonpositive nu.
void validate_copula(const CopulaSpec& spec);

// Per row the draw order is fixed: D standard normals (dimension order), one
// chi-square, then one fresh uniform per independent dimension in ascending
// order. Copula uniforms are clamped to [2^-53, 1 - 2^-53] before the
// marginal quantile map.
Dataset gen_t_copula(const CopulaSpec& spec, Eigen::Index n,
                     std::uint64_t seed);

// The declared 5D benchmark: dimensions 0 and 1 independent, a correlated
// block over dimensions 2..4, nu = 4.
CopulaSpec benchmark_5d();

}  // namespace phtail
