// Phase-type distributions: the absorption time of a finite continuous-time
// Markov chain with sub-generator A and initial distribution alpha over the
// transient phases. Densities and distribution functions are evaluated
// through the uniformized series
//
//   exp(A x) = sum_k exp(-L x) (L x)^k / k! * P^k,   P = I + A / L,
//
// with L the largest exit rate, adaptive truncation on the Poisson tail mass,
// and log-space weight accumulation so nothing overflows or produces NaN.
#pragma once

#include <Eigen/Core>

#include "phtail/rng.hpp"

namespace phtail {

struct UniformizationConfig {
  double tolerance = 1e-8;  // remaining Poisson tail mass at which to stop
  int max_terms = 10000;    // hard cap on the series length
};

// Returned by log_pdf when the density underflows to zero in double
// precision; keeps downstream objectives finite instead of propagating -inf.
inline constexpr double kLogPdfFloor = -1e30;

// General representation: alpha over m transient phases, m x m sub-generator.
// The constructor validates: alpha nonnegative summing to 1 (1e-12), negative
// diagonal, nonnegative off-diagonal, row sums <= 0 (1e-12 slack).
struct GeneralPH {
  Eigen::VectorXd alpha;
  Eigen::MatrixXd A;

  GeneralPH(Eigen::VectorXd alpha_in, Eigen::MatrixXd a_in);
  Eigen::Index order() const { return alpha.size(); }

  // Exit rate vector t = -A 1; rounding dust below 1e-12 is clamped to zero.
  Eigen::VectorXd exit_rates() const;
};

// Series canonical form: upper-bidiagonal chain with nondecreasing positive
// rates; phase i feeds phase i+1 and only the last phase exits.
struct CanonicalPH {
  Eigen::VectorXd alpha;
  Eigen::VectorXd lambda;

  CanonicalPH(Eigen::VectorXd alpha_in, Eigen::VectorXd lambda_in);
  Eigen::Index order() const { return alpha.size(); }
};

// Builds the bidiagonal sub-generator for a canonical form.
GeneralPH expand_canonical(const CanonicalPH& ph);

// Reads canonical parameters back from a bidiagonal GeneralPH; exact inverse
// of expand_canonical (bitwise). Throws when the matrix is not bidiagonal.
CanonicalPH read_canonical(const GeneralPH& ph);

// exp(A x) by uniformization. Throws std::invalid_argument for x < 0 or a
// non-square A and std::runtime_error when max_terms would be exceeded.
// A zero matrix uses L = 1 (the series then reduces to the identity).
Eigen::MatrixXd matexp_uniformized(const Eigen::MatrixXd& A, double x,
                                   const UniformizationConfig& cfg = {});

// Density alpha' exp(A x) t, distribution 1 - alpha' exp(A x) 1 and its
// complement. Negative x throws; the series truncates at max_terms (the
// truncated value only matters when the result underflows anyway).
double pdf(const GeneralPH& ph, double x, const UniformizationConfig& cfg = {});
double cdf(const GeneralPH& ph, double x, const UniformizationConfig& cfg = {});
double ccdf(const GeneralPH& ph, double x, const UniformizationConfig& cfg = {});

// ln pdf(x) when the density is representable, kLogPdfFloor when it
// underflows to zero in double precision. Never NaN or -inf.
double log_pdf(const GeneralPH& ph, double x, const UniformizationConfig& cfg = {});

double pdf(const CanonicalPH& ph, double x, const UniformizationConfig& cfg = {});
double cdf(const CanonicalPH& ph, double x, const UniformizationConfig& cfg = {});
double ccdf(const CanonicalPH& ph, double x, const UniformizationConfig& cfg = {});
double log_pdf(const CanonicalPH& ph, double x, const UniformizationConfig& cfg = {});

// k-th raw moment k! alpha' (-A)^{-k} 1 for integer k >= 1, via repeated
// linear solves: back-substitution when A is bidiagonal, dense LU otherwise.
// Throws std::domain_error when the sub-generator is numerically singular.
double moment(const GeneralPH& ph, int k);
double moment(const CanonicalPH& ph, int k);

// Laplace transform alpha' (sI - A)^{-1} t for s >= 0; lies in (0, 1].
double laplace(const GeneralPH& ph, double s);
double laplace(const CanonicalPH& ph, double s);

// One absorption time of the underlying chain: categorical initial phase,
// exponential holding times, jump probabilities A_sj / (-A_ss) and exit
// probability t_s / (-A_ss). Throws after 10^7 jumps without absorption.
double sample(const GeneralPH& ph, Rng& rng);
double sample(const CanonicalPH& ph, Rng& rng);

// Independent draw per coordinate, in index order.
Eigen::VectorXd sample_multivariate(const std::vector<GeneralPH>& dims, Rng& rng);

// Canonical log-density with analytic partial derivatives. The partials
// differentiate the truncated series itself (truncation index frozen at the
// value chosen by the forward pass), so they match finite differences of the
// same truncated evaluation. On underflow value = kLogPdfFloor and both
// gradients are zero. forced_terms >= 0 pins the truncation index, which the
// finite-difference tests use to probe the identical polynomial.
struct CanonicalLogPdf {
  double value = kLogPdfFloor;
  bool underflow = true;
  int terms = 0;  // index of the last Poisson term included
  Eigen::VectorXd d_alpha;
  Eigen::VectorXd d_lambda;
};
CanonicalLogPdf log_pdf_grad(const CanonicalPH& ph, double x,
                             const UniformizationConfig& cfg = {},
                             int forced_terms = -1);

// JSON round trip: {"alpha": [...], "lambda": [...]} for the canonical form
// and {"alpha": [...], "A": [[...], ...]} for the general form; doubles carry
// 17 significant digits.
std::string to_json(const CanonicalPH& ph);
std::string to_json(const GeneralPH& ph);
CanonicalPH canonical_from_json(const std::string& text);
GeneralPH general_from_json(const std::string& text);

}  // namespace phtail
