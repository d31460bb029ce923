#include "phtail/phase_type.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "phtail/jsonio.hpp"

namespace phtail {

namespace {

constexpr double kSumTol = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_alpha(const Eigen::VectorXd& alpha, const char* who) {
  if (alpha.size() == 0) {
    throw std::invalid_argument(std::string(who) + ": empty initial distribution");
  }
  if (!alpha.allFinite()) {
    throw std::invalid_argument(std::string(who) + ": alpha has non-finite entries");
  }
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] >= 0.0)) {
      throw std::invalid_argument(std::string(who) + ": alpha must be nonnegative");
    }
  }
  if (std::fabs(alpha.sum() - 1.0) > kSumTol) {
    throw std::invalid_argument(std::string(who) + ": alpha must sum to 1");
  }
}

bool is_upper_bidiagonal(const Eigen::MatrixXd& A) {
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (j != i && j != i + 1 && A(i, j) != 0.0) return false;
    }
  }
  return true;
}

double uniformization_rate(const Eigen::MatrixXd& A) {
  const double lam = (-A.diagonal()).maxCoeff();
  return (lam > 0.0) ? lam : 1.0;  // zero matrix: any rate works, use 1
}

// Core of the vector-propagated series: ln(alpha' exp(Ax) w) for a
// nonnegative weighting vector w. Accumulation is carried at the scale of the
// largest Poisson log-weight seen so far, so the value is meaningful far
// below the double underflow threshold. Hitting max_terms truncates; by then
// either the included mass covers the tolerance or the prefix is
// astronomically small and the caller maps the result to zero/sentinel.
double log_weighted_series(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& A,
                           const Eigen::VectorXd& w, double x,
                           const UniformizationConfig& cfg) {
  const Eigen::Index m = alpha.size();
  const double lam = uniformization_rate(A);
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(m, m) + A / lam;
  Eigen::RowVectorXd v = alpha.transpose();
  const double lx = lam * x;
  const double log_lx = (x > 0.0) ? std::log(lx) : -kInf;
  double lw = -lx;
  double scale = lw;
  double sum = 0.0;
  double mass = 0.0;
  for (int k = 0;;) {
    const double wk = std::exp(lw - scale);
    sum += wk * v.dot(w);
    mass += wk;
    if (std::exp(scale) * mass >= 1.0 - cfg.tolerance) break;
    if (v.isZero(0.0)) break;
    if (k + 1 >= cfg.max_terms) break;
    ++k;
    v = v * P;
    lw += log_lx - std::log(static_cast<double>(k));
    if (lw > scale) {
      const double r = std::exp(scale - lw);
      sum *= r;
      mass *= r;
      scale = lw;
    }
  }
  return (sum > 0.0) ? scale + std::log(sum) : -kInf;
}

// Canonical-form series. Shares the truncation rules above but exploits the
// bidiagonal transition structure (O(m) per term) and, when requested,
// replays the recursion backwards for exact partials of the truncated sum.
CanonicalLogPdf canonical_series(const CanonicalPH& ph, double x,
                                 const UniformizationConfig& cfg,
                                 int forced_terms, bool want_grad) {
  if (!(x >= 0.0)) {
    throw std::invalid_argument("log_pdf: x must be nonnegative");
  }
  const Eigen::Index m = ph.order();
  const double lam = ph.lambda[m - 1];  // rates are nondecreasing
  const Eigen::VectorXd rho = ph.lambda / lam;
  const double lx = lam * x;
  const double log_lx = (x > 0.0) ? std::log(lx) : -kInf;

  std::vector<double> vbuf;  // iterates v_k, row-major, kept for the reverse pass
  std::vector<double> lwbuf;
  if (want_grad) {
    vbuf.reserve(static_cast<std::size_t>(64 * m));
    lwbuf.reserve(64);
  }

  Eigen::VectorXd v = ph.alpha;
  double lw = -lx;
  double scale = lw;
  double sum = 0.0;
  double mass = 0.0;
  int k = 0;
  for (;;) {
    if (want_grad) {
      vbuf.insert(vbuf.end(), v.data(), v.data() + m);
      lwbuf.push_back(lw);
    }
    const double wk = std::exp(lw - scale);
    sum += wk * v[m - 1];
    mass += wk;
    if (forced_terms >= 0) {
      if (k >= forced_terms) break;
    } else {
      if (std::exp(scale) * mass >= 1.0 - cfg.tolerance) break;
      if ((v.array() == 0.0).all()) break;
      if (k + 1 >= cfg.max_terms) break;
    }
    ++k;
    for (Eigen::Index i = m - 1; i >= 1; --i) {
      v[i] = v[i] * (1.0 - rho[i]) + v[i - 1] * rho[i - 1];
    }
    v[0] *= 1.0 - rho[0];
    lw += log_lx - std::log(static_cast<double>(k));
    if (lw > scale) {
      const double r = std::exp(scale - lw);
      sum *= r;
      mass *= r;
      scale = lw;
    }
  }

  CanonicalLogPdf out;
  out.terms = k;
  const double fhat = lam * sum;  // exp(-scale) * density
  const double logf = (sum > 0.0) ? scale + std::log(fhat) : -kInf;
  if (!(std::exp(logf) > 0.0)) {
    out.value = kLogPdfFloor;
    out.underflow = true;
    out.d_alpha = Eigen::VectorXd::Zero(m);
    out.d_lambda = Eigen::VectorXd::Zero(m);
    return out;
  }
  out.value = logf;
  out.underflow = false;
  if (!want_grad) return out;

  // Reverse sweep. vbar holds the adjoint of the iterate currently one step
  // ahead; rho adjoints accumulate per transition, the rate Lambda collects
  // its weight-path derivative d(Lambda w_k)/dLambda = w_k (1 + k - Lambda x).
  Eigen::VectorXd vbar = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd rhobar = Eigen::VectorXd::Zero(m);
  double lambar = 0.0;
  for (int kk = k; kk >= 0; --kk) {
    const double* vk = vbuf.data() + static_cast<std::size_t>(kk) * m;
    if (kk < k) {
      for (Eigen::Index i = 0; i + 1 < m; ++i) {
        rhobar[i] += vk[i] * (vbar[i + 1] - vbar[i]);
      }
      for (Eigen::Index i = 0; i + 1 < m; ++i) {
        vbar[i] = (1.0 - rho[i]) * vbar[i] + rho[i] * vbar[i + 1];
      }
      vbar[m - 1] = 0.0;
    }
    const double wk = std::exp(lwbuf[static_cast<std::size_t>(kk)] - scale);
    vbar[m - 1] += lam * wk;
    lambar += vk[m - 1] * wk * (1.0 + kk - lx);
  }
  out.d_alpha = vbar / fhat;
  Eigen::VectorXd dlam = Eigen::VectorXd::Zero(m);
  double rho_dot = 0.0;
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    dlam[i] = rhobar[i] / lam;
    rho_dot += rhobar[i] * rho[i];
  }
  dlam[m - 1] = lambar - rho_dot / lam;
  out.d_lambda = dlam / fhat;
  return out;
}

}  // namespace

GeneralPH::GeneralPH(Eigen::VectorXd alpha_in, Eigen::MatrixXd a_in)
    : alpha(std::move(alpha_in)), A(std::move(a_in)) {
  check_alpha(alpha, "GeneralPH");
  const Eigen::Index m = alpha.size();
  if (A.rows() != m || A.cols() != m) {
    throw std::invalid_argument("GeneralPH: A must be square and match alpha");
  }
  if (!A.allFinite()) {
    throw std::invalid_argument("GeneralPH: A has non-finite entries");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(A(i, i) < 0.0)) {
      throw std::invalid_argument("GeneralPH: diagonal of A must be negative");
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j != i && !(A(i, j) >= 0.0)) {
        throw std::invalid_argument("GeneralPH: off-diagonal of A must be nonnegative");
      }
    }
    if (A.row(i).sum() > kSumTol) {
      throw std::invalid_argument("GeneralPH: row sums of A must be nonpositive");
    }
  }
}

Eigen::VectorXd GeneralPH::exit_rates() const {
  return (-A.rowwise().sum()).cwiseMax(0.0);
}

CanonicalPH::CanonicalPH(Eigen::VectorXd alpha_in, Eigen::VectorXd lambda_in)
    : alpha(std::move(alpha_in)), lambda(std::move(lambda_in)) {
  check_alpha(alpha, "CanonicalPH");
  if (lambda.size() != alpha.size()) {
    throw std::invalid_argument("CanonicalPH: lambda must match alpha in size");
  }
  if (!lambda.allFinite()) {
    throw std::invalid_argument("CanonicalPH: lambda has non-finite entries");
  }
  if (!(lambda[0] > 0.0)) {
    throw std::invalid_argument("CanonicalPH: rates must be strictly positive");
  }
  for (Eigen::Index i = 0; i + 1 < lambda.size(); ++i) {
    if (!(lambda[i + 1] >= lambda[i])) {
      throw std::invalid_argument("CanonicalPH: rates must be nondecreasing");
    }
  }
}

GeneralPH expand_canonical(const CanonicalPH& ph) {
  const Eigen::Index m = ph.order();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    A(i, i) = -ph.lambda[i];
    if (i + 1 < m) A(i, i + 1) = ph.lambda[i];
  }
  return GeneralPH(ph.alpha, std::move(A));
}

CanonicalPH read_canonical(const GeneralPH& ph) {
  const Eigen::Index m = ph.order();
  if (!is_upper_bidiagonal(ph.A)) {
    throw std::invalid_argument("read_canonical: A is not upper bidiagonal");
  }
  Eigen::VectorXd lambda(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    lambda[i] = -ph.A(i, i);
    if (i + 1 < m && ph.A(i, i + 1) != lambda[i]) {
      throw std::invalid_argument(
          "read_canonical: interior phases must feed the whole rate forward");
    }
  }
  return CanonicalPH(ph.alpha, std::move(lambda));
}

Eigen::MatrixXd matexp_uniformized(const Eigen::MatrixXd& A, double x,
                                   const UniformizationConfig& cfg) {
  if (A.rows() != A.cols()) {
    throw std::invalid_argument("matexp_uniformized: A must be square");
  }
  if (!(x >= 0.0)) {
    throw std::invalid_argument("matexp_uniformized: x must be nonnegative");
  }
  const Eigen::Index m = A.rows();
  const double lam = uniformization_rate(A);
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(m, m) + A / lam;
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
  const double lx = lam * x;
  const double log_lx = (x > 0.0) ? std::log(lx) : -kInf;
  double lw = -lx;
  double scale = lw;
  double mass = 0.0;
  for (int k = 0;;) {
    const double wk = std::exp(lw - scale);
    acc += wk * power;
    mass += wk;
    if (std::exp(scale) * mass >= 1.0 - cfg.tolerance) break;
    if (power.isZero(0.0)) break;
    if (k + 1 >= cfg.max_terms) {
      throw std::runtime_error(
          "matexp_uniformized: series needs more than max_terms terms "
          "(x * Lambda too large for this configuration)");
    }
    ++k;
    power = power * P;
    lw += log_lx - std::log(static_cast<double>(k));
    if (lw > scale) {
      const double r = std::exp(scale - lw);
      acc *= r;
      mass *= r;
      scale = lw;
    }
  }
  Eigen::MatrixXd result = std::exp(scale) * acc;
  return result.cwiseMin(1.0);  // shave rounding dust above 1; entries are >= 0
}

double pdf(const GeneralPH& ph, double x, const UniformizationConfig& cfg) {
  if (!(x >= 0.0)) throw std::invalid_argument("pdf: x must be nonnegative");
  return std::exp(log_weighted_series(ph.alpha, ph.A, ph.exit_rates(), x, cfg));
}

double ccdf(const GeneralPH& ph, double x, const UniformizationConfig& cfg) {
  if (!(x >= 0.0)) throw std::invalid_argument("ccdf: x must be nonnegative");
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(ph.order());
  return std::exp(log_weighted_series(ph.alpha, ph.A, ones, x, cfg));
}

double cdf(const GeneralPH& ph, double x, const UniformizationConfig& cfg) {
  return 1.0 - ccdf(ph, x, cfg);
}

double log_pdf(const GeneralPH& ph, double x, const UniformizationConfig& cfg) {
  const double p = pdf(ph, x, cfg);
  return (p > 0.0) ? std::log(p) : kLogPdfFloor;
}

double pdf(const CanonicalPH& ph, double x, const UniformizationConfig& cfg) {
  const CanonicalLogPdf r = canonical_series(ph, x, cfg, -1, false);
  return r.underflow ? 0.0 : std::exp(r.value);
}

double log_pdf(const CanonicalPH& ph, double x, const UniformizationConfig& cfg) {
  return canonical_series(ph, x, cfg, -1, false).value;
}

double cdf(const CanonicalPH& ph, double x, const UniformizationConfig& cfg) {
  return cdf(expand_canonical(ph), x, cfg);
}

double ccdf(const CanonicalPH& ph, double x, const UniformizationConfig& cfg) {
  return ccdf(expand_canonical(ph), x, cfg);
}

CanonicalLogPdf log_pdf_grad(const CanonicalPH& ph, double x,
                             const UniformizationConfig& cfg, int forced_terms) {
  return canonical_series(ph, x, cfg, forced_terms, true);
}

double moment(const GeneralPH& ph, int k) {
  if (k < 1) throw std::invalid_argument("moment: k must be a positive integer");
  const Eigen::Index m = ph.order();
  Eigen::VectorXd y = Eigen::VectorXd::Ones(m);
  if (is_upper_bidiagonal(ph.A)) {
    for (int r = 0; r < k; ++r) {
      Eigen::VectorXd w(m);
      w[m - 1] = y[m - 1] / (-ph.A(m - 1, m - 1));
      for (Eigen::Index i = m - 2; i >= 0; --i) {
        w[i] = (y[i] + ph.A(i, i + 1) * w[i + 1]) / (-ph.A(i, i));
      }
      y = std::move(w);
    }
  } else {
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(-ph.A);
    if (!lu.isInvertible()) {
      throw std::domain_error("moment: sub-generator is numerically singular");
    }
    for (int r = 0; r < k; ++r) y = lu.solve(y);
  }
  return std::tgamma(static_cast<double>(k) + 1.0) * ph.alpha.dot(y);
}

double moment(const CanonicalPH& ph, int k) { return moment(expand_canonical(ph), k); }

double laplace(const GeneralPH& ph, double s) {
  if (!(s >= 0.0)) throw std::invalid_argument("laplace: s must be nonnegative");
  const Eigen::Index m = ph.order();
  const Eigen::MatrixXd M = s * Eigen::MatrixXd::Identity(m, m) - ph.A;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible()) {
    throw std::domain_error("laplace: sI - A is numerically singular");
  }
  return ph.alpha.dot(lu.solve(ph.exit_rates()));
}

double laplace(const CanonicalPH& ph, double s) {
  return laplace(expand_canonical(ph), s);
}

double sample(const GeneralPH& ph, Rng& rng) {
  const Eigen::Index m = ph.order();
  const Eigen::VectorXd t = ph.exit_rates();
  Eigen::Index state = rng.categorical(ph.alpha);
  double time = 0.0;
  constexpr long kMaxJumps = 10'000'000;
  for (long jumps = 0; jumps < kMaxJumps; ++jumps) {
    const double rate = -ph.A(state, state);
    time += rng.exponential(rate);
    const double target = rng.uniform() * rate;
    double cum = t[state];
    if (target < cum) return time;
    Eigen::Index next = -1;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == state) continue;
      cum += ph.A(state, j);
      if (target < cum) {
        next = j;
        break;
      }
    }
    if (next < 0) {
      // Rounding left the target past the cumulative total; resolve in favor
      // of absorption when the state carries exit mass.
      if (t[state] > 0.0) return time;
      for (Eigen::Index j = m - 1; j >= 0; --j) {
        if (j != state && ph.A(state, j) > 0.0) {
          next = j;
          break;
        }
      }
      if (next < 0) {
        throw std::runtime_error("sample: state has neither exits nor transitions");
      }
    }
    state = next;
  }
  throw std::runtime_error("sample: no absorption within 10000000 jumps");
}

double sample(const CanonicalPH& ph, Rng& rng) {
  // The canonical chain walks deterministically toward the last phase, so the
  // absorption time is a sum of exponential holds from the initial phase on.
  const Eigen::Index m = ph.order();
  double time = 0.0;
  for (Eigen::Index i = rng.categorical(ph.alpha); i < m; ++i) {
    time += rng.exponential(ph.lambda[i]);
  }
  return time;
}

Eigen::VectorXd sample_multivariate(const std::vector<GeneralPH>& dims, Rng& rng) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(dims.size()));
  for (std::size_t j = 0; j < dims.size(); ++j) {
    out[static_cast<Eigen::Index>(j)] = sample(dims[j], rng);
  }
  return out;
}

namespace {

void write_vector(JsonWriter& w, const char* name, const Eigen::VectorXd& v) {
  w.key(name);
  w.begin_array();
  for (Eigen::Index i = 0; i < v.size(); ++i) w.number(v[i]);
  w.end_array();
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& e : j) v[i++] = e.get<double>();
  return v;
}

}  // namespace

std::string to_json(const CanonicalPH& ph) {
  JsonWriter w;
  w.begin_object();
  write_vector(w, "alpha", ph.alpha);
  write_vector(w, "lambda", ph.lambda);
  w.end_object();
  return w.take();
}

std::string to_json(const GeneralPH& ph) {
  JsonWriter w;
  w.begin_object();
  write_vector(w, "alpha", ph.alpha);
  w.key("A");
  w.begin_array();
  for (Eigen::Index i = 0; i < ph.A.rows(); ++i) {
    w.begin_array();
    for (Eigen::Index j = 0; j < ph.A.cols(); ++j) w.number(ph.A(i, j));
    w.end_array();
  }
  w.end_array();
  w.end_object();
  return w.take();
}

CanonicalPH canonical_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  return CanonicalPH(vector_from_json(j.at("alpha")), vector_from_json(j.at("lambda")));
}

GeneralPH general_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const auto& rows = j.at("A");
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd A(m, m);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Eigen::Index>(row.size()) != m) {
      throw std::invalid_argument("general_from_json: A must be square");
    }
    Eigen::Index jj = 0;
    for (const auto& e : row) A(i, jj++) = e.get<double>();
    ++i;
  }
  return GeneralPH(vector_from_json(j.at("alpha")), std::move(A));
}

}  // namespace phtail
