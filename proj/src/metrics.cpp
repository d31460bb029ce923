#include "phtail/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "phtail/dataset.hpp"
#include "phtail/jsonio.hpp"

namespace phtail {
namespace {

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (v.size() < 1) {
    throw std::invalid_argument(std::string(what) + ": needs at least one sample");
  }
  if (!v.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite sample");
  }
}

std::vector<double> sorted_copy(const Eigen::VectorXd& v) {
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end());
  return s;
}

// Values >= threshold, ascending.
std::vector<double> tail_at(const Eigen::VectorXd& v, double threshold) {
  std::vector<double> t;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] >= threshold) t.push_back(v[i]);
  }
  std::sort(t.begin(), t.end());
  return t;
}

double step_cdf(const std::vector<double>& sorted, double x) {
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) /
         static_cast<double>(sorted.size());
}

// Pairs i < j with v[i] > v[j]; sorts v ascending as a side effect.
std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& buf,
                          std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
            buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

// Pearson correlation of the log1p-transformed table. role names the table
// in zero-variance diagnostics.
Eigen::MatrixXd log1p_pearson(const Eigen::MatrixXd& data, const char* role) {
  if (data.rows() < 2) {
    throw std::invalid_argument(std::string("corr_err: ") + role +
                                " table needs at least two rows");
  }
  const Eigen::MatrixXd t = log1p_columns(data);
  Eigen::MatrixXd centered = t.rowwise() - t.colwise().mean();
  Eigen::VectorXd norms(t.cols());
  for (Eigen::Index j = 0; j < t.cols(); ++j) {
    norms[j] = centered.col(j).norm();
    if (norms[j] == 0.0) {
      throw std::invalid_argument("corr_err: column " + std::to_string(j) +
                                  " of the " + role + " table has zero variance");
    }
  }
  Eigen::MatrixXd corr = centered.transpose() * centered;
  for (Eigen::Index i = 0; i < corr.rows(); ++i) {
    for (Eigen::Index j = 0; j < corr.cols(); ++j) {
      corr(i, j) /= norms[i] * norms[j];
    }
  }
  return corr;
}

void require_same_width(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const char* what) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) +
                                ": tables have different dimension counts");
  }
}

double pair_weight(Eigen::Index dims) {
  return 2.0 / (static_cast<double>(dims) * static_cast<double>(dims - 1));
}

Eigen::VectorXd column_quantiles(const Eigen::MatrixXd& m, double q) {
  Eigen::VectorXd out(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    out[j] = quantile_type7(m.col(j), q);
  }
  return out;
}

double coex_pair_prob(const Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b,
                      double ta, double tb) {
  Eigen::Index joint = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (m(i, a) > ta && m(i, b) > tb) ++joint;
  }
  return static_cast<double>(joint) / static_cast<double>(m.rows());
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  int count = 0;
};

MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd r;
  r.count = static_cast<int>(xs.size());
  if (xs.empty()) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

void write_optional(JsonWriter& w, std::string_view k,
                    const std::optional<double>& v) {
  w.key(k);
  if (v) {
    w.number(*v);
  } else {
    w.null();
  }
}

void write_report_body(JsonWriter& w, const MetricsReport& r) {
  w.begin_object();
  w.key("columns");
  w.begin_array();
  for (const std::string& c : r.columns) w.string(c);
  w.end_array();
  w.field("gen_rows", static_cast<long long>(r.gen_rows));
  w.field("truth_rows", static_cast<long long>(r.truth_rows));
  if (!r.gen_label.empty()) w.field("gen", r.gen_label);
  if (!r.truth_label.empty()) w.field("truth", r.truth_label);
  if (!r.seeds.empty()) {
    w.key("seeds");
    w.begin_array();
    for (std::uint64_t s : r.seeds) w.integer(static_cast<long long>(s));
    w.end_array();
  }
  w.field("ks_q", r.ks_q);
  w.field("quantile_level", r.quantile_level);
  w.key("ks_tail");
  w.begin_array();
  for (const auto& v : r.ks_tail_by_dim) {
    if (v) {
      w.number(*v);
    } else {
      w.null();
    }
  }
  w.end_array();
  w.key("q_rel_err");
  w.begin_array();
  for (double v : r.q_rel_err_by_dim) w.number(v);
  w.end_array();
  write_optional(w, "corr_err", r.corr_err);
  write_optional(w, "tau_err", r.tau_err);
  w.key("coex_err");
  w.begin_array();
  for (std::size_t i = 0; i < r.coex_levels.size(); ++i) {
    w.begin_object();
    w.field("q", r.coex_levels[i]);
    w.field("err", r.coex_err_by_level[i]);
    w.end_object();
  }
  w.end_array();
  w.end_object();
}

void write_mean_sd(JsonWriter& w, std::string_view k,
                   const std::vector<double>& values, int total_runs) {
  const MeanSd s = mean_sd(values);
  w.key(k);
  w.begin_object();
  if (s.count > 0) {
    w.field("mean", s.mean);
    w.field("sd", s.sd);
  } else {
    w.key("mean");
    w.null();
    w.key("sd");
    w.null();
  }
  w.field("runs", s.count);
  if (s.count < total_runs) w.field("na_runs", total_runs - s.count);
  w.end_object();
}

}  // namespace

double quantile_type7(const Eigen::VectorXd& samples, double q) {
  require_finite(samples, "quantile_type7");
  if (!(q >= 0.0) || !(q <= 1.0)) {
    throw std::invalid_argument("quantile_type7: q must lie in [0, 1]");
  }
  const std::vector<double> s = sorted_copy(samples);
  const double h = q * static_cast<double>(s.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= s.size()) return s.back();
  const double g = h - static_cast<double>(lo);
  return s[lo] + g * (s[lo + 1] - s[lo]);
}

std::optional<double> ks_tail(const Eigen::VectorXd& gen,
                              const MarginalSpec& truth, double q) {
  require_finite(gen, "ks_tail");
  if (!(q > 0.0) || !(q < 1.0)) {
    throw std::invalid_argument("ks_tail: q must lie in (0, 1)");
  }
  const double threshold = true_quantile(truth, q);
  const std::vector<double> tail = tail_at(gen, threshold);
  if (tail.empty()) return std::nullopt;
  const double k = static_cast<double>(tail.size());
  double d = 0.0;
  for (std::size_t i = 0; i < tail.size(); ++i) {
    double g = (true_cdf(truth, tail[i]) - q) / (1.0 - q);
    g = std::min(std::max(g, 0.0), 1.0);
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / k - g));
    d = std::max(d, std::fabs(static_cast<double>(i) / k - g));
  }
  return d;
}

std::optional<double> ks_tail(const Eigen::VectorXd& gen,
                              const Eigen::VectorXd& truth_samples, double q) {
  require_finite(gen, "ks_tail");
  require_finite(truth_samples, "ks_tail");
  if (!(q > 0.0) || !(q < 1.0)) {
    throw std::invalid_argument("ks_tail: q must lie in (0, 1)");
  }
  const double threshold = quantile_type7(truth_samples, q);
  const std::vector<double> gen_tail = tail_at(gen, threshold);
  if (gen_tail.empty()) return std::nullopt;
  const std::vector<double> truth_tail = tail_at(truth_samples, threshold);
  std::vector<double> grid;
  grid.reserve(gen_tail.size() + truth_tail.size());
  grid.insert(grid.end(), gen_tail.begin(), gen_tail.end());
  grid.insert(grid.end(), truth_tail.begin(), truth_tail.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  double d = 0.0;
  for (double x : grid) {
    d = std::max(d, std::fabs(step_cdf(gen_tail, x) - step_cdf(truth_tail, x)));
  }
  return d;
}

double q_rel_error(const Eigen::VectorXd& gen, const MarginalSpec& truth,
                   double level) {
  const double q_true = true_quantile(truth, level);
  const double q_gen = quantile_type7(gen, level);
  return std::fabs(q_gen - q_true) / q_true;
}

double q_rel_error(const Eigen::VectorXd& gen,
                   const Eigen::VectorXd& truth_samples, double level) {
  const double q_true = quantile_type7(truth_samples, level);
  if (q_true == 0.0) {
    throw std::invalid_argument("q_rel_error: reference quantile is zero");
  }
  const double q_gen = quantile_type7(gen, level);
  return std::fabs(q_gen - q_true) / q_true;
}

double corr_err(const Eigen::MatrixXd& real_data,
                const Eigen::MatrixXd& gen_data) {
  require_same_width(real_data, gen_data, "corr_err");
  const Eigen::MatrixXd c_real = log1p_pearson(real_data, "real");
  const Eigen::MatrixXd c_gen = log1p_pearson(gen_data, "generated");
  return (c_gen - c_real).norm();
}

double kendall_tau(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.size();
  if (y.size() != n) {
    throw std::invalid_argument("kendall_tau: length mismatch");
  }
  if (n < 2) {
    throw std::invalid_argument("kendall_tau: needs at least two rows");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw std::invalid_argument("kendall_tau: non-finite input");
  }

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });
  std::vector<double> ys(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = y[idx[i]];

  // Tie-pair counts stay exact: every partial sum is an integer below 2^53.
  double tie_x = 0.0, tie_xy = 0.0;
  std::size_t i = 0;
  while (i < ys.size()) {
    std::size_t j = i + 1;
    while (j < ys.size() && x[idx[j]] == x[idx[i]]) ++j;
    const double t = static_cast<double>(j - i);
    tie_x += 0.5 * t * (t - 1.0);
    std::size_t a = i;
    while (a < j) {
      std::size_t b = a + 1;
      while (b < j && ys[b] == ys[a]) ++b;
      const double u = static_cast<double>(b - a);
      tie_xy += 0.5 * u * (u - 1.0);
      a = b;
    }
    i = j;
  }

  std::vector<double> buf(ys.size());
  const double swaps =
      static_cast<double>(merge_count(ys, buf, 0, ys.size()));

  double tie_y = 0.0;
  i = 0;
  while (i < ys.size()) {
    std::size_t j = i + 1;
    while (j < ys.size() && ys[j] == ys[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_y += 0.5 * t * (t - 1.0);
    i = j;
  }

  const double n0 = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double den = std::sqrt(n0 - tie_x) * std::sqrt(n0 - tie_y);
  if (den == 0.0) {
    throw std::invalid_argument("kendall_tau: a column is constant");
  }
  return (n0 - tie_x - tie_y + tie_xy - 2.0 * swaps) / den;
}

double tau_err(const Eigen::MatrixXd& real_data,
               const Eigen::MatrixXd& gen_data) {
  require_same_width(real_data, gen_data, "tau_err");
  const Eigen::Index dims = real_data.cols();
  if (dims < 2) {
    throw std::invalid_argument("tau_err: needs at least two dimensions");
  }
  double sum = 0.0;
  for (Eigen::Index a = 0; a < dims; ++a) {
    for (Eigen::Index b = a + 1; b < dims; ++b) {
      sum += std::fabs(kendall_tau(real_data.col(a), real_data.col(b)) -
                       kendall_tau(gen_data.col(a), gen_data.col(b)));
    }
  }
  return sum * pair_weight(dims);
}

double coex_err(const Eigen::MatrixXd& real_data,
                const Eigen::MatrixXd& gen_data, double q,
                bool own_thresholds) {
  require_same_width(real_data, gen_data, "coex_err");
  const Eigen::Index dims = real_data.cols();
  if (dims < 2) {
    throw std::invalid_argument("coex_err: needs at least two dimensions");
  }
  if (real_data.rows() < 1 || gen_data.rows() < 1) {
    throw std::invalid_argument("coex_err: empty table");
  }
  const Eigen::VectorXd real_thr = column_quantiles(real_data, q);
  const Eigen::VectorXd gen_thr =
      own_thresholds ? column_quantiles(gen_data, q) : real_thr;
  double sum = 0.0;
  for (Eigen::Index a = 0; a < dims; ++a) {
    for (Eigen::Index b = a + 1; b < dims; ++b) {
      const double p_real =
          coex_pair_prob(real_data, a, b, real_thr[a], real_thr[b]);
      const double p_gen =
          coex_pair_prob(gen_data, a, b, gen_thr[a], gen_thr[b]);
      sum += std::fabs(p_gen - p_real);
    }
  }
  return sum * pair_weight(dims);
}

std::vector<CcdfPoint> empirical_ccdf(const Eigen::VectorXd& samples) {
  require_finite(samples, "empirical_ccdf");
  const std::vector<double> s = sorted_copy(samples);
  const double n = static_cast<double>(s.size());
  std::vector<CcdfPoint> points;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i + 1;
    while (j < s.size() && s[j] == s[i]) ++j;
    points.push_back({s[i], static_cast<double>(s.size() - j) / n});
    i = j;
  }
  return points;
}

void save_ccdf_csv(const std::string& path,
                   const std::vector<CcdfPoint>& points) {
  std::string out = "x,survival\n";
  for (const CcdfPoint& p : points) {
    out += format_double(p.x);
    out += ',';
    out += format_double(p.survival);
    out += '\n';
  }
  write_text_file(path, out);
}

MetricsReport evaluate_against_samples(const Eigen::MatrixXd& truth,
                                       const Eigen::MatrixXd& gen,
                                       const MetricsOptions& opt) {
  require_same_width(truth, gen, "evaluate");
  MetricsReport r;
  r.gen_rows = gen.rows();
  r.truth_rows = truth.rows();
  r.ks_q = opt.ks_q;
  r.quantile_level = opt.quantile_level;
  for (Eigen::Index j = 0; j < gen.cols(); ++j) {
    r.ks_tail_by_dim.push_back(
        ks_tail(gen.col(j), Eigen::VectorXd(truth.col(j)), opt.ks_q));
    r.q_rel_err_by_dim.push_back(q_rel_error(
        gen.col(j), Eigen::VectorXd(truth.col(j)), opt.quantile_level));
  }
  if (gen.cols() >= 2) {
    r.corr_err = corr_err(truth, gen);
    r.tau_err = tau_err(truth, gen);
    for (double q : opt.coex_levels) {
      r.coex_levels.push_back(q);
      r.coex_err_by_level.push_back(
          coex_err(truth, gen, q, opt.own_thresholds));
    }
  }
  return r;
}

MetricsReport evaluate_against_analytic(const std::vector<MarginalSpec>& truth,
                                        const Eigen::MatrixXd& gen,
                                        const MetricsOptions& opt) {
  if (static_cast<Eigen::Index>(truth.size()) != gen.cols()) {
    throw std::invalid_argument(
        "evaluate: marginal count does not match table dimensions");
  }
  MetricsReport r;
  r.gen_rows = gen.rows();
  r.truth_rows = 0;
  r.ks_q = opt.ks_q;
  r.quantile_level = opt.quantile_level;
  for (Eigen::Index j = 0; j < gen.cols(); ++j) {
    const MarginalSpec& m = truth[static_cast<std::size_t>(j)];
    r.ks_tail_by_dim.push_back(ks_tail(gen.col(j), m, opt.ks_q));
    r.q_rel_err_by_dim.push_back(
        q_rel_error(gen.col(j), m, opt.quantile_level));
  }
  return r;
}

std::string metrics_report_json(const MetricsReport& report) {
  JsonWriter w;
  write_report_body(w, report);
  return w.take();
}

std::string metrics_aggregate_json(const std::vector<MetricsReport>& runs) {
  if (runs.empty()) {
    throw std::invalid_argument("metrics_aggregate_json: no runs");
  }
  const int total = static_cast<int>(runs.size());
  const std::size_t dims = runs.front().ks_tail_by_dim.size();
  JsonWriter w;
  w.begin_object();
  w.key("runs");
  w.begin_array();
  for (const MetricsReport& r : runs) write_report_body(w, r);
  w.end_array();
  w.key("aggregate");
  w.begin_object();
  for (std::size_t j = 0; j < dims; ++j) {
    std::vector<double> ks, qr;
    for (const MetricsReport& r : runs) {
      if (r.ks_tail_by_dim.at(j)) ks.push_back(*r.ks_tail_by_dim.at(j));
      qr.push_back(r.q_rel_err_by_dim.at(j));
    }
    const std::string dim = std::to_string(j);
    write_mean_sd(w, "ks_tail_" + dim, ks, total);
    write_mean_sd(w, "q_rel_err_" + dim, qr, total);
  }
  std::vector<double> corr, tau;
  for (const MetricsReport& r : runs) {
    if (r.corr_err) corr.push_back(*r.corr_err);
    if (r.tau_err) tau.push_back(*r.tau_err);
  }
  write_mean_sd(w, "corr_err", corr, total);
  write_mean_sd(w, "tau_err", tau, total);
  for (std::size_t l = 0; l < runs.front().coex_levels.size(); ++l) {
    std::vector<double> coex;
    for (const MetricsReport& r : runs) {
      if (l < r.coex_err_by_level.size()) coex.push_back(r.coex_err_by_level[l]);
    }
    write_mean_sd(w, "coex_err_" + format_double(runs.front().coex_levels[l]),
                  coex, total);
  }
  w.end_object();
  w.end_object();
  return w.take();
}

}  // namespace phtail
