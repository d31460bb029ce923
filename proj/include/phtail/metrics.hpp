// Tail and dependence evaluation: conditional tail KS distance, extreme
// quantile error, log1p-correlation and Kendall-tau deviations, tail
// co-exceedance error, and CCDF export for log-log diagnostics.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phtail/synthetic.hpp"

namespace phtail {

// Empirical quantile with linear interpolation between order statistics
// (type-7 convention). q in [0, 1], n >= 1.
double quantile_type7(const Eigen::VectorXd& samples, double q);

// Conditional tail KS distance above the true q-quantile. The tail keeps
// samples >= the threshold; the generated tail CDF is the renormalized
// empirical CDF over those exceedances. Returns nullopt when no generated
// sample reaches the threshold.
std::optional<double> ks_tail(const Eigen::VectorXd& gen,
                              const MarginalSpec& truth, double q = 0.95);

// Same distance with the truth given as reference samples: the threshold is
// the truth table's type-7 q-quantile and the supremum runs over the pooled
// tail points of both samples.
std::optional<double> ks_tail(const Eigen::VectorXd& gen,
                              const Eigen::VectorXd& truth_samples,
                              double q = 0.95);

// |Q_gen - Q_true| / Q_true at the given level, Q_gen by type-7 interpolation.
double q_rel_error(const Eigen::VectorXd& gen, const MarginalSpec& truth,
                   double level = 0.99);
double q_rel_error(const Eigen::VectorXd& gen,
                   const Eigen::VectorXd& truth_samples, double level = 0.99);

// Frobenius norm of the difference between Pearson correlation matrices of
// the log1p-transformed tables. Throws when a column has zero variance,
// naming the column and table.
double corr_err(const Eigen::MatrixXd& real_data,
                const Eigen::MatrixXd& gen_data);

// Tie-adjusted Kendall tau_b in O(n log n) (merge-sort inversion counting).
// Throws when either column is constant.
double kendall_tau(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Mean absolute pairwise Kendall-tau difference over the D(D-1)/2 unordered
// column pairs. Requires D >= 2.
double tau_err(const Eigen::MatrixXd& real_data,
               const Eigen::MatrixXd& gen_data);

// Mean absolute pairwise difference of joint tail exceedance probabilities
// p_ij(q) = P(x_i > Q_i(q) and x_j > Q_j(q)). Thresholds Q_i(q) come from the
// real table's marginals for both tables; own_thresholds switches the
// generated table to its own marginal quantiles.
double coex_err(const Eigen::MatrixXd& real_data,
                const Eigen::MatrixXd& gen_data, double q = 0.99,
                bool own_thresholds = false);

struct CcdfPoint {
  double x = 0.0;
  double survival = 0.0;  // fraction of samples strictly greater than x
};

// Sorted unique sample values with survival fractions.
std::vector<CcdfPoint> empirical_ccdf(const Eigen::VectorXd& samples);

void save_ccdf_csv(const std::string& path,
                   const std::vector<CcdfPoint>& points);

struct MetricsOptions {
  double ks_q = 0.95;
  double quantile_level = 0.99;
  std::vector<double> coex_levels = {0.99};
  bool own_thresholds = false;
};

// One evaluation run. Per-dimension tail metrics always; dependence metrics
// only when both tables are present with D >= 2.
struct MetricsReport {
  std::vector<std::string> columns;
  Eigen::Index gen_rows = 0;
  Eigen::Index truth_rows = 0;  // 0 when the truth is analytic
  std::string gen_label;
  std::string truth_label;
  std::vector<std::uint64_t> seeds;
  double ks_q = 0.95;
  double quantile_level = 0.99;
  std::vector<std::optional<double>> ks_tail_by_dim;
  std::vector<double> q_rel_err_by_dim;
  std::optional<double> corr_err;
  std::optional<double> tau_err;
  std::vector<double> coex_levels;
  std::vector<double> coex_err_by_level;
};

MetricsReport evaluate_against_samples(const Eigen::MatrixXd& truth,
                                       const Eigen::MatrixXd& gen,
                                       const MetricsOptions& opt = {});

MetricsReport evaluate_against_analytic(const std::vector<MarginalSpec>& truth,
                                        const Eigen::MatrixXd& gen,
                                        const MetricsOptions& opt = {});

std::string metrics_report_json(const MetricsReport& report);

// Multi-run aggregation: every scalar slot gets mean, sample standard
// deviation, and the count of runs where it was available.
std::string metrics_aggregate_json(const std::vector<MetricsReport>& runs);

}  // namespace phtail
