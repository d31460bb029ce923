// Reference implementations used only by the tests: a scaling-and-squaring
// matrix exponential, adaptive quadrature, finite differences, and brute
// force O(n^2) dependence statistics.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "phtail/rng.hpp"

namespace oracle {

// Pade scaling-and-squaring exponential from Eigen's MatrixFunctions module,
// independent of the uniformization path under test.
inline Eigen::MatrixXd matexp(const Eigen::MatrixXd& A, double x) {
  return (A * x).exp();
}

namespace detail {

inline double simpson_rec(const std::function<double(double)>& f, double a,
                          double b, double fa, double fm, double fb,
                          double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-9) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

inline double central_diff(const std::function<double(double)>& f, double x,
                           double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Relative error with an absolute floor for near-zero references.
inline double rel_err(double got, double want, double floor = 1e-7) {
  return std::fabs(got - want) / std::max(std::fabs(want), floor);
}

// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> xs,
                           const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double F = cdf(xs[i]);
    d = std::max(d, std::fabs(F - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - F));
  }
  return d;
}

// Brute-force tie-adjusted Kendall tau_b.
inline double kendall_tau_brute(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.size();
  long long concordant = 0, discordant = 0, tie_x = 0, tie_y = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        ++tie_x;
      } else if (dy == 0.0) {
        ++tie_y;
      } else if (dx * dy > 0.0) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n0 = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  long long joint = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (x[i] == x[j] && y[i] == y[j]) ++joint;
    }
  }
  const double nx = static_cast<double>(tie_x + joint);
  const double ny = static_cast<double>(tie_y + joint);
  const double num = static_cast<double>(concordant - discordant);
  return num / std::sqrt((n0 - nx) * (n0 - ny));
}

// Type-7 quantile written independently of the library version.
inline double quantile7_brute(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  const double h = q * static_cast<double>(xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= xs.size()) return xs.back();
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[lo + 1] - xs[lo]);
}

// Mean absolute pairwise difference of joint tail exceedance fractions,
// written longhand against the definition.
inline double coex_brute(const Eigen::MatrixXd& real, const Eigen::MatrixXd& gen,
                         double q, bool own_thresholds) {
  const Eigen::Index dims = real.cols();
  auto col = [](const Eigen::MatrixXd& m, Eigen::Index j) {
    return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
  };
  double sum = 0.0;
  int pairs = 0;
  for (Eigen::Index a = 0; a < dims; ++a) {
    for (Eigen::Index b = a + 1; b < dims; ++b) {
      const double ra = quantile7_brute(col(real, a), q);
      const double rb = quantile7_brute(col(real, b), q);
      const double ga = own_thresholds ? quantile7_brute(col(gen, a), q) : ra;
      const double gb = own_thresholds ? quantile7_brute(col(gen, b), q) : rb;
      double p_real = 0.0, p_gen = 0.0;
      for (Eigen::Index i = 0; i < real.rows(); ++i) {
        if (real(i, a) > ra && real(i, b) > rb) p_real += 1.0;
      }
      for (Eigen::Index i = 0; i < gen.rows(); ++i) {
        if (gen(i, a) > ga && gen(i, b) > gb) p_gen += 1.0;
      }
      p_real /= static_cast<double>(real.rows());
      p_gen /= static_cast<double>(gen.rows());
      sum += std::fabs(p_gen - p_real);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

// Random sub-generator with strictly negative diagonal and exit mass on
// every phase.
inline Eigen::MatrixXd random_subgenerator(Eigen::Index m, phtail::Rng& rng) {
  Eigen::MatrixXd A(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      A(i, j) = rng.uniform();
      row += A(i, j);
    }
    A(i, i) = -(row + 0.1 + rng.uniform());
  }
  return A;
}

inline Eigen::VectorXd random_distribution(Eigen::Index m, phtail::Rng& rng) {
  Eigen::VectorXd a(m);
  for (Eigen::Index i = 0; i < m; ++i) a[i] = rng.exponential(1.0);
  return a / a.sum();
}

}  // namespace oracle
