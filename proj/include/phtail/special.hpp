// Scalar special functions shared by the samplers and data generators.
#pragma once

#include <Eigen/Core>

namespace phtail {

// Standard normal CDF.
double normal_cdf(double x);

// Standard normal quantile. Wichura's AS241 (PPND16) rational approximation;
// absolute error stays below 1e-15 on (0, 1). Arguments outside (0, 1) throw.
double normal_quantile(double p);

// Regularized incomplete beta I_x(a, b), continued fraction with Lentz's
// method. a, b > 0 and x in [0, 1].
double reg_inc_beta(double a, double b, double x);

// CDF of the Student-t distribution with nu > 0 degrees of freedom.
double student_t_cdf(double t, double nu);

// log(1 + e^x) without overflow on either side.
double softplus(double x);

// Shift-stabilized softmax of a vector.
Eigen::VectorXd softmax(const Eigen::VectorXd& x);

}  // namespace phtail
