// Seeded random draws. All transforms are hand-rolled on top of
// std::mt19937_64 so a seed yields the same stream on any standard library.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "phtail/special.hpp"

namespace phtail {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(gen_() >> 12) + 0.5) * 0x1p-52;
  }

  // Standard normal via the inverse CDF.
  double normal() { return normal_quantile(uniform()); }

  // Exponential with the given rate > 0.
  double exponential(double rate) { return -std::log(uniform()) / rate; }

  // Index drawn from an unnormalized vector of nonnegative weights.
  Eigen::Index categorical(const Eigen::VectorXd& w) {
    const double target = uniform() * w.sum();
    double cum = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      cum += w[i];
      if (target < cum) return i;
    }
    // Rounding pushed the target past the final cumulative weight; return the
    // last index that carries mass.
    for (Eigen::Index i = w.size() - 1; i >= 0; --i) {
      if (w[i] > 0.0) return i;
    }
    return w.size() - 1;
  }

  // Gamma(shape, scale 1) by the Marsaglia-Tsang squeeze method.
  double gamma(double shape) {
    if (shape < 1.0) {
      return gamma(shape + 1.0) * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      const double z = normal();
      const double t = 1.0 + c * z;
      if (t <= 0.0) continue;
      const double v = t * t * t;
      const double u = uniform();
      if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) {
        return d * v;
      }
    }
  }

  // Chi-square with nu > 0 degrees of freedom.
  double chi_square(double nu) { return 2.0 * gamma(0.5 * nu); }

  // Uniform integer in [0, n) by rejection, bias-free.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = gen_();
      if (r >= threshold) return r % n;
    }
  }

  // In-place Fisher-Yates permutation of indices.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[static_cast<std::size_t>(below(i))]);
    }
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace phtail
