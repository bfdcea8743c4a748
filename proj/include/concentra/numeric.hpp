// numeric.hpp - small floating-point helpers: compensated summation,
// log-sum-exp and accurate geometric sums.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace concentra {

// Neumaier-compensated accumulator.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  KahanSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
  KahanSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

// log(sum_i w_i exp(a_i)) with weights w_i >= 0; zero weights are skipped.
inline double log_sum_exp(std::span<const double> a, std::span<const double> w) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (w[i] > 0.0) peak = std::max(peak, a[i]);
  if (!std::isfinite(peak)) return peak;
  KahanSum acc;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (w[i] > 0.0) acc.add(w[i] * std::exp(a[i] - peak));
  return peak + std::log(acc.value());
}

// sum_{k=0}^{m-1} r^k for r >= 0.
// 
// Uses expm1/log1p when |r - 1| > 1e-9 (no cancellation near r = 1) and
// direct Horner summation otherwise.
inline double geometric_sum(double r, std::size_t m) {
  if (m == 0) return 0.0;
  if (r == 0.0) return 1.0;
  if (std::abs(r - 1.0) <= 1e-9) {
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) acc = 1.0 + r * acc;
    return acc;
  }
  const double x = r - 1.0;
  return std::expm1(static_cast<double>(m) * std::log1p(x)) / x;
}

}  // namespace concentra
