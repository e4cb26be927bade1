#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "semieff/errors.hpp"

namespace semieff::numerics {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_pdf(double x) {
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("normal_quantile: u must lie in (0,1)");
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, u);
}

/// A monotone map from (0,1) to the reals.
struct QuantileFn {
  std::function<double(double)> eval;
  std::optional<std::pair<double, double>> support_hint;

  double operator()(double u) const { return eval(u); }
};

inline QuantileFn normal_quantile_fn(double mean = 0.0, double sd = 1.0) {
  return {[mean, sd](double u) { return mean + sd * normal_quantile(u); }, std::nullopt};
}

/// Left-continuous generalized inverse of the empirical CDF:
/// inf{x : F_n(x) >= u}, i.e. the ceil(n*u)-th order statistic.
class EmpiricalQuantile {
 public:
  explicit EmpiricalQuantile(std::vector<double> sample) : sorted_(std::make_shared<std::vector<double>>(std::move(sample))) {
    if (sorted_->empty()) throw DomainError("empirical quantile: empty sample");
    std::stable_sort(sorted_->begin(), sorted_->end());
  }

  double operator()(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("empirical quantile: u must lie in (0,1)");
    return (*sorted_)[rank(u) - 1];
  }

  /// 1-based rank k with k/n >= u and (k-1)/n < u, evaluated in the same
  /// floating-point form as F_n.
  std::size_t rank(double u) const {
    const std::size_t n = sorted_->size();
    const double nd = static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(nd * u));
    k = std::clamp<std::size_t>(k, 1, n);
    while (k > 1 && static_cast<double>(k - 1) / nd >= u) --k;
    while (k < n && static_cast<double>(k) / nd < u) ++k;
    return k;
  }

  std::size_t size() const { return sorted_->size(); }
  std::span<const double> sorted() const { return *sorted_; }

  QuantileFn as_quantile_fn() const {
    auto self = *this;
    return {[self](double u) { return self(u); }, std::make_pair(sorted_->front(), sorted_->back())};
  }

 private:
  std::shared_ptr<std::vector<double>> sorted_;
};

inline double empirical_quantile(std::span<const double> sample, double u) {
  if (sample.empty()) throw DomainError("empirical_quantile: empty sample");
  if (!(u > 0.0 && u < 1.0)) throw DomainError("empirical_quantile: u must lie in (0,1)");
  return EmpiricalQuantile(std::vector<double>(sample.begin(), sample.end()))(u);
}

/// Empirical CDF F_n(x) = #{x_i <= x} / n on an already sorted sample.
inline double ecdf_sorted(std::span<const double> sorted, double x) {
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

}  // namespace semieff::numerics
