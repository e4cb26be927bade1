#pragma once

// Descriptive statistics used across the toolkit. Sums are pairwise so the
// result depends only on the order of the input, never on how the work that
// produced it was scheduled.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "semieff/errors.hpp"

namespace semieff::numerics {

inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 16) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline double mean(std::span<const double> x) {
  if (x.empty()) throw DomainError("mean: empty sample");
  return pairwise_sum(x) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> x) {
  if (x.size() < 2) throw DomainError("variance: need at least two observations");
  const double m = mean(x);
  std::vector<double> sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - m) * (x[i] - m);
  return pairwise_sum(sq) / static_cast<double>(x.size() - 1);
}

inline double covariance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("covariance: need matching samples of size >= 2");
  const double mx = mean(x), my = mean(y);
  std::vector<double> prod(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) prod[i] = (x[i] - mx) * (y[i] - my);
  return pairwise_sum(prod) / static_cast<double>(x.size() - 1);
}

inline double stderr_of_mean(std::span<const double> x) {
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

/// Standard error of the unbiased sample variance, from the fourth central moment.
inline double stderr_of_variance(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double m = mean(x);
  std::vector<double> p4(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) p4[i] = std::pow(x[i] - m, 4);
  const double m4 = pairwise_sum(p4) / n;
  const double s2 = variance(x);
  return std::sqrt(std::max(0.0, (m4 - (n - 3.0) / (n - 1.0) * s2 * s2) / n));
}

/// Average of the middle pair for even sizes.
inline double median(std::vector<double> x) {
  if (x.empty()) throw DomainError("median: empty sample");
  const std::size_t mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid), x.end());
  double m = x[mid];
  if (x.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

inline double median_abs(std::span<const double> x) {
  std::vector<double> a(x.size());
  std::transform(x.begin(), x.end(), a.begin(), [](double v) { return std::abs(v); });
  return median(std::move(a));
}

/// Left-continuous empirical quantile (ceil(n*u)-th order statistic).
inline double quantile_of(std::vector<double> x, double u) {
  if (x.empty()) throw DomainError("quantile_of: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  auto k = static_cast<std::size_t>(std::ceil(n * u));
  k = std::clamp<std::size_t>(k, 1, x.size());
  return x[k - 1];
}

/// Two-sample Kolmogorov-Smirnov distance sup|F_n - G_m|.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// One-sample KS distance against a continuous CDF.
template <class Cdf>
double ks_distance_to(std::vector<double> a, Cdf&& cdf) {
  if (a.empty()) throw DomainError("ks_distance_to: empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
  }
  return d;
}

/// Asymptotic Kolmogorov distribution tail: P(sqrt(n) D > t).
inline double kolmogorov_tail(double t) {
  if (t <= 0.0) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Asymptotic c(alpha) with P(sqrt(n) D > c) = alpha, by bisection on the tail.
inline double kolmogorov_critical(double alpha) {
  double lo = 0.2, hi = 4.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_tail(mid) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Two-sample KS critical distance at level alpha for sizes n and m.
inline double ks_two_sample_critical(double alpha, std::size_t n, std::size_t m) {
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  return kolmogorov_critical(alpha) * std::sqrt((nn + mm) / (nn * mm));
}

/// Jarque-Bera statistic n/6 (S^2 + (K-3)^2/4); asymptotically chi-square(2).
inline double jarque_bera(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double m = mean(x);
  std::vector<double> p2(x.size()), p3(x.size()), p4(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - m;
    p2[i] = d * d;
    p3[i] = d * d * d;
    p4[i] = d * d * d * d;
  }
  const double m2 = pairwise_sum(p2) / n, m3 = pairwise_sum(p3) / n, m4 = pairwise_sum(p4) / n;
  const double skew = m3 / std::pow(m2, 1.5);
  const double kurt = m4 / (m2 * m2);
  return n / 6.0 * (skew * skew + 0.25 * (kurt - 3.0) * (kurt - 3.0));
}

/// Lag-1 sample autocorrelation.
inline double lag1_autocorrelation(std::span<const double> x) {
  const double m = mean(x);
  std::vector<double> num(x.size() - 1), den(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) den[i] = (x[i] - m) * (x[i] - m);
  for (std::size_t i = 1; i < x.size(); ++i) num[i - 1] = (x[i] - m) * (x[i - 1] - m);
  return pairwise_sum(num) / pairwise_sum(den);
}

}  // namespace semieff::numerics
