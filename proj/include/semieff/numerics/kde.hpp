#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "semieff/errors.hpp"
#include "semieff/numerics/quantile.hpp"
#include "semieff/numerics/stats.hpp"

namespace semieff::numerics {

struct KdeValue {
  double density;
  double derivative;
};

/// Gaussian-kernel density estimate and its exact derivative at x.
inline KdeValue kde_with_derivative(std::span<const double> sample, double bandwidth, double x) {
  if (sample.size() < 2) throw DomainError("kde_with_derivative: need at least two observations");
  if (!(bandwidth > 0.0)) throw DomainError("kde_with_derivative: bandwidth must be positive");
  double dens = 0.0;
  double deriv = 0.0;
  for (double xi : sample) {
    const double z = (x - xi) / bandwidth;
    const double k = normal_pdf(z);
    dens += k;
    deriv -= z * k;
  }
  const double n = static_cast<double>(sample.size());
  return {dens / (n * bandwidth), deriv / (n * bandwidth * bandwidth)};
}

/// 1.06 * sd * n^(-1/5).
inline double default_bandwidth(std::span<const double> sample) {
  if (sample.size() < 2) throw DomainError("default_bandwidth: need at least two observations");
  const double sd = std::sqrt(variance(sample));
  if (!(sd > 0.0)) throw DomainError("default_bandwidth: sample has zero spread");
  return 1.06 * sd * std::pow(static_cast<double>(sample.size()), -0.2);
}

/// Gaussian KDE on a regular grid via linear binning and a truncated discrete
/// convolution. Density and its first two derivatives are tabulated at the
/// grid nodes; between nodes values are linearly interpolated. Outside the
/// grid the estimate is treated as zero.
class BinnedKde {
 public:
  BinnedKde(std::span<const double> sample, double bandwidth, std::size_t grid_size = 2048)
      : h_(bandwidth) {
    if (sample.size() < 2) throw DomainError("BinnedKde: need at least two observations");
    if (!(bandwidth > 0.0)) throw DomainError("BinnedKde: bandwidth must be positive");
    const auto [mn, mx] = std::minmax_element(sample.begin(), sample.end());
    lo_ = *mn - kReach * h_;
    const double hi = *mx + kReach * h_;
    step_ = (hi - lo_) / static_cast<double>(grid_size - 1);
    std::vector<double> counts(grid_size, 0.0);
    for (double x : sample) {
      const double pos = (x - lo_) / step_;
      auto i = static_cast<std::size_t>(pos);
      if (i >= grid_size - 1) i = grid_size - 2;
      const double frac = pos - static_cast<double>(i);
      counts[i] += 1.0 - frac;
      counts[i + 1] += frac;
    }
    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(kReach * h_ / step_));
    const double n = static_cast<double>(sample.size());
    std::vector<double> k0(2 * reach + 1), k1(2 * reach + 1), k2(2 * reach + 1);
    for (std::ptrdiff_t j = -reach; j <= reach; ++j) {
      const double z = static_cast<double>(j) * step_ / h_;
      const double phi = normal_pdf(z);
      k0[j + reach] = phi / (n * h_);
      k1[j + reach] = -z * phi / (n * h_ * h_);
      k2[j + reach] = (z * z - 1.0) * phi / (n * h_ * h_ * h_);
    }
    const auto g = static_cast<std::ptrdiff_t>(grid_size);
    d0_.assign(grid_size, 0.0);
    d1_.assign(grid_size, 0.0);
    d2_.assign(grid_size, 0.0);
    for (std::ptrdiff_t i = 0; i < g; ++i) {
      if (counts[i] == 0.0) continue;
      const std::ptrdiff_t from = std::max<std::ptrdiff_t>(0, i - reach);
      const std::ptrdiff_t to = std::min<std::ptrdiff_t>(g - 1, i + reach);
      for (std::ptrdiff_t t = from; t <= to; ++t) {
        const std::ptrdiff_t j = t - i + reach;
        d0_[t] += counts[i] * k0[j];
        d1_[t] += counts[i] * k1[j];
        d2_[t] += counts[i] * k2[j];
      }
    }
  }

  double bandwidth() const { return h_; }
  double lower() const { return lo_; }
  double upper() const { return lo_ + step_ * static_cast<double>(d0_.size() - 1); }
  std::size_t grid_size() const { return d0_.size(); }
  double node(std::size_t i) const { return lo_ + step_ * static_cast<double>(i); }

  double density(double x) const { return interp(d0_, x); }
  double derivative(double x) const { return interp(d1_, x); }
  double second_derivative(double x) const { return interp(d2_, x); }

  double density_at_node(std::size_t i) const { return d0_[i]; }
  double derivative_at_node(std::size_t i) const { return d1_[i]; }
  double second_derivative_at_node(std::size_t i) const { return d2_[i]; }

 private:
  static constexpr double kReach = 8.0;

  double interp(const std::vector<double>& table, double x) const {
    if (!(x >= lower() && x <= upper())) return 0.0;
    const double pos = (x - lo_) / step_;
    auto i = static_cast<std::size_t>(pos);
    if (i >= table.size() - 1) i = table.size() - 2;
    const double frac = pos - static_cast<double>(i);
    return table[i] * (1.0 - frac) + table[i + 1] * frac;
  }

  double h_;
  double lo_ = 0.0;
  double step_ = 0.0;
  std::vector<double> d0_, d1_, d2_;
};

/// Variable-bandwidth Gaussian KDE: a fixed-bandwidth pilot sets local
/// bandwidths h * (pilot / geometric mean of pilot at the data)^(-alpha),
/// capped to [h / 10, 10 h]. Local bandwidths are assigned per grid node
/// after linear binning. alpha = 0 reproduces BinnedKde.
class AdaptiveBinnedKde {
 public:
  AdaptiveBinnedKde(std::span<const double> sample, double bandwidth, double alpha = 0.5,
                    std::size_t grid_size = 2048)
      : h_(bandwidth) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("AdaptiveBinnedKde: alpha must lie in [0,1]");
    const BinnedKde pilot(sample, bandwidth, grid_size);
    std::vector<double> log_pilot(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) log_pilot[i] = std::log(pilot.density(sample[i]));
    const double log_g = mean(log_pilot);
    auto local = [&](double p) {
      const double lam = (p > 0.0) ? std::exp(-alpha * (std::log(p) - log_g)) : kMaxRatio;
      return h_ * std::clamp(lam, 1.0 / kMaxRatio, kMaxRatio);
    };
    const auto [mn, mx] = std::minmax_element(sample.begin(), sample.end());
    const double reach_lo = kReach * local(pilot.density(*mn));
    const double reach_hi = kReach * local(pilot.density(*mx));
    lo_ = *mn - reach_lo;
    const double hi = *mx + reach_hi;
    step_ = (hi - lo_) / static_cast<double>(grid_size - 1);
    std::vector<double> counts(grid_size, 0.0);
    for (double x : sample) {
      const double pos = (x - lo_) / step_;
      auto i = static_cast<std::size_t>(pos);
      if (i >= grid_size - 1) i = grid_size - 2;
      const double frac = pos - static_cast<double>(i);
      counts[i] += 1.0 - frac;
      counts[i + 1] += frac;
    }
    const double n = static_cast<double>(sample.size());
    n_ = sample.size();
    const auto g = static_cast<std::ptrdiff_t>(grid_size);
    d0_.assign(grid_size, 0.0);
    d1_.assign(grid_size, 0.0);
    d2_.assign(grid_size, 0.0);
    hloc_.resize(grid_size);
    for (std::ptrdiff_t i = 0; i < g; ++i) hloc_[i] = local(pilot.density(lo_ + step_ * static_cast<double>(i)));
    for (std::ptrdiff_t i = 0; i < g; ++i) {
      if (counts[i] == 0.0) continue;
      const double hi_local = hloc_[i];
      const auto reach = static_cast<std::ptrdiff_t>(std::ceil(kReach * hi_local / step_));
      const std::ptrdiff_t from = std::max<std::ptrdiff_t>(0, i - reach);
      const std::ptrdiff_t to = std::min<std::ptrdiff_t>(g - 1, i + reach);
      const double c = counts[i] / n;
      for (std::ptrdiff_t t = from; t <= to; ++t) {
        const double z = static_cast<double>(t - i) * step_ / hi_local;
        const double phi = normal_pdf(z) * c / hi_local;
        d0_[t] += phi;
        d1_[t] += -z * phi / hi_local;
        d2_[t] += (z * z - 1.0) * phi / (hi_local * hi_local);
      }
    }
  }

  double bandwidth() const { return h_; }
  double lower() const { return lo_; }
  double upper() const { return lo_ + step_ * static_cast<double>(d0_.size() - 1); }
  std::size_t grid_size() const { return d0_.size(); }

  double density(double x) const { return interp(d0_, x); }
  double derivative(double x) const { return interp(d1_, x); }
  double second_derivative(double x) const { return interp(d2_, x); }

  std::size_t sample_size() const { return n_; }

  /// Bandwidth used for a sample point at x (that of the nearest node).
  double local_bandwidth(double x) const {
    const double pos = std::clamp((x - lo_) / step_, 0.0, static_cast<double>(hloc_.size() - 1));
    return hloc_[static_cast<std::size_t>(std::lround(pos))];
  }

  /// Contribution of a single sample point at c to density and derivative at x.
  KdeValue point_contribution(double c, double x) const {
    const double h = local_bandwidth(c);
    const double z = (x - c) / h;
    const double phi = normal_pdf(z) / (h * static_cast<double>(n_));
    return {phi, -z * phi / h};
  }

 private:
  static constexpr double kReach = 8.0;
  static constexpr double kMaxRatio = 10.0;

  double interp(const std::vector<double>& table, double x) const {
    if (!(x >= lower() && x <= upper())) return 0.0;
    const double pos = (x - lo_) / step_;
    auto i = static_cast<std::size_t>(pos);
    if (i >= table.size() - 1) i = table.size() - 2;
    const double frac = pos - static_cast<double>(i);
    return table[i] * (1.0 - frac) + table[i + 1] * frac;
  }

  double h_;
  double lo_ = 0.0;
  double step_ = 0.0;
  std::vector<double> d0_, d1_, d2_;
  std::vector<double> hloc_;
  std::size_t n_ = 0;
};

}  // namespace semieff::numerics
