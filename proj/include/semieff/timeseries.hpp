#pragma once

// Stationary AR(1) with location-only innovation law g: simulation,
// innovation recovery, the time-series score W_t * (-g'/g)(eps_t) with
// W_t = y_{t-1}, the empirical LAN remainder, and an adaptive one-step
// estimator on contiguous time blocks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "semieff/errors.hpp"
#include "semieff/estimators.hpp"
#include "semieff/io.hpp"
#include "semieff/models.hpp"
#include "semieff/numerics/rng.hpp"
#include "semieff/numerics/stats.hpp"

namespace semieff::timeseries {

using models::LocationFamily;
using models::Obs;
using numerics::Matrix;
using numerics::RngStream;
using numerics::Vector;

inline void require_stationary(double rho, const char* where) {
  if (!(std::abs(rho) < 1.0)) throw DomainError(std::string(where) + ": need |rho| < 1");
}

struct Ar1Path {
  double y0 = 0.0;
  std::vector<double> y;
  double rho_true = 0.0;
  std::string innovation_tag;
  /// Innovations realized by the recursion, eps_t = y_t - rho_true * y_{t-1}.
  std::vector<double> eps;

  std::size_t size() const { return y.size(); }
  double lagged(std::size_t t) const { return t == 0 ? y0 : y[t - 1]; }
};

inline std::size_t burn_in_steps(double rho) {
  return static_cast<std::size_t>(std::ceil(10.0 / (1.0 - std::abs(rho))));
}

/// Starts at zero, runs the recursion for the burn-in, then records n steps.
inline Ar1Path simulate_ar1(double rho, std::size_t n, const LocationFamily& g, RngStream& rng) {
  require_stationary(rho, "simulate_ar1");
  Ar1Path path;
  path.rho_true = rho;
  path.innovation_tag = g.name;
  double y = 0.0;
  for (std::size_t i = 0; i < burn_in_steps(rho); ++i) y = rho * y + g.sample(rng);
  path.y0 = y;
  path.y.resize(n);
  path.eps.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double prev = y;
    y = rho * prev + g.sample(rng);
    path.y[t] = y;
    path.eps[t] = y - rho * prev;
  }
  return path;
}

/// eps_t(rho) = y_t - rho * y_{t-1}, with y_0 the stored starting value.
inline std::vector<double> innovations(const Ar1Path& path, double rho) {
  std::vector<double> e(path.size());
  for (std::size_t t = 0; t < path.size(); ++t) e[t] = path.y[t] - rho * path.lagged(t);
  return e;
}

/// Observation records (y_t, z[0] = y_{t-1}) for the conditional model.
inline std::vector<Obs> to_observations(const Ar1Path& path) {
  std::vector<Obs> xs(path.size());
  for (std::size_t t = 0; t < path.size(); ++t) {
    xs[t].y = path.y[t];
    xs[t].z[0] = path.lagged(t);
  }
  return xs;
}

/// Summands W_t * (-g'/g)(eps_t(rho)).
inline std::vector<double> ts_scores(const Ar1Path& path, double rho, const LocationFamily& g) {
  std::vector<double> s(path.size());
  for (std::size_t t = 0; t < path.size(); ++t) {
    s[t] = path.lagged(t) * g.location_score(path.y[t] - rho * path.lagged(t));
  }
  return s;
}

/// I(rho) = I(g) * Var(eps) / (1 - rho^2).
inline double ts_fisher(double rho, const LocationFamily& g) {
  require_stationary(rho, "ts_fisher");
  return g.fisher_location * g.variance / (1.0 - rho * rho);
}

/// (1/n) sum W_t^2 * I(g) along a simulated path.
inline double ts_fisher_mc(double rho, const LocationFamily& g, std::size_t n, RngStream& rng) {
  const auto path = simulate_ar1(rho, n, g, rng);
  std::vector<double> w2(n);
  for (std::size_t t = 0; t < n; ++t) w2[t] = path.lagged(t) * path.lagged(t);
  return numerics::mean(w2) * g.fisher_location;
}

/// Lambda_n - [t n^{-1/2} sum s_t - (2n)^{-1} sum (t s_t)^2], where Lambda_n
/// is the conditional log-likelihood ratio of rho + t/sqrt(n) against rho.
inline double ts_lan_remainder(const Ar1Path& path, double rho, double t, const LocationFamily& g) {
  require_stationary(rho, "ts_lan_remainder");
  const std::size_t n = path.size();
  if (n == 0) throw DomainError("ts_lan_remainder: empty path");
  const double rn = std::sqrt(static_cast<double>(n));
  const double rho_n = rho + t / rn;
  require_stationary(rho_n, "ts_lan_remainder (local alternative)");
  std::vector<double> llr(n), lin(n), quad(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = path.lagged(i);
    const double e = path.y[i] - rho * w;
    const double s = w * g.location_score(e);
    llr[i] = g.log_density(path.y[i] - rho_n * w) - g.log_density(e);
    lin[i] = t * s;
    quad[i] = (t * s) * (t * s);
  }
  const double big_lambda = numerics::pairwise_sum(llr);
  return big_lambda - (numerics::pairwise_sum(lin) / rn - numerics::pairwise_sum(quad) / (2.0 * static_cast<double>(n)));
}

/// (1/n) sum W_t^2 1[|W_t| > delta sqrt(n)].
inline double lindeberg_fraction(const Ar1Path& path, double delta) {
  const std::size_t n = path.size();
  const double cut = delta * std::sqrt(static_cast<double>(n));
  std::vector<double> v(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double w = path.lagged(t);
    v[t] = std::abs(w) > cut ? w * w : 0.0;
  }
  return numerics::mean(v);
}

// ---------------------------------------------------------------------------
// Adaptive estimation

struct Ar1Estimate {
  double rho = 0.0;
  double preliminary_1 = 0.0;
  double preliminary_2 = 0.0;
  /// Set when a preliminary left (-1, 1) and was pulled back to +-(1 - 1/sqrt(n)).
  bool clamped = false;
};

inline constexpr std::size_t kGuard = 50;

enum class Ar1Split {
  /// Least-squares preliminary on the whole path; the score for each half of
  /// the path is fitted on the other half, less kGuard observations next to
  /// the midpoint.
  CrossFit,
  /// Four contiguous blocks per the split plan: preliminaries from blocks 1
  /// and 3, scores from blocks 2 and 4, each fitting block after the first
  /// dropping its first kGuard observations.
  FourBlocks,
};

/// One-step update of a (by default discretized) least-squares preliminary with a kernel
/// estimate of the influence function; the update for each half of the path
/// uses pieces fitted away from that half, combined with weights mu_n/n and
/// (n - mu_n)/n.
inline Ar1Estimate adaptive_ar1_estimate(const Ar1Path& path,
                                         const estimators::ScoreEstimator& score_est =
                                             estimators::kernel_score_estimator(estimators::ar1_structure()),
                                         const estimators::SplitPlan& plan = {}, std::optional<double> mesh_c = 1.0,
                                         Ar1Split split = Ar1Split::CrossFit) {
  const std::size_t n = path.size();
  if (n < 400) throw EstimationError("adaptive_ar1_estimate: path length must be at least 400");
  const auto [l, m, v] = plan.cuts(n);
  const auto xs = to_observations(path);
  const std::span<const Obs> all(xs);
  // [from, to) ranges for preliminary 1, score 1, preliminary 2, score 2.
  std::array<std::pair<std::size_t, std::size_t>, 4> ranges;
  if (split == Ar1Split::CrossFit) {
    ranges = {{{0, n}, {0, m - std::min(m, kGuard)}, {0, n}, {m + kGuard, n}}};
  } else {
    ranges = {{{0, l}, {l + kGuard, m}, {m + kGuard, v}, {v + kGuard, n}}};
  }
  const char* names[] = {"preliminary block 1", "score block 1", "preliminary block 2", "score block 2"};
  for (std::size_t b = 0; b < 4; ++b) {
    const auto [from, to] = ranges[b];
    if (to < from + estimators::kMinBlock) {
      throw EstimationError(std::string("adaptive_ar1_estimate: ") + names[b] + " is too short");
    }
  }
  auto range = [&](std::size_t b) { return all.subspan(ranges[b].first, ranges[b].second - ranges[b].first); };
  Ar1Estimate out;
  const double bound = 1.0 - 1.0 / std::sqrt(static_cast<double>(n));
  const auto prelim = estimators::moments_preliminary("ar1");
  auto preliminary = [&](std::size_t b) {
    double r = prelim(range(b))[0];
    if (mesh_c) r = estimators::discretize(models::vec({r}), n, *mesh_c)[0];
    if (!(std::abs(r) < 1.0)) {
      out.clamped = true;
      r = std::clamp(r, -bound, bound);
    }
    return r;
  };
  out.preliminary_1 = preliminary(0);
  out.preliminary_2 = split == Ar1Split::CrossFit ? out.preliminary_1 : preliminary(2);
  const Vector t1 = models::vec({out.preliminary_1});
  const Vector t2 = models::vec({out.preliminary_2});
  const auto ell1 = score_est.fit(range(1), t1);
  const auto ell2 = score_est.fit(range(3), t2);
  const double w = static_cast<double>(m) / static_cast<double>(n);
  const Vector left = estimators::one_step(t2, all.first(m), ell2.as_function());
  const Vector right = estimators::one_step(t1, all.subspan(m), ell1.as_function());
  out.rho = w * left[0] + (1.0 - w) * right[0];
  return out;
}

// ---------------------------------------------------------------------------
// Conditional AR(1) as a parametric model

/// theta = (rho); observations carry y_{t-1} in z[0]. The sampler returns a
/// stationary path in observation form.
inline models::ParametricModel ar1_model(const LocationFamily& g) {
  models::ParametricModel m;
  m.name = "ar1:" + g.name;
  m.dim_theta = 1;
  m.parameter_names = {"rho"};
  m.theta_domain = [](const Vector& t) { return t.size() == 1 && std::abs(t[0]) < 1.0; };
  m.log_density = [m, g](const Obs& x, const Vector& t) {
    m.require_domain(t);
    return g.log_density(x.y - t[0] * x.z[0]);
  };
  m.score = [m, g](const Obs& x, const Vector& t) {
    m.require_domain(t);
    return models::vec({x.z[0] * g.location_score(x.y - t[0] * x.z[0])});
  };
  m.fisher = [m, g](const Vector& t) {
    m.require_domain(t);
    return Matrix::Constant(1, 1, ts_fisher(t[0], g));
  };
  m.sample = [m, g](const Vector& t, std::size_t n, RngStream& rng) {
    m.require_domain(t);
    return to_observations(simulate_ar1(t[0], n, g, rng));
  };
  return m;
}

// ---------------------------------------------------------------------------
// Serialization

inline void write_path_csv(std::ostream& os, const Ar1Path& path, std::uint64_t seed) {
  CsvWriter csv(os);
  csv.comment("toolkit_version: " + std::string(kToolkitVersion));
  csv.comment("rho: " + format_double(path.rho_true));
  csv.comment("n: " + std::to_string(path.size()));
  csv.comment("g: " + path.innovation_tag);
  csv.comment("seed: " + std::to_string(seed));
  csv.comment("y0: " + format_double(path.y0));
  csv.row(std::vector<std::string>{"y"});
  for (double v : path.y) csv.row(std::vector<double>{v});
}

}  // namespace semieff::timeseries
