#pragma once

// Spread lower bounds for estimator error distributions.
//
// Given the law H of a score statistic S (mean zero), the bound K is defined
// through its quantile function
//
//     K^{-1}(u) = integral_{1/2}^{u} ds / D(s),   D(s) = integral_s^1 H^{-1}(t) dt,
//
// and every estimator error distribution G satisfies
// G^{-1}(v) - G^{-1}(u) >= K^{-1}(v) - K^{-1}(u) for 0 < u < v < 1.
// D(s) is the density-quantile function of K, i.e. the density of K
// evaluated at K^{-1}(s).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semieff/errors.hpp"
#include "semieff/io.hpp"
#include "semieff/numerics/integrate.hpp"
#include "semieff/numerics/linalg.hpp"
#include "semieff/numerics/quantile.hpp"
#include "semieff/numerics/rng.hpp"
#include "semieff/numerics/stats.hpp"

namespace semieff::spread {

using numerics::Matrix;
using numerics::QuantileFn;
using numerics::RngStream;
using numerics::Vector;

struct ScoreStatistic {
  std::function<double(RngStream&)> draw;
  std::optional<QuantileFn> quantile;
  std::optional<double> abs_moment;
  std::optional<double> second_moment;
  // Points u where H^{-1} jumps (atoms of S); quadrature splits there.
  std::vector<double> quantile_jumps;
};

/// S ~ N(0, variance): the score of a normal location model with
/// information `variance`.
inline ScoreStatistic normal_score(double variance) {
  if (!(variance > 0.0)) throw DomainError("normal_score: variance must be positive");
  const double sd = std::sqrt(variance);
  return {[sd](RngStream& rng) { return sd * rng.normal(); }, numerics::normal_quantile_fn(0.0, sd),
          sd * std::sqrt(2.0 / std::numbers::pi), variance, {}};
}

/// Laplace location score sign(X - theta)/scale: two atoms at +-1/scale.
inline ScoreStatistic laplace_score(double scale = 1.0) {
  if (!(scale > 0.0)) throw DomainError("laplace_score: scale must be positive");
  const double c = 1.0 / scale;
  QuantileFn q{[c](double u) {
                 if (!(u > 0.0 && u < 1.0)) throw DomainError("laplace score quantile: u outside (0,1)");
                 return u <= 0.5 ? -c : c;
               },
               std::make_pair(-c, c)};
  return {[c](RngStream& rng) { return rng.uniform() < 0.5 ? -c : c; }, q, c, c * c, {0.5}};
}

/// Logistic location score (2F(X) - 1)/scale, uniform on (-1/scale, 1/scale).
inline ScoreStatistic logistic_score(double scale = 1.0) {
  if (!(scale > 0.0)) throw DomainError("logistic_score: scale must be positive");
  const double c = 1.0 / scale;
  QuantileFn q{[c](double u) {
                 if (!(u > 0.0 && u < 1.0)) throw DomainError("logistic score quantile: u outside (0,1)");
                 return c * (2.0 * u - 1.0);
               },
               std::make_pair(-c, c)};
  return {[c](RngStream& rng) { return c * (2.0 * rng.uniform() - 1.0); }, q, 0.5 * c, c * c / 3.0, {}};
}

enum class BoundFamily { Score, Uniform, VanZwet, Trigonometric };

inline std::string to_string(BoundFamily f) {
  switch (f) {
    case BoundFamily::Score: return "score";
    case BoundFamily::Uniform: return "uniform";
    case BoundFamily::VanZwet: return "vanzwet";
    case BoundFamily::Trigonometric: return "trig";
  }
  return "?";
}

struct SpreadBound {
  QuantileFn k_inverse;
  BoundFamily family;
  std::string provenance;
  /// Density of K at K^{-1}(u), when the construction knows it in closed form.
  std::function<double(double)> density_quantile;

  double operator()(double u) const { return k_inverse(u); }

  std::vector<std::pair<double, double>> table(std::span<const double> grid) const {
    std::vector<std::pair<double, double>> out;
    out.reserve(grid.size());
    for (double u : grid) out.emplace_back(u, k_inverse(u));
    return out;
  }
};

/// u in {0.005, 0.010, ..., 0.995}.
inline std::vector<double> default_grid(double step = 0.005) {
  std::vector<double> grid;
  const int n = static_cast<int>(std::lround(1.0 / step));
  for (int i = 1; i < n; ++i) grid.push_back(i * step);
  return grid;
}

// ---------------------------------------------------------------------------
// Construction from a score statistic

struct ScoreBoundOptions {
  std::size_t empirical_draws = 100000;
  std::uint64_t seed = 20240601;
  std::uint64_t stream = 0;
  // Subtract the sample mean from empirical draws; a score has mean zero.
  bool center_empirical = true;
};

namespace detail {

/// D(s) = integral_s^1 H^{-1} for an empirical H: piecewise linear in s,
/// computed exactly from suffix sums of the order statistics.
class EmpiricalTailIntegral {
 public:
  explicit EmpiricalTailIntegral(std::vector<double> draws, bool center) {
    std::sort(draws.begin(), draws.end());
    if (center) {
      const double m = numerics::mean(draws);
      for (double& d : draws) d -= m;
    }
    sorted_ = std::move(draws);
    const std::size_t n = sorted_.size();
    suffix_.assign(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) suffix_[i] = suffix_[i + 1] + sorted_[i];
    for (double& v : suffix_) v /= static_cast<double>(n);
  }

  double operator()(double s) const {
    const std::size_t n = sorted_.size();
    const double nd = static_cast<double>(n);
    // H^{-1}(t) = x_(j) for t in ((j-1)/n, j/n].
    auto j = static_cast<std::size_t>(std::ceil(nd * s));
    j = std::clamp<std::size_t>(j, 1, n);
    return (static_cast<double>(j) / nd - s) * sorted_[j - 1] + suffix_[j];
  }

  std::span<const double> sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
  std::vector<double> suffix_;
};

}  // namespace detail

/// Evaluates K^{-1} from an arbitrary tail-integral function D.
class ScoreSpreadBound {
 public:
  ScoreSpreadBound(std::function<double(double)> tail_integral, double quad_tol)
      : tail_(std::move(tail_integral)), tol_(quad_tol) {}

  double tail_integral(double s) const { return tail_(s); }

  double k_inverse(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("spread bound: u must lie in (0,1)");
    if (u == 0.5) return 0.0;
    const double lo = std::min(u, 0.5), hi = std::max(u, 0.5);
    const double value = numerics::integrate([this](double s) { return 1.0 / checked_tail(s); }, lo, hi, tol_);
    return u > 0.5 ? value : -value;
  }

 private:
  double checked_tail(double s) const {
    const double d = tail_(s);
    if (!(d > 0.0)) {
      std::ostringstream os;
      os << "spread bound: integral_s^1 H^{-1} = " << d << " <= 0 at s = " << s
         << "; the statistic does not behave like a mean-zero score";
      throw DomainError(os.str());
    }
    return d;
  }

  std::function<double(double)> tail_;
  double tol_;
};

inline SpreadBound spread_bound_from_score(const ScoreStatistic& score, double quad_tol,
                                           const ScoreBoundOptions& options = {}) {
  if (!(quad_tol > 0.0)) throw DomainError("spread_bound_from_score: quad_tol must be positive");
  std::function<double(double)> tail;
  std::string provenance;
  if (score.quantile) {
    auto hinv = *score.quantile;
    const double inner_tol = 1e-2 * quad_tol;
    auto jumps = score.quantile_jumps;
    std::sort(jumps.begin(), jumps.end());
    tail = [hinv, inner_tol, jumps](double s) {
      double total = 0.0, left = s;
      for (double j : jumps) {
        if (j <= left || j >= 1.0) continue;
        total += numerics::integrate(hinv.eval, left, j, inner_tol);
        left = j;
      }
      return total + numerics::integrate(hinv.eval, left, 1.0, inner_tol);
    };
    provenance = "score:analytic";
  } else {
    if (!score.draw) throw DomainError("spread_bound_from_score: score has neither quantile nor sampler");
    RngStream rng(options.seed, options.stream);
    std::vector<double> draws(options.empirical_draws);
    for (double& d : draws) d = score.draw(rng);
    auto emp = std::make_shared<detail::EmpiricalTailIntegral>(std::move(draws), options.center_empirical);
    tail = [emp](double s) { return (*emp)(s); };
    provenance = "score:empirical(" + std::to_string(options.empirical_draws) + ")";
  }
  auto bound = std::make_shared<ScoreSpreadBound>(tail, quad_tol);
  return {{[bound](double u) { return bound->k_inverse(u); }, std::nullopt},
          BoundFamily::Score,
          provenance,
          [bound](double s) { return bound->tail_integral(s); }};
}

// ---------------------------------------------------------------------------
// Closed-form bounds from moments of S

/// Uniform law of length 1/E|S|. Only increments are meaningful; the
/// quantile is centered so that K^{-1}(1/2) = 0.
inline SpreadBound uniform_bound(double abs_moment) {
  if (!(abs_moment > 0.0)) throw DomainError("uniform_bound: E|S| must be positive");
  const double len = 1.0 / abs_moment;
  return {{[len](double u) {
             if (!(u > 0.0 && u < 1.0)) throw DomainError("uniform_bound: u outside (0,1)");
             return (u - 0.5) * len;
           },
           std::make_pair(-0.5 * len, 0.5 * len)},
          BoundFamily::Uniform,
          "uniform(E|S|=" + format_double(abs_moment) + ")",
          [abs_moment](double) { return abs_moment; }};
}

/// Symmetric triangular law on [-sqrt(2/ES^2), sqrt(2/ES^2)].
inline SpreadBound van_zwet_bound(double second_moment) {
  if (!(second_moment > 0.0)) throw DomainError("van_zwet_bound: E S^2 must be positive");
  const double half_width = std::sqrt(2.0 / second_moment);
  return {{[half_width](double u) {
             if (!(u > 0.0 && u < 1.0)) throw DomainError("van_zwet_bound: u outside (0,1)");
             const double tail = std::min(u, 1.0 - u);
             const double x = half_width * (1.0 - std::sqrt(2.0 * tail));
             return u >= 0.5 ? x : -x;
           },
           std::make_pair(-half_width, half_width)},
          BoundFamily::VanZwet,
          "vanzwet(ES2=" + format_double(second_moment) + ")",
          [second_moment](double s) { return std::sqrt(second_moment * std::min(s, 1.0 - s)); }};
}

/// Law with CDF (1 + sin(sqrt(ES^2) x))/2 on |x| <= pi/(2 sqrt(ES^2)).
inline SpreadBound trigonometric_bound(double second_moment) {
  if (!(second_moment > 0.0)) throw DomainError("trigonometric_bound: E S^2 must be positive");
  const double root = std::sqrt(second_moment);
  const double half_width = std::numbers::pi / (2.0 * root);
  return {{[root](double u) {
             if (!(u > 0.0 && u < 1.0)) throw DomainError("trigonometric_bound: u outside (0,1)");
             return std::asin(2.0 * u - 1.0) / root;
           },
           std::make_pair(-half_width, half_width)},
          BoundFamily::Trigonometric,
          "trig(ES2=" + format_double(second_moment) + ")",
          [second_moment](double s) { return std::sqrt(second_moment * s * (1.0 - s)); }};
}

/// Writes the (u, K^{-1}(u)) table as CSV.
inline void write_bound_csv(std::ostream& os, const SpreadBound& bound, std::span<const double> grid,
                            const std::vector<std::string>& header_lines = {}) {
  CsvWriter csv(os);
  for (const auto& line : header_lines) csv.comment(line);
  csv.comment("bound: " + bound.provenance);
  csv.row(std::vector<std::string>{"u", "k_inverse"});
  for (const auto& [u, k] : bound.table(grid)) csv.row(std::vector<double>{u, k});
}

// ---------------------------------------------------------------------------
// Spread order

struct SpreadComparison {
  bool more_spread;
  double worst_violation;  // max over pairs of (K_v - K_u) - (G_v - G_u), floored at 0
  double worst_u;
  double worst_v;
};

/// Checks G^{-1}(v) - G^{-1}(u) >= K^{-1}(v) - K^{-1}(u) - slack(i, j) for
/// every pair of grid points u_i < u_j.
inline SpreadComparison is_more_spread(const QuantileFn& g_inv, const QuantileFn& k_inv, std::span<const double> grid,
                                       const std::function<double(std::size_t, std::size_t)>& slack) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] < 1.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw DomainError("is_more_spread: grid must be strictly increasing inside (0,1)");
    }
  }
  std::vector<double> g(grid.size()), k(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    g[i] = g_inv(grid[i]);
    k[i] = k_inv(grid[i]);
  }
  SpreadComparison out{true, 0.0, grid.empty() ? 0.0 : grid.front(), grid.empty() ? 0.0 : grid.front()};
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const double deficit = (k[j] - k[i]) - (g[j] - g[i]);
      if (deficit > out.worst_violation) {
        out.worst_violation = deficit;
        out.worst_u = grid[i];
        out.worst_v = grid[j];
      }
      worst_excess = std::max(worst_excess, deficit - slack(i, j));
    }
  }
  out.more_spread = !(worst_excess > 0.0);
  return out;
}

inline SpreadComparison is_more_spread(const QuantileFn& g_inv, const QuantileFn& k_inv, std::span<const double> grid,
                                       double slack = 0.0) {
  if (slack < 0.0) throw DomainError("is_more_spread: slack must be nonnegative");
  return is_more_spread(g_inv, k_inv, grid, [slack](std::size_t, std::size_t) { return slack; });
}

/// Log-concavity of the implied density of a bound: the density-quantile
/// D(u) = 1/(K^{-1})'(u) must have log D concave along the grid.
inline bool implied_density_log_concave(const SpreadBound& bound, std::span<const double> grid, double tol = 1e-9) {
  std::vector<double> logd(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double d;
    if (bound.density_quantile) {
      d = bound.density_quantile(grid[i]);
    } else {
      const double h = 1e-5;
      d = 2.0 * h / (bound(grid[i] + h) - bound(grid[i] - h));
    }
    if (!(d > 0.0)) return false;
    logd[i] = std::log(d);
  }
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double left = (logd[i] - logd[i - 1]) / (grid[i] - grid[i - 1]);
    const double right = (logd[i + 1] - logd[i]) / (grid[i + 1] - grid[i]);
    if (right > left + tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Equality condition

/// Monte Carlo estimate of E|H(S) - G(T - theta)| from paired draws
/// (T - theta, S), using the empirical CDF of each margin.
inline double spread_equality_residual(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 1000) throw DomainError("spread_equality_residual: need at least 1000 paired draws");
  std::vector<double> errs(pairs.size()), scores(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    errs[i] = pairs[i].first;
    scores[i] = pairs[i].second;
  }
  std::sort(errs.begin(), errs.end());
  std::sort(scores.begin(), scores.end());
  std::vector<double> gaps(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    gaps[i] = std::abs(numerics::ecdf_sorted(scores, pairs[i].second) - numerics::ecdf_sorted(errs, pairs[i].first));
  }
  return numerics::mean(gaps);
}

// ---------------------------------------------------------------------------
// General score statistic for a weighted multiparameter model

struct WeightedParametrization {
  std::function<Vector(const Vector&)> q;                   // theta -> R^m
  std::function<Matrix(const Vector&)> q_grad;              // m x k
  std::function<std::vector<Matrix>(const Vector&)> q_hess;  // m matrices, k x k
  std::function<Vector(const Vector&)> weight_score;        // w'/w, length k
  Vector direction_a;                                       // length m
  Vector direction_b;                                       // length k
};

inline std::string describe_theta(const Vector& theta) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < theta.size(); ++i) os << (i ? ", " : "") << theta[i];
  os << ")";
  return os.str();
}

/// S_{a,b} = b^T/(b^T qdot^T a) { pdot/p + wdot/w - sum_h a_h qddot_h b / (b^T qdot^T a) }
/// evaluated for one (model score, theta) pair.
inline double score_ab(const WeightedParametrization& wp, const Vector& model_score, const Vector& theta) {
  const Vector& a = wp.direction_a;
  const Vector& b = wp.direction_b;
  const double denom = b.dot(wp.q_grad(theta).transpose() * a);
  if (!(std::abs(denom) > 1e-12)) {
    throw DomainError("general_score_statistic: b^T qdot^T a vanishes at theta = " + describe_theta(theta));
  }
  Vector curvature = Vector::Zero(b.size());
  if (wp.q_hess) {
    const auto hess = wp.q_hess(theta);
    for (Eigen::Index h = 0; h < a.size(); ++h) curvature += a[h] * (hess[static_cast<std::size_t>(h)] * b);
  }
  const Vector bracket = model_score + wp.weight_score(theta) - curvature / denom;
  return b.dot(bracket) / denom;
}

template <class Obs>
ScoreStatistic general_score_statistic(WeightedParametrization wp,
                                       std::function<Vector(const Obs&, const Vector&)> model_score,
                                       std::function<std::pair<Obs, Vector>(RngStream&)> draw_joint) {
  return {[wp = std::move(wp), model_score = std::move(model_score),
           draw_joint = std::move(draw_joint)](RngStream& rng) {
            const auto [x, theta] = draw_joint(rng);
            return score_ab(wp, model_score(x, theta), theta);
          },
          std::nullopt, std::nullopt, std::nullopt, {}};
}

}  // namespace semieff::spread
