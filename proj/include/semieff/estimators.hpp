#pragma once

// Constructive efficient estimation: preliminary estimators, grid
// discretization, one-step updates, two-way and four-way sample splitting,
// and a kernel estimator of the location score.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semieff/errors.hpp"
#include "semieff/geometry.hpp"
#include "semieff/models.hpp"
#include "semieff/numerics/kde.hpp"
#include "semieff/numerics/linalg.hpp"
#include "semieff/numerics/stats.hpp"

namespace semieff::estimators {

using geometry::ObsFn;
using models::Obs;
using numerics::Matrix;
using numerics::Vector;

using ObsSpan = std::span<const Obs>;

struct PreliminaryEstimator {
  std::function<Vector(ObsSpan)> estimate;
  std::string rate_certificate;

  Vector operator()(ObsSpan sample) const { return estimate(sample); }
};

// ---------------------------------------------------------------------------
// M-estimator of location

struct Psi {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  std::string name;
};

inline Psi tanh_psi() {
  return {[](double x) { return std::tanh(x); },
          [](double x) {
            const double c = std::cosh(x);
            return 1.0 / (c * c);
          },
          "tanh"};
}

/// Root of sum psi(x_i - theta) = 0: bisection to a bracket, then Newton
/// steps that fall back to bisection whenever they leave the bracket.
inline double m_estimate(std::span<const double> x, const Psi& psi = tanh_psi()) {
  if (x.empty()) throw EstimationError("m_estimator: empty sample");
  for (double v : x) {
    if (!std::isfinite(v)) throw EstimationError("m_estimator: non-finite observation");
  }
  const double n = static_cast<double>(x.size());
  const double tol = 1e-10 * n;
  std::vector<double> terms(x.size());
  auto total = [&](double theta) {
    for (std::size_t i = 0; i < x.size(); ++i) terms[i] = psi.value(x[i] - theta);
    return numerics::pairwise_sum(terms);
  };
  auto slope = [&](double theta) {
    for (std::size_t i = 0; i < x.size(); ++i) terms[i] = psi.derivative(x[i] - theta);
    return -numerics::pairwise_sum(terms);
  };
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  double lo = *mn - 1.0, hi = *mx + 1.0;
  double f_lo = total(lo), f_hi = total(hi);
  if (!(f_lo > 0.0 && f_hi < 0.0)) {
    throw EstimationError("m_estimator: no sign change of sum psi(x_i - theta) on the bracketing interval");
  }
  double theta = 0.5 * (lo + hi);
  for (int bisect = 0; bisect < 20 && hi - lo > 1.0; ++bisect) {
    const double f = total(theta);
    (f > 0.0 ? lo : hi) = theta;
    theta = 0.5 * (lo + hi);
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double f = total(theta);
    if (std::abs(f) <= tol) return theta;
    (f > 0.0 ? lo : hi) = theta;
    const double d = slope(theta);
    double next = (d < 0.0) ? theta - f / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == theta) return theta;
    theta = next;
  }
  const double f = total(theta);
  if (std::abs(f) <= tol) return theta;
  throw EstimationError("m_estimator: root finder did not converge");
}

/// Location M-estimator on the responses y.
inline PreliminaryEstimator m_estimator(Psi psi = tanh_psi()) {
  std::string cert = "M-estimator with bounded odd increasing psi (" + psi.name +
                     "); root-n consistent at symmetric error laws";
  return {[psi = std::move(psi)](ObsSpan s) {
            std::vector<double> y(s.size());
            for (std::size_t i = 0; i < s.size(); ++i) y[i] = s[i].y;
            return models::vec({m_estimate(y, psi)});
          },
          cert};
}

// ---------------------------------------------------------------------------
// Closed-form preliminaries

inline constexpr double kEulerGamma = 0.57721566490153286061;

/// Moment-type preliminaries by model tag: "normal" gives (mean, sd);
/// "location" gives the sample median; "cox" regresses log y on z, using
/// E[log Y | Z] = -log(lambda) - nu Z - gamma; "ar1" gives the least-squares
/// autoregression coefficient sum y_t y_{t-1} / sum y_{t-1}^2.
inline PreliminaryEstimator moments_preliminary(const std::string& tag) {
  if (tag == "normal") {
    return {[](ObsSpan s) {
              if (s.size() < 2) throw EstimationError("normal preliminary: need at least two observations");
              std::vector<double> y(s.size());
              for (std::size_t i = 0; i < s.size(); ++i) y[i] = s[i].y;
              const double sd = std::sqrt(numerics::variance(y));
              if (!(sd > 0.0)) throw EstimationError("normal preliminary: zero sample variance");
              return models::vec({numerics::mean(y), sd});
            },
            "sample mean and standard deviation; CLT"};
  }
  if (tag == "location") {
    return {[](ObsSpan s) {
              if (s.empty()) throw EstimationError("median preliminary: empty sample");
              std::vector<double> y(s.size());
              for (std::size_t i = 0; i < s.size(); ++i) y[i] = s[i].y;
              return models::vec({numerics::median(std::move(y))});
            },
            "sample median; root-n consistent when g(0) > 0"};
  }
  if (tag == "cox") {
    return {[](ObsSpan s) {
              if (s.size() < 3) throw EstimationError("cox preliminary: need at least three observations");
              std::vector<double> ly(s.size()), z(s.size());
              for (std::size_t i = 0; i < s.size(); ++i) {
                if (!(s[i].y > 0.0)) throw EstimationError("cox preliminary: survival times must be positive");
                ly[i] = std::log(s[i].y);
                z[i] = s[i].z[0];
              }
              const double vz = numerics::variance(z);
              if (!(vz > 0.0)) throw EstimationError("cox preliminary: covariate has no spread");
              const double slope = numerics::covariance(z, ly) / vz;
              const double intercept = numerics::mean(ly) - slope * numerics::mean(z);
              return models::vec({-slope, std::exp(-intercept - kEulerGamma)});
            },
            "least squares of log Y on Z; log of a unit exponential has mean -gamma and finite variance"};
  }
  if (tag == "ar1") {
    return {[](ObsSpan s) {
              std::vector<double> num(s.size()), den(s.size());
              for (std::size_t i = 0; i < s.size(); ++i) {
                num[i] = s[i].y * s[i].z[0];
                den[i] = s[i].z[0] * s[i].z[0];
              }
              const double d = numerics::pairwise_sum(den);
              if (!(d > 0.0)) throw EstimationError("ar1 preliminary: lagged values are all zero");
              return models::vec({numerics::pairwise_sum(num) / d});
            },
            "least-squares autoregression; martingale CLT under stationarity"};
  }
  throw DomainError("moments_preliminary: unsupported model tag '" + tag + "'");
}

/// Least squares of y on the first `dim` covariates, no intercept.
inline PreliminaryEstimator least_squares_preliminary(std::size_t dim) {
  if (dim < 1 || dim > models::kMaxCovariates) throw DomainError("least_squares_preliminary: bad covariate count");
  return {[dim](ObsSpan s) {
            const auto d = static_cast<Eigen::Index>(dim);
            if (s.size() < dim + 1) throw EstimationError("least-squares preliminary: too few observations");
            Matrix zz = Matrix::Zero(d, d);
            Vector zy = Vector::Zero(d);
            for (const auto& x : s) {
              for (Eigen::Index a = 0; a < d; ++a) {
                zy[a] += x.z[static_cast<std::size_t>(a)] * x.y;
                for (Eigen::Index b = 0; b < d; ++b) {
                  zz(a, b) += x.z[static_cast<std::size_t>(a)] * x.z[static_cast<std::size_t>(b)];
                }
              }
            }
            try {
              return numerics::solve_spd(zz, zy);
            } catch (const SingularMatrixError&) {
              throw EstimationError("least-squares preliminary: covariate cross-product matrix is singular");
            }
          },
          "least squares; root-n consistent when E Z Z^T is nonsingular and errors have finite variance"};
}

// ---------------------------------------------------------------------------
// Discretization and one-step updates

/// Rounds each coordinate to the nearest point of (mesh_c / sqrt(n)) Z,
/// ties away from zero.
inline Vector discretize(const Vector& theta_hat, std::size_t n, double mesh_c = 1.0) {
  if (!(mesh_c > 0.0)) throw DomainError("discretize: mesh_c must be positive");
  if (n == 0) throw DomainError("discretize: n must be positive");
  const double step = mesh_c / std::sqrt(static_cast<double>(n));
  Vector out(theta_hat.size());
  for (Eigen::Index i = 0; i < theta_hat.size(); ++i) out[i] = std::round(theta_hat[i] / step) * step;
  return out;
}

/// Coordinatewise mean of f(x_i, theta), summed pairwise.
inline Vector mean_of(const ObsFn& f, ObsSpan sample, const Vector& theta) {
  if (sample.empty()) throw EstimationError("mean over an empty block");
  std::vector<Vector> vals(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) vals[i] = f(sample[i], theta);
  const auto m = vals[0].size();
  Vector out(m);
  std::vector<double> col(sample.size());
  for (Eigen::Index j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < sample.size(); ++i) col[i] = vals[i][j];
    out[j] = numerics::mean(col);
  }
  return out;
}

/// theta* + mean of the influence function over the sample. An influence
/// function with m < k coordinates updates the leading m coordinates.
inline Vector one_step(const Vector& prelim_value, ObsSpan sample, const ObsFn& influence) {
  const Vector step = mean_of(influence, sample, prelim_value);
  if (step.size() > prelim_value.size()) throw DomainError("one_step: influence has more coordinates than theta");
  Vector out = prelim_value;
  out.head(step.size()) += step;
  return out;
}

inline Vector one_step(const Vector& prelim_value, ObsSpan sample, const geometry::InfluenceFunction& influence) {
  return one_step(prelim_value, sample, influence.eval);
}

namespace detail {

inline Vector fit_preliminary(const PreliminaryEstimator& prelim, ObsSpan block, const std::string& label,
                              std::size_t n, std::optional<double> mesh_c) {
  Vector t;
  try {
    t = prelim(block);
  } catch (const std::exception& e) {
    throw EstimationError("preliminary estimator failed on " + label + ": " + e.what());
  }
  return mesh_c ? discretize(t, n, *mesh_c) : t;
}

inline std::size_t split_point(double frac, std::size_t n) {
  return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n)));
}

}  // namespace detail

/// Two-way sample splitting: the preliminary from each half is updated with
/// the influence average over the other half, and the two updates are
/// combined with weights lambda_n/n and (n - lambda_n)/n.
inline Vector split_one_step(ObsSpan sample, const PreliminaryEstimator& prelim, const ObsFn& influence,
                             double lambda_frac = 0.5, std::optional<double> mesh_c = std::nullopt) {
  if (!(lambda_frac > 0.0 && lambda_frac < 1.0)) throw DomainError("split_one_step: lambda must lie in (0,1)");
  const std::size_t n = sample.size();
  if (n < 10) throw EstimationError("split_one_step: need at least 10 observations");
  const std::size_t lam = detail::split_point(lambda_frac, n);
  if (lam == 0 || lam == n) throw EstimationError("split_one_step: a block is empty");
  const ObsSpan first = sample.first(lam), second = sample.subspan(lam);
  const Vector t1 = detail::fit_preliminary(prelim, first, "block 1", n, mesh_c);
  const Vector t2 = detail::fit_preliminary(prelim, second, "block 2", n, mesh_c);
  const double w = static_cast<double>(lam) / static_cast<double>(n);
  return w * one_step(t2, first, influence) + (1.0 - w) * one_step(t1, second, influence);
}

inline Vector split_one_step(ObsSpan sample, const PreliminaryEstimator& prelim,
                             const geometry::InfluenceFunction& influence, double lambda_frac = 0.5,
                             std::optional<double> mesh_c = std::nullopt) {
  return split_one_step(sample, prelim, influence.eval, lambda_frac, mesh_c);
}

// ---------------------------------------------------------------------------
// Kernel estimator of the efficient influence function

/// How a model maps an observation to a residual and a weight vector W; the
/// efficient score is then W * (-g'/g)(residual), with the residual
/// independent of W under the model.
struct ResidualStructure {
  std::function<double(const Obs&, const Vector&)> residual;
  std::function<Vector(const Obs&, const Vector&)> weight;
  bool symmetric_errors = true;
};

inline ResidualStructure location_structure() {
  return {[](const Obs& x, const Vector& t) { return x.y - t[0]; },
          [](const Obs&, const Vector&) { return Vector::Ones(1).eval(); }, true};
}

inline ResidualStructure regression_structure(std::size_t dim) {
  return {[dim](const Obs& x, const Vector& t) {
            double fit = 0.0;
            for (std::size_t j = 0; j < dim; ++j) fit += t[static_cast<Eigen::Index>(j)] * x.z[j];
            return x.y - fit;
          },
          [dim](const Obs& x, const Vector&) {
            Vector w(static_cast<Eigen::Index>(dim));
            for (std::size_t j = 0; j < dim; ++j) w[static_cast<Eigen::Index>(j)] = x.z[j];
            return w;
          },
          true};
}

/// Conditional AR(1): residual y_t - rho y_{t-1}, weight y_{t-1}.
inline ResidualStructure ar1_structure() {
  return {[](const Obs& x, const Vector& t) { return x.y - t[0] * x.z[0]; },
          [](const Obs& x, const Vector&) { return models::vec({x.z[0]}); }, true};
}

/// How the fitted location score is scaled into an information estimate: by
/// its mean square or by its mean slope.
enum class Normalizer { SquaredScore, Slope };

struct KernelRules {
  /// Bandwidth from the residual standard deviation and the auxiliary size m.
  std::function<double(double sd, std::size_t m)> bandwidth = [](double sd, std::size_t m) {
    return 1.06 * sd * std::pow(static_cast<double>(m), -0.2);
  };
  /// Clamp level a_m for the estimated score.
  std::function<double(std::size_t m)> truncation = [](std::size_t m) {
    return 2.0 * std::log(static_cast<double>(m));
  };
  /// Sensitivity of local bandwidths to the pilot density; 0 gives a fixed
  /// bandwidth.
  double adaptive_alpha = 0.5;
  std::size_t grid_size = 2048;
  Normalizer normalizer = Normalizer::SquaredScore;
};

/// A fitted estimate of the efficient influence function.
class FittedInfluence {
 public:
  FittedInfluence(ResidualStructure structure, std::shared_ptr<const numerics::AdaptiveBinnedKde> kde, double truncation,
                  bool odd)
      : structure_(std::move(structure)), kde_(std::move(kde)), a_(truncation), odd_(odd) {}

  /// Clamped -g'/g at residual e; exactly odd when the fit was symmetrized.
  double location_score(double e) const {
    if (odd_) return 0.5 * (raw_score(e) - raw_score(-e));
    return raw_score(e);
  }

  /// The same score with the auxiliary residual `own` (and its mirror image)
  /// removed from the density estimate.
  double location_score_excluding(double e, double own) const {
    if (odd_) return 0.5 * (raw_score_excluding(e, own) - raw_score_excluding(-e, own));
    return raw_score_excluding(e, own);
  }

  Vector operator()(const Obs& x, const Vector& theta) const {
    return info_inverse_ * (structure_.weight(x, theta) * location_score(structure_.residual(x, theta)));
  }

  ObsFn as_function() const {
    auto self = std::make_shared<const FittedInfluence>(*this);
    return [self](const Obs& x, const Vector& t) { return (*self)(x, t); };
  }

  double truncation() const { return a_; }
  double bandwidth() const { return kde_->bandwidth(); }
  const Matrix& information() const { return info_; }

  void set_information(Matrix info) {
    info_ = std::move(info);
    info_inverse_ = numerics::inverse_spd(info_);
  }

 private:
  double raw_score(double e) const { return score_from(e, kde_->density(e), kde_->derivative(e)); }

  double raw_score_excluding(double e, double own) const {
    double d = kde_->density(e), d1 = kde_->derivative(e);
    const auto self = kde_->point_contribution(own, e);
    d -= self.density;
    d1 -= self.derivative;
    if (odd_) {
      const auto mirror = kde_->point_contribution(-own, e);
      d -= mirror.density;
      d1 -= mirror.derivative;
    }
    return score_from(e, d, d1);
  }

  double score_from(double e, double d, double d1) const {
    const double mid = 0.5 * (kde_->lower() + kde_->upper());
    if (!(d > 1e-300)) return e > mid ? a_ : -a_;
    return std::clamp(-d1 / d, -a_, a_);
  }

  ResidualStructure structure_;
  std::shared_ptr<const numerics::AdaptiveBinnedKde> kde_;
  double a_;
  bool odd_;
  Matrix info_;
  Matrix info_inverse_;
};

class ScoreEstimator {
 public:
  explicit ScoreEstimator(ResidualStructure structure, KernelRules rules = {})
      : structure_(std::move(structure)), rules_(std::move(rules)) {}

  /// Fits the influence function from the auxiliary block at theta: kernel
  /// estimate of the residual density (pooled with mirrored residuals for
  /// symmetric errors) and clamped score. Residuals are taken independent of
  /// the weights, so the information is estimated as mean[W W^T] times the
  /// location information of the fitted score. Each auxiliary residual is
  /// left out of the density when its own score enters that estimate.
  FittedInfluence fit(ObsSpan aux, const Vector& theta) const {
    const std::size_t m = aux.size();
    if (m < 2) throw EstimationError("kernel score: auxiliary block needs at least two observations");
    std::vector<double> res(m);
    for (std::size_t i = 0; i < m; ++i) res[i] = structure_.residual(aux[i], theta);
    const double sd = std::sqrt(numerics::variance(res));
    if (!(sd > 0.0) || !std::isfinite(sd)) throw EstimationError("kernel score: residuals have zero variance");
    const double h = rules_.bandwidth(sd, m);
    const double a = rules_.truncation(m) / sd;
    if (!(h > 0.0) || !(a > 0.0)) throw DomainError("kernel score: bandwidth and truncation must be positive");
    std::vector<double> pooled = res;
    if (structure_.symmetric_errors) {
      pooled.reserve(2 * m);
      for (double r : res) pooled.push_back(-r);
    }
    auto kde = std::make_shared<const numerics::AdaptiveBinnedKde>(pooled, h, rules_.adaptive_alpha, rules_.grid_size);
    FittedInfluence fitted(structure_, kde, a, structure_.symmetric_errors);
    const double location_info = rules_.normalizer == Normalizer::SquaredScore
                                     ? squared_score_information(fitted, res)
                                     : slope_location_information(fitted, res, h);
    if (!(location_info > 0.0)) throw EstimationError("kernel score: estimated information is not positive");
    const Matrix info = location_info * weight_second_moment(aux, theta);
    try {
      fitted.set_information(info);
    } catch (const SingularMatrixError&) {
      throw EstimationError("kernel score: estimated information is singular");
    }
    return fitted;
  }

  const ResidualStructure& structure() const { return structure_; }
  const KernelRules& rules() const { return rules_; }

 private:
  /// mean over the auxiliary block of W W^T.
  Matrix weight_second_moment(ObsSpan aux, const Vector& theta) const {
    const std::size_t m = aux.size();
    std::vector<Vector> w(m);
    for (std::size_t i = 0; i < m; ++i) w[i] = structure_.weight(aux[i], theta);
    const auto dim = w[0].size();
    Matrix out(dim, dim);
    std::vector<double> col(m);
    for (Eigen::Index p = 0; p < dim; ++p) {
      for (Eigen::Index q = p; q < dim; ++q) {
        for (std::size_t i = 0; i < m; ++i) col[i] = w[i][p] * w[i][q];
        out(p, q) = out(q, p) = numerics::mean(col);
      }
    }
    return out;
  }

  /// Mean squared clamped score at the auxiliary residuals.
  static double squared_score_information(const FittedInfluence& fitted, const std::vector<double>& res) {
    std::vector<double> v(res.size());
    for (std::size_t i = 0; i < res.size(); ++i) {
      const double s = fitted.location_score_excluding(res[i], res[i]);
      v[i] = s * s;
    }
    return numerics::mean(v);
  }

  /// Mean central-difference slope of the clamped score at the auxiliary
  /// residuals, half-width h/20.
  static double slope_location_information(const FittedInfluence& fitted, const std::vector<double>& res, double h) {
    const double d = 0.05 * h;
    std::vector<double> v(res.size());
    for (std::size_t i = 0; i < res.size(); ++i) {
      v[i] = (fitted.location_score_excluding(res[i] + d, res[i]) - fitted.location_score_excluding(res[i] - d, res[i])) /
             (2.0 * d);
    }
    return numerics::mean(v);
  }

  ResidualStructure structure_;
  KernelRules rules_;
};

inline ScoreEstimator kernel_score_estimator(ResidualStructure structure = location_structure(),
                                             KernelRules rules = {}) {
  return ScoreEstimator(std::move(structure), std::move(rules));
}

// ---------------------------------------------------------------------------
// Four-way semiparametric splitting

struct SplitPlan {
  double lambda = 0.25;
  double mu = 0.5;
  double nu = 0.75;

  void validate() const {
    if (!(0.0 < lambda && lambda < mu && mu < nu && nu < 1.0)) {
      throw DomainError("split plan: need 0 < lambda < mu < nu < 1");
    }
  }

  /// Block boundaries [0, l), [l, m), [m, v), [v, n).
  std::array<std::size_t, 3> cuts(std::size_t n) const {
    validate();
    return {detail::split_point(lambda, n), detail::split_point(mu, n), detail::split_point(nu, n)};
  }
};

inline constexpr std::size_t kMinBlock = 50;

/// theta_hat = (mu_n/n) (t2 + mean_{i <= mu_n} l_n2(X_i; t2))
///           + ((n - mu_n)/n) (t1 + mean_{i > mu_n} l_n1(X_i; t1)),
/// with t1 from block 1, t2 from block 3, l_n1 fitted on block 2 and l_n2
/// fitted on block 4.
inline Vector semiparametric_one_step(ObsSpan sample, const PreliminaryEstimator& prelim,
                                      const ScoreEstimator& score_est, const SplitPlan& plan = {},
                                      std::optional<double> mesh_c = std::nullopt) {
  const std::size_t n = sample.size();
  const auto [l, m, v] = plan.cuts(n);
  const std::array<std::size_t, 4> sizes{l, m - l, v - m, n - v};
  for (std::size_t b = 0; b < 4; ++b) {
    if (sizes[b] < kMinBlock) {
      throw EstimationError("semiparametric_one_step: block " + std::to_string(b + 1) + " has " +
                            std::to_string(sizes[b]) + " observations, need at least " + std::to_string(kMinBlock));
    }
  }
  const ObsSpan block1 = sample.subspan(0, l), block2 = sample.subspan(l, m - l);
  const ObsSpan block3 = sample.subspan(m, v - m), block4 = sample.subspan(v);
  const Vector t1 = detail::fit_preliminary(prelim, block1, "block 1", n, mesh_c);
  const Vector t2 = detail::fit_preliminary(prelim, block3, "block 3", n, mesh_c);
  const auto ell1 = score_est.fit(block2, t1);
  const auto ell2 = score_est.fit(block4, t2);
  const double w = static_cast<double>(m) / static_cast<double>(n);
  const Vector left = one_step(t2, sample.first(m), ell2.as_function());
  const Vector right = one_step(t1, sample.subspan(m), ell1.as_function());
  return w * left + (1.0 - w) * right;
}

}  // namespace semieff::estimators
