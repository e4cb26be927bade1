#pragma once

// Regular parametric models with exact scores and Fisher information.
//
// Observations are opaque points consumed only through log_density and score.
// Every model uses the same record: a response y plus up to kMaxCovariates
// covariates. Location models use y alone, the Cox and regression models
// read covariates from z, and the conditional AR(1) model stores the lagged
// value in z[0].

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semieff/errors.hpp"
#include "semieff/numerics/integrate.hpp"
#include "semieff/numerics/linalg.hpp"
#include "semieff/numerics/quantile.hpp"
#include "semieff/numerics/rng.hpp"
#include "semieff/numerics/stats.hpp"

namespace semieff::models {

using numerics::Matrix;
using numerics::RngStream;
using numerics::Vector;

inline constexpr std::size_t kMaxCovariates = 4;

struct Obs {
  double y = 0.0;
  std::array<double, kMaxCovariates> z{};
};

// ---------------------------------------------------------------------------
// Error densities for location families

struct LocationFamily {
  std::string name;
  std::function<double(double)> log_density;             // log g
  std::function<double(double)> log_density_derivative;  // g'/g
  std::function<double(double)> cdf;
  std::function<double(RngStream&)> sample;
  double fisher_location;  // I(g) = integral (g'/g)^2 g
  double variance;
  bool symmetric;

  /// -g'/g, the location score at residual x.
  double location_score(double x) const { return -log_density_derivative(x); }
  double density(double x) const { return std::exp(log_density(x)); }
};

inline LocationFamily normal_family(double sd = 1.0) {
  if (!(sd > 0.0)) throw DomainError("normal_family: sd must be positive");
  const double log_norm = -std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
  return {"normal",
          [=](double x) { return log_norm - 0.5 * (x / sd) * (x / sd); },
          [=](double x) { return -x / (sd * sd); },
          [=](double x) { return numerics::normal_cdf(x / sd); },
          [=](RngStream& rng) { return sd * rng.normal(); },
          1.0 / (sd * sd),
          sd * sd,
          true};
}

/// Density exp(-|x|/b)/(2b). The score at the kink is taken as 0.
inline LocationFamily laplace_family(double scale = 1.0) {
  if (!(scale > 0.0)) throw DomainError("laplace_family: scale must be positive");
  const double b = scale;
  return {"laplace",
          [=](double x) { return -std::abs(x) / b - std::log(2.0 * b); },
          [=](double x) { return x > 0.0 ? -1.0 / b : (x < 0.0 ? 1.0 / b : 0.0); },
          [=](double x) { return x < 0.0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b); },
          [=](RngStream& rng) { return rng.laplace(b); },
          1.0 / (b * b),
          2.0 * b * b,
          true};
}

inline LocationFamily logistic_family(double scale = 1.0) {
  if (!(scale > 0.0)) throw DomainError("logistic_family: scale must be positive");
  const double s = scale;
  return {"logistic",
          [=](double x) {
            const double a = std::abs(x) / s;
            return -a - 2.0 * std::log1p(std::exp(-a)) - std::log(s);
          },
          [=](double x) { return -std::tanh(0.5 * x / s) / s; },
          [=](double x) { return 1.0 / (1.0 + std::exp(-x / s)); },
          [=](RngStream& rng) { return rng.logistic(s); },
          1.0 / (3.0 * s * s),
          std::numbers::pi * std::numbers::pi * s * s / 3.0,
          true};
}

/// Standard Gumbel (asymmetric; I(g) = 1). Used to exercise symmetry preconditions.
inline LocationFamily gumbel_family() {
  return {"gumbel",
          [](double x) { return -x - std::exp(-x); },
          [](double x) { return -1.0 + std::exp(-x); },
          [](double x) { return std::exp(-std::exp(-x)); },
          [](RngStream& rng) { return -std::log(-std::log(rng.uniform())); },
          1.0,
          std::numbers::pi * std::numbers::pi / 6.0,
          false};
}

/// Family by name, optionally rescaled to a target variance.
inline LocationFamily family_by_name(const std::string& name, std::optional<double> target_variance = std::nullopt) {
  if (target_variance && !(*target_variance > 0.0)) throw DomainError("family_by_name: variance must be positive");
  if (name == "normal") return normal_family(target_variance ? std::sqrt(*target_variance) : 1.0);
  if (name == "laplace") return laplace_family(target_variance ? std::sqrt(*target_variance / 2.0) : 1.0);
  if (name == "logistic") {
    return logistic_family(target_variance ? std::sqrt(3.0 * *target_variance) / std::numbers::pi : 1.0);
  }
  if (name == "gumbel" && !target_variance) return gumbel_family();
  throw DomainError("unknown error family: " + name);
}

/// I(g) by quadrature, independent of the closed forms stored in the family.
inline double fisher_location_by_quadrature(const LocationFamily& g, double lo = -60.0, double hi = 60.0) {
  auto integrand = [&g](double x) {
    const double s = g.log_density_derivative(x);
    return s * s * g.density(x);
  };
  return numerics::integrate(integrand, lo, 0.0, 1e-12) + numerics::integrate(integrand, 0.0, hi, 1e-12);
}

// ---------------------------------------------------------------------------
// The model contract

struct ParametricModel {
  std::string name;
  std::size_t dim_theta = 1;
  std::vector<std::string> parameter_names;
  /// log p(x; theta), up to an additive term that does not depend on theta.
  std::function<double(const Obs&, const Vector&)> log_density;
  std::function<Vector(const Obs&, const Vector&)> score;
  std::function<Matrix(const Vector&)> fisher;
  std::function<std::vector<Obs>(const Vector&, std::size_t, RngStream&)> sample;
  std::function<bool(const Vector&)> theta_domain;
  bool regular = true;

  void require_domain(const Vector& theta) const {
    if (static_cast<std::size_t>(theta.size()) != dim_theta || !theta_domain(theta)) {
      throw DomainError(name + ": parameter outside the model's domain");
    }
  }
};

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

/// N(mu, sigma^2) with theta = (mu, sigma).
inline ParametricModel normal_model() {
  ParametricModel m;
  m.name = "normal";
  m.dim_theta = 2;
  m.parameter_names = {"mu", "sigma"};
  m.theta_domain = [](const Vector& t) { return t.size() == 2 && t[1] > 0.0 && std::isfinite(t[0]); };
  m.log_density = [m](const Obs& x, const Vector& t) {
    m.require_domain(t);
    const double r = (x.y - t[0]) / t[1];
    return -std::log(t[1]) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * r * r;
  };
  m.score = [m](const Obs& x, const Vector& t) {
    m.require_domain(t);
    const double r = (x.y - t[0]) / t[1];
    return vec({r / t[1], (r * r - 1.0) / t[1]});
  };
  m.fisher = [m](const Vector& t) {
    m.require_domain(t);
    Matrix f = Matrix::Zero(2, 2);
    f(0, 0) = 1.0 / (t[1] * t[1]);
    f(1, 1) = 2.0 / (t[1] * t[1]);
    return f;
  };
  m.sample = [m](const Vector& t, std::size_t n, RngStream& rng) {
    m.require_domain(t);
    std::vector<Obs> xs(n);
    for (auto& x : xs) x.y = t[0] + t[1] * rng.normal();
    return xs;
  };
  return m;
}

/// Density g(x - theta).
inline ParametricModel location_model(const LocationFamily& g) {
  if (!(g.fisher_location > 0.0) || !std::isfinite(g.fisher_location)) {
    throw DomainError("location_model: Fisher information for location must be finite and positive");
  }
  ParametricModel m;
  m.name = "location:" + g.name;
  m.dim_theta = 1;
  m.parameter_names = {"theta"};
  m.theta_domain = [](const Vector& t) { return t.size() == 1 && std::isfinite(t[0]); };
  m.log_density = [g](const Obs& x, const Vector& t) { return g.log_density(x.y - t[0]); };
  m.score = [g](const Obs& x, const Vector& t) { return vec({g.location_score(x.y - t[0])}); };
  m.fisher = [i = g.fisher_location](const Vector&) { return Matrix::Constant(1, 1, i); };
  m.sample = [g](const Vector& t, std::size_t n, RngStream& rng) {
    std::vector<Obs> xs(n);
    for (auto& x : xs) x.y = t[0] + g.sample(rng);
    return xs;
  };
  return m;
}

// ---------------------------------------------------------------------------
// Covariate laws

struct CovariateLaw {
  std::string name;
  std::size_t dim = 1;
  std::function<void(RngStream&, Obs&)> sample;
  Vector mean;
  Matrix second_moment;  // E Z Z^T
};

/// Independent normal coordinates with given means and variances.
inline CovariateLaw normal_covariates(Vector means, Vector variances) {
  if (means.size() != variances.size() || means.size() == 0 ||
      static_cast<std::size_t>(means.size()) > kMaxCovariates) {
    throw DomainError("normal_covariates: need 1.." + std::to_string(kMaxCovariates) + " matching coordinates");
  }
  if ((variances.array() < 0.0).any()) throw DomainError("normal_covariates: negative variance");
  CovariateLaw law;
  law.name = "normal";
  law.dim = static_cast<std::size_t>(means.size());
  law.mean = means;
  law.second_moment = means * means.transpose();
  law.second_moment.diagonal() += variances;
  Vector sds = variances.cwiseSqrt();
  law.sample = [means, sds](RngStream& rng, Obs& x) {
    for (Eigen::Index j = 0; j < means.size(); ++j) x.z[static_cast<std::size_t>(j)] = means[j] + sds[j] * rng.normal();
  };
  return law;
}

/// Scalar normal covariate with E Z and E Z^2 as stated.
inline CovariateLaw normal_covariate_with_moments(double ez, double ez2) {
  const double var = ez2 - ez * ez;
  if (!(var > 0.0)) throw DomainError("covariate law: Var Z must be positive");
  return normal_covariates(vec({ez}), vec({var}));
}

// ---------------------------------------------------------------------------
// Cox proportional hazards with exponential baseline, theta = (nu, lambda).

inline ParametricModel cox_parametric_model(const CovariateLaw& law) {
  if (law.dim != 1) throw DomainError("cox_parametric_model: scalar covariate expected");
  const double ez = law.mean[0];
  const double ez2 = law.second_moment(0, 0);
  if (!(ez2 - ez * ez > 0.0)) throw DomainError("cox_parametric_model: Var Z must be positive");
  ParametricModel m;
  m.name = "cox";
  m.dim_theta = 2;
  m.parameter_names = {"nu", "lambda"};
  m.theta_domain = [](const Vector& t) { return t.size() == 2 && t[1] > 0.0 && std::isfinite(t[0]); };
  m.log_density = [m](const Obs& x, const Vector& t) {
    m.require_domain(t);
    const double z = x.z[0];
    return z * t[0] + std::log(t[1]) - std::exp(z * t[0]) * t[1] * x.y;
  };
  m.score = [m](const Obs& x, const Vector& t) {
    m.require_domain(t);
    const double z = x.z[0];
    const double hazard = std::exp(z * t[0]);
    return vec({z * (1.0 - hazard * t[1] * x.y), 1.0 / t[1] - hazard * x.y});
  };
  m.fisher = [m, ez, ez2](const Vector& t) {
    m.require_domain(t);
    Matrix f(2, 2);
    f << ez2, ez / t[1], ez / t[1], 1.0 / (t[1] * t[1]);
    return f;
  };
  m.sample = [m, law](const Vector& t, std::size_t n, RngStream& rng) {
    m.require_domain(t);
    std::vector<Obs> xs(n);
    for (auto& x : xs) {
      law.sample(rng, x);
      x.y = rng.exponential() / (std::exp(x.z[0] * t[0]) * t[1]);
    }
    return xs;
  };
  return m;
}

// ---------------------------------------------------------------------------
// Linear regression y = nu^T z + eps with eps ~ g.

inline ParametricModel linear_regression_model(const LocationFamily& g, const CovariateLaw& law) {
  if (!(g.fisher_location > 0.0) || !std::isfinite(g.fisher_location)) {
    throw DomainError("linear_regression_model: I(g) must be finite and positive");
  }
  if (!numerics::is_spd(law.second_moment)) throw DomainError("linear_regression_model: E Z Z^T is singular");
  const auto d = law.dim;
  ParametricModel m;
  m.name = "linreg";
  m.dim_theta = d;
  for (std::size_t j = 0; j < d; ++j) m.parameter_names.push_back("nu" + std::to_string(j + 1));
  m.theta_domain = [d](const Vector& t) { return static_cast<std::size_t>(t.size()) == d && t.allFinite(); };
  auto residual = [d](const Obs& x, const Vector& t) {
    double fit = 0.0;
    for (std::size_t j = 0; j < d; ++j) fit += t[static_cast<Eigen::Index>(j)] * x.z[j];
    return x.y - fit;
  };
  m.log_density = [m, g, residual](const Obs& x, const Vector& t) {
    m.require_domain(t);
    return g.log_density(residual(x, t));
  };
  m.score = [m, g, residual, d](const Obs& x, const Vector& t) {
    m.require_domain(t);
    const double s = g.location_score(residual(x, t));
    Vector out(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) out[static_cast<Eigen::Index>(j)] = x.z[j] * s;
    return out;
  };
  m.fisher = [m, info = Matrix(g.fisher_location * law.second_moment)](const Vector& t) {
    m.require_domain(t);
    return info;
  };
  m.sample = [m, g, law, d](const Vector& t, std::size_t n, RngStream& rng) {
    m.require_domain(t);
    std::vector<Obs> xs(n);
    for (auto& x : xs) {
      law.sample(rng, x);
      double fit = 0.0;
      for (std::size_t j = 0; j < d; ++j) fit += t[static_cast<Eigen::Index>(j)] * x.z[j];
      x.y = fit + g.sample(rng);
    }
    return xs;
  };
  return m;
}

// ---------------------------------------------------------------------------
// Exponential shift: density exp(-(x - theta)) on x > theta. Not regular.

inline ParametricModel exponential_shift_model() {
  ParametricModel m;
  m.name = "expshift";
  m.dim_theta = 1;
  m.parameter_names = {"theta"};
  m.regular = false;
  m.theta_domain = [](const Vector& t) { return t.size() == 1 && std::isfinite(t[0]); };
  m.log_density = [](const Obs& x, const Vector& t) {
    return x.y > t[0] ? -(x.y - t[0]) : -std::numeric_limits<double>::infinity();
  };
  // Pointwise derivative of the log-density on the support. It does not have
  // mean zero, which is one symptom of non-regularity.
  m.score = [](const Obs& x, const Vector& t) {
    return vec({x.y > t[0] ? 1.0 : std::numeric_limits<double>::quiet_NaN()});
  };
  m.fisher = [](const Vector&) -> Matrix {
    throw NotRegularError("expshift: the support moves with theta; Fisher information is not defined");
  };
  m.sample = [](const Vector& t, std::size_t n, RngStream& rng) {
    std::vector<Obs> xs(n);
    for (auto& x : xs) x.y = t[0] + rng.exponential();
    return xs;
  };
  return m;
}

// ---------------------------------------------------------------------------
// Monte Carlo regularity diagnostics

struct MatrixEstimate {
  Matrix value;
  Matrix stderr_;
};

/// E[score score^T] with entrywise standard errors.
inline MatrixEstimate fisher_by_outer_product(const ParametricModel& model, const Vector& theta, std::size_t n,
                                              RngStream& rng) {
  const auto xs = model.sample(theta, n, rng);
  const auto k = static_cast<Eigen::Index>(model.dim_theta);
  MatrixEstimate out{Matrix::Zero(k, k), Matrix::Zero(k, k)};
  std::vector<Vector> scores;
  scores.reserve(n);
  for (const auto& x : xs) scores.push_back(model.score(x, theta));
  std::vector<double> prod(n);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      for (std::size_t r = 0; r < n; ++r) prod[r] = scores[r][i] * scores[r][j];
      out.value(i, j) = numerics::mean(prod);
      out.stderr_(i, j) = numerics::stderr_of_mean(prod);
    }
  }
  return out;
}

/// E[score] with standard errors.
inline std::pair<Vector, Vector> score_mean(const ParametricModel& model, const Vector& theta, std::size_t n,
                                            RngStream& rng) {
  const auto xs = model.sample(theta, n, rng);
  const auto k = static_cast<Eigen::Index>(model.dim_theta);
  Vector m(k), se(k);
  std::vector<double> col(n);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (std::size_t r = 0; r < n; ++r) col[r] = model.score(xs[r], theta)[i];
    m[i] = numerics::mean(col);
    se[i] = numerics::stderr_of_mean(col);
  }
  return {m, se};
}

/// -Hessian of the sample-average log-density at theta by central second
/// differences, with per-entry standard errors across observations.
inline MatrixEstimate fisher_by_hessian(const ParametricModel& model, const Vector& theta, std::size_t n,
                                        RngStream& rng, double step = 1e-3) {
  const auto xs = model.sample(theta, n, rng);
  const auto k = static_cast<Eigen::Index>(model.dim_theta);
  MatrixEstimate out{Matrix::Zero(k, k), Matrix::Zero(k, k)};
  std::vector<double> h(n);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      Vector ei = Vector::Zero(k), ej = Vector::Zero(k);
      ei[i] = step;
      ej[j] = step;
      for (std::size_t r = 0; r < n; ++r) {
        const auto& x = xs[r];
        const double fpp = model.log_density(x, theta + ei + ej);
        const double fpm = model.log_density(x, theta + ei - ej);
        const double fmp = model.log_density(x, theta - ei + ej);
        const double fmm = model.log_density(x, theta - ei - ej);
        h[r] = -(fpp - fpm - fmp + fmm) / (4.0 * step * step);
      }
      out.value(i, j) = out.value(j, i) = numerics::mean(h);
      out.stderr_(i, j) = out.stderr_(j, i) = numerics::stderr_of_mean(h);
    }
  }
  return out;
}

/// L2 quotient || s(theta + h e) - s(theta) - (h/2) e^T score s(theta) || / h
/// for root-density s, estimated under P_theta via sqrt(p_h/p).
inline double regularity_quotient(const ParametricModel& model, const Vector& theta, const Vector& direction, double h,
                                  const std::vector<Obs>& sample_at_theta) {
  std::vector<double> sq(sample_at_theta.size());
  const Vector shifted = theta + h * direction;
  for (std::size_t r = 0; r < sample_at_theta.size(); ++r) {
    const auto& x = sample_at_theta[r];
    const double log_ratio = model.log_density(x, shifted) - model.log_density(x, theta);
    const double root_ratio = std::exp(0.5 * log_ratio);
    const double lin = 0.5 * h * direction.dot(model.score(x, theta));
    sq[r] = (root_ratio - 1.0 - lin) * (root_ratio - 1.0 - lin);
  }
  return std::sqrt(numerics::mean(sq)) / h;
}

}  // namespace semieff::models
