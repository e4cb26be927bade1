#pragma once

// Models addressable by name, with the parameters a config file can set.

#include <optional>
#include <string>
#include <vector>

#include "semieff/errors.hpp"
#include "semieff/models.hpp"
#include "semieff/timeseries.hpp"

namespace semieff::registry {

using models::Vector;

struct ModelParams {
  /// Error law for location, regression and AR(1) models.
  std::string errors = "normal";
  /// Rescales the error law to this variance when set.
  std::optional<double> error_variance;
  /// Covariate moments for the Cox model.
  double ez = 1.0;
  double ez2 = 2.0;
  /// Number of independent N(0,1) covariates for linear regression.
  std::size_t covariates = 1;
};

struct ModelEntry {
  std::string name;
  models::ParametricModel model;
  Vector theta0;
  /// Leading coordinates of theta that estimators target.
  std::size_t interest_dim = 1;
  std::optional<models::LocationFamily> errors;
  std::optional<models::CovariateLaw> covariates;
};

inline const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names = {"normal",           "location:normal", "location:laplace",
                                                 "location:logistic", "cox",             "linreg",
                                                 "expshift",          "ar1"};
  return names;
}

inline std::string model_summary(const std::string& name) {
  if (name == "normal") return "normal location-scale, theta = (mu, sigma)";
  if (name.rfind("location:", 0) == 0) return "location family g(x - theta), g = " + name.substr(9);
  if (name == "cox") return "Cox model with exponential baseline, theta = (nu, lambda), scalar normal covariate";
  if (name == "linreg") return "linear regression y = nu^T z + eps, independent N(0,1) covariates";
  if (name == "expshift") return "exponential shift exp(-(x - theta)) on x > theta (not regular)";
  if (name == "ar1") return "stationary AR(1) y_t = rho y_{t-1} + eps_t";
  throw DomainError("unknown model: " + name);
}

inline ModelEntry make_model(const std::string& name, const ModelParams& p = {}) {
  ModelEntry e;
  e.name = name;
  if (name == "normal") {
    e.model = models::normal_model();
    e.theta0 = models::vec({0.0, 1.0});
    e.interest_dim = 2;
  } else if (name == "location:normal" || name == "location:laplace" || name == "location:logistic") {
    e.errors = models::family_by_name(name.substr(9), p.error_variance);
    e.model = models::location_model(*e.errors);
    e.theta0 = models::vec({0.0});
  } else if (name == "cox") {
    e.covariates = models::normal_covariate_with_moments(p.ez, p.ez2);
    e.model = models::cox_parametric_model(*e.covariates);
    e.theta0 = models::vec({0.0, 1.0});
  } else if (name == "linreg") {
    if (p.covariates < 1 || p.covariates > models::kMaxCovariates) {
      throw DomainError("linreg: covariates must be between 1 and " + std::to_string(models::kMaxCovariates));
    }
    const auto d = static_cast<Eigen::Index>(p.covariates);
    e.errors = models::family_by_name(p.errors, p.error_variance);
    e.covariates = models::normal_covariates(Vector::Zero(d), Vector::Ones(d));
    e.model = models::linear_regression_model(*e.errors, *e.covariates);
    e.theta0 = Vector::Ones(d);
    e.interest_dim = p.covariates;
  } else if (name == "expshift") {
    e.model = models::exponential_shift_model();
    e.theta0 = models::vec({0.0});
  } else if (name == "ar1") {
    e.errors = models::family_by_name(p.errors, p.error_variance);
    e.model = timeseries::ar1_model(*e.errors);
    e.theta0 = models::vec({0.5});
  } else {
    throw DomainError("unknown model: " + name);
  }
  return e;
}

}  // namespace semieff::registry
