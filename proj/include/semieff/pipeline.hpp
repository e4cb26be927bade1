#pragma once

// Declarative estimator pipelines: a preliminary estimator, optional
// discretization, a splitting scheme and an influence-function source.

#include <array>
#include <functional>
#include <optional>
#include <string>

#include "semieff/errors.hpp"
#include "semieff/estimators.hpp"
#include "semieff/geometry.hpp"
#include "semieff/registry.hpp"
#include "semieff/timeseries.hpp"

namespace semieff::pipeline {

using estimators::ObsSpan;
using models::Vector;

struct PipelineConfig {
  /// moments | mean | median | m-estimator | mean-median | constant
  std::string preliminary = "moments";
  bool discretize = true;
  /// none | two-way | four-way
  std::string splitting = "none";
  /// none (report the preliminary) | exact | kernel
  std::string score = "exact";
  std::array<double, 3> plan{0.25, 0.5, 0.75};
  double mesh_c = 1.0;

  std::optional<double> mesh() const { return discretize ? std::optional<double>(mesh_c) : std::nullopt; }
  estimators::SplitPlan split_plan() const { return {plan[0], plan[1], plan[2]}; }
};

/// A runnable estimator T_n of the leading `output_dim` coordinates of theta.
struct Pipeline {
  std::string label;
  std::size_t output_dim = 1;
  std::function<Vector(ObsSpan)> run;

  Vector operator()(ObsSpan sample) const { return run(sample); }
  Vector target(const Vector& theta) const { return theta.head(static_cast<Eigen::Index>(output_dim)); }
};

inline std::string describe(const PipelineConfig& c) {
  std::string s = c.preliminary;
  if (c.score != "none") s += " + " + c.score + " score";
  if (c.splitting != "none") s += ", " + c.splitting + " split";
  if (c.discretize) s += ", discretized (c=" + format_double(c.mesh_c) + ")";
  return s;
}

namespace detail {

inline std::vector<double> responses(ObsSpan s) {
  std::vector<double> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) y[i] = s[i].y;
  return y;
}

inline estimators::PreliminaryEstimator simple_preliminary(const std::string& name, const Vector& theta0) {
  if (name == "mean") {
    return {[](ObsSpan s) {
              if (s.empty()) throw EstimationError("mean: empty sample");
              return models::vec({numerics::mean(responses(s))});
            },
            "sample mean"};
  }
  if (name == "median") {
    return {[](ObsSpan s) {
              if (s.empty()) throw EstimationError("median: empty sample");
              return models::vec({numerics::median(responses(s))});
            },
            "sample median"};
  }
  if (name == "mean-median") {
    return {[](ObsSpan s) {
              if (s.empty()) throw EstimationError("mean-median: empty sample");
              const auto y = responses(s);
              return models::vec({0.5 * numerics::mean(y) + 0.5 * numerics::median(y)});
            },
            "average of sample mean and sample median"};
  }
  if (name == "m-estimator") return estimators::m_estimator();
  if (name == "constant") {
    return {[theta0](ObsSpan) { return theta0; }, "constant at theta0; not consistent away from theta0"};
  }
  throw DomainError("unknown preliminary: " + name);
}

inline estimators::PreliminaryEstimator moments_for(const registry::ModelEntry& e) {
  if (e.name == "normal") return estimators::moments_preliminary("normal");
  if (e.name.rfind("location:", 0) == 0) return estimators::moments_preliminary("location");
  if (e.name == "cox") return estimators::moments_preliminary("cox");
  if (e.name == "ar1") return estimators::moments_preliminary("ar1");
  if (e.name == "linreg") return estimators::least_squares_preliminary(e.model.dim_theta);
  throw DomainError("no moment preliminary for model '" + e.name + "'");
}

inline timeseries::Ar1Path path_from(ObsSpan s) {
  timeseries::Ar1Path path;
  if (!s.empty()) path.y0 = s[0].z[0];
  path.y = responses(s);
  return path;
}

}  // namespace detail

/// Builds a pipeline for a registry model. theta0 is the value returned by
/// the constant preliminary and the point where exact influence functions
/// are constructed (they re-evaluate the information at every theta).
inline Pipeline build_pipeline(const registry::ModelEntry& entry, const PipelineConfig& cfg, const Vector& theta0) {
  if (cfg.splitting != "none" && cfg.splitting != "two-way" && cfg.splitting != "four-way") {
    throw DomainError("splitting must be none, two-way or four-way, got '" + cfg.splitting + "'");
  }
  if (cfg.score != "none" && cfg.score != "exact" && cfg.score != "kernel") {
    throw DomainError("score must be none, exact or kernel, got '" + cfg.score + "'");
  }
  if (!(cfg.mesh_c > 0.0)) throw DomainError("mesh_c must be positive");
  cfg.split_plan().validate();
  entry.model.require_domain(theta0);

  const bool moments = cfg.preliminary == "moments";
  const bool full_width = moments || cfg.preliminary == "constant";
  const auto prelim = moments ? detail::moments_for(entry) : detail::simple_preliminary(cfg.preliminary, theta0);
  const std::size_t out_dim = full_width ? entry.interest_dim : 1;
  const auto head = static_cast<Eigen::Index>(out_dim);
  const auto mesh = cfg.mesh();
  Pipeline p{entry.name + ": " + describe(cfg), out_dim, {}};

  if (cfg.score == "none") {
    if (cfg.splitting != "none") throw DomainError("splitting needs an influence function (score exact or kernel)");
    p.run = [prelim, mesh, head](ObsSpan s) {
      Vector t = prelim(s);
      if (mesh) t = estimators::discretize(t, s.size(), *mesh);
      return Vector(t.head(head));
    };
    return p;
  }

  if (!entry.model.regular) throw DomainError("one-step estimation needs a regular model; '" + entry.name + "' is not");
  if (!full_width && entry.model.dim_theta != 1) {
    throw DomainError("preliminary '" + cfg.preliminary + "' estimates one coordinate; model '" + entry.name +
                      "' has " + std::to_string(entry.model.dim_theta));
  }
  p.output_dim = entry.interest_dim;
  const auto interest = static_cast<Eigen::Index>(entry.interest_dim);

  if (cfg.score == "exact") {
    const auto influence = geometry::efficient_influence(entry.model, entry.interest_dim, theta0);
    if (cfg.splitting == "four-way") throw DomainError("four-way splitting needs score: kernel");
    if (cfg.splitting == "two-way") {
      const double lambda = cfg.plan[1];
      p.run = [prelim, influence, lambda, mesh, interest](ObsSpan s) {
        return Vector(estimators::split_one_step(s, prelim, influence, lambda, mesh).head(interest));
      };
    } else {
      p.run = [prelim, influence, mesh, interest](ObsSpan s) {
        Vector t = estimators::detail::fit_preliminary(prelim, s, "the full sample", s.size(), mesh);
        return Vector(estimators::one_step(t, s, influence).head(interest));
      };
    }
    return p;
  }

  // Kernel-estimated influence function.
  if (cfg.splitting == "none") throw DomainError("score: kernel needs two-way (ar1) or four-way splitting");
  const auto plan = cfg.split_plan();
  if (entry.name == "ar1") {
    if (!moments) throw DomainError("ar1 kernel pipeline uses the least-squares preliminary (preliminary: moments)");
    const auto split = cfg.splitting == "two-way" ? timeseries::Ar1Split::CrossFit : timeseries::Ar1Split::FourBlocks;
    const auto est = estimators::kernel_score_estimator(estimators::ar1_structure());
    p.run = [est, plan, mesh, split](ObsSpan s) {
      return models::vec({timeseries::adaptive_ar1_estimate(detail::path_from(s), est, plan, mesh, split).rho});
    };
    return p;
  }
  if (cfg.splitting != "four-way") throw DomainError("score: kernel for i.i.d. models needs four-way splitting");
  std::optional<estimators::ScoreEstimator> est;
  if (entry.name.rfind("location:", 0) == 0) {
    est = estimators::kernel_score_estimator(estimators::location_structure());
  } else if (entry.name == "linreg") {
    est = estimators::kernel_score_estimator(estimators::regression_structure(entry.model.dim_theta));
  } else {
    throw DomainError("score: kernel is available for location:*, linreg and ar1, not '" + entry.name + "'");
  }
  p.run = [prelim, est = *est, plan, mesh, interest](ObsSpan s) {
    return Vector(estimators::semiparametric_one_step(s, prelim, est, plan, mesh).head(interest));
  };
  return p;
}

}  // namespace semieff::pipeline
