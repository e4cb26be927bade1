#pragma once

// Fisher-information geometry with nuisance parameters.
//
// theta = (nu, eta) with nu the leading m coordinates (interest) and eta the
// remaining k - m (nuisance). With I partitioned accordingly,
//
//     I11.2 = I11 - I12 I22^{-1} I21          (efficient information for nu)
//     l*_1  = l_1 - I12 I22^{-1} l_2          (efficient score)
//
// The restricted bound (eta known) is I11^{-1}; the full bound is I11.2^{-1}.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semieff/errors.hpp"
#include "semieff/models.hpp"
#include "semieff/numerics/linalg.hpp"
#include "semieff/numerics/stats.hpp"

namespace semieff::geometry {

using models::Obs;
using numerics::Matrix;
using numerics::Vector;

using ObsFn = std::function<Vector(const Obs&, const Vector&)>;

struct PartitionedInfo {
  std::size_t m = 0;
  Matrix full;
  Matrix i11, i12, i21, i22;
  Matrix i11_2;  // I11 - I12 I22^{-1} I21
  Matrix i22_1;  // I22 - I21 I11^{-1} I12

  /// Block form of I^{-1}:
  /// [[I11.2^{-1}, -I11.2^{-1} I12 I22^{-1}], [-I22.1^{-1} I21 I11^{-1}, I22.1^{-1}]].
  Matrix block_inverse() const {
    const auto k = full.rows();
    const auto mm = static_cast<Eigen::Index>(m);
    const Matrix a = numerics::inverse_spd(i11_2);
    const Matrix d = numerics::inverse_spd(i22_1);
    Matrix out(k, k);
    out.topLeftCorner(mm, mm) = a;
    out.topRightCorner(mm, k - mm) = -a * numerics::solve_spd_matrix(i22, i21).transpose();
    out.bottomLeftCorner(k - mm, mm) = -d * numerics::solve_spd_matrix(i11, i12).transpose();
    out.bottomRightCorner(k - mm, k - mm) = d;
    return out;
  }
};

inline PartitionedInfo partition(const Matrix& info, std::size_t m) {
  const auto k = static_cast<std::size_t>(info.rows());
  if (info.rows() != info.cols()) throw DomainError("partition: matrix must be square");
  if (m < 1 || m >= k) throw DomainError("partition: need 1 <= m < k");
  numerics::cholesky(info);  // throws SingularMatrixError when not SPD
  PartitionedInfo p;
  const auto mm = static_cast<Eigen::Index>(m);
  const auto r = static_cast<Eigen::Index>(k - m);
  p.m = m;
  p.full = info;
  p.i11 = info.topLeftCorner(mm, mm);
  p.i12 = info.topRightCorner(mm, r);
  p.i21 = info.bottomLeftCorner(r, mm);
  p.i22 = info.bottomRightCorner(r, r);
  p.i11_2 = numerics::symmetrized(p.i11 - p.i12 * numerics::solve_spd_matrix(p.i22, p.i21));
  p.i22_1 = numerics::symmetrized(p.i22 - p.i21 * numerics::solve_spd_matrix(p.i11, p.i12));
  return p;
}

// ---------------------------------------------------------------------------
// Scores and influence functions

enum class BoundKind { Restricted, Full, Semiparametric, Parametric };

inline std::string to_string(BoundKind k) {
  switch (k) {
    case BoundKind::Restricted: return "restricted";
    case BoundKind::Full: return "full";
    case BoundKind::Semiparametric: return "semiparametric";
    case BoundKind::Parametric: return "parametric";
  }
  return "?";
}

struct InfluenceFunction {
  ObsFn eval;
  BoundKind label;
  Matrix bound;  // covariance of eval under the model = the information bound

  Vector operator()(const Obs& x, const Vector& theta) const { return eval(x, theta); }
};

/// Leading m coordinates and trailing k - m coordinates of a model score.
inline std::pair<ObsFn, ObsFn> split_score(const models::ParametricModel& model, std::size_t m) {
  const auto mm = static_cast<Eigen::Index>(m);
  const auto r = static_cast<Eigen::Index>(model.dim_theta - m);
  auto score = model.score;
  return {[score, mm](const Obs& x, const Vector& t) { return Vector(score(x, t).head(mm)); },
          [score, r](const Obs& x, const Vector& t) { return Vector(score(x, t).tail(r)); }};
}

/// l*_1 = l_1 - I12 I22^{-1} l_2.
inline ObsFn efficient_score(ObsFn score1, ObsFn score2, const PartitionedInfo& p) {
  const Matrix regression = numerics::solve_spd_matrix(p.i22, p.i21).transpose();  // I12 I22^{-1}
  return [score1 = std::move(score1), score2 = std::move(score2), regression](const Obs& x, const Vector& t) {
    return Vector(score1(x, t) - regression * score2(x, t));
  };
}

/// I11^{-1} l_1: efficient when the nuisance is known.
inline InfluenceFunction influence_restricted(ObsFn score1, const PartitionedInfo& p) {
  const Matrix inv = numerics::inverse_spd(p.i11);
  return {[score1 = std::move(score1), inv](const Obs& x, const Vector& t) { return Vector(inv * score1(x, t)); },
          BoundKind::Restricted, inv};
}

/// I11.2^{-1} l*_1: efficient when the nuisance is unknown.
inline InfluenceFunction influence_full(ObsFn score1, ObsFn score2, const PartitionedInfo& p) {
  const Matrix inv = numerics::inverse_spd(p.i11_2);
  auto eff = efficient_score(std::move(score1), std::move(score2), p);
  return {[eff = std::move(eff), inv](const Obs& x, const Vector& t) { return Vector(inv * eff(x, t)); },
          BoundKind::Full, inv};
}

/// I11.2^{-1} - I11^{-1}; positive semidefinite.
inline Matrix information_loss(const PartitionedInfo& p) {
  return numerics::symmetrized(numerics::inverse_spd(p.i11_2) - numerics::inverse_spd(p.i11));
}

/// tr(I11.2^{-1}) / tr(I11^{-1}); 1 means no loss from the nuisance.
inline double information_loss_ratio(const PartitionedInfo& p) {
  return numerics::inverse_spd(p.i11_2).trace() / numerics::inverse_spd(p.i11).trace();
}

/// Leading m coordinates of I(theta)^{-1} l(x, theta), with I recomputed at
/// each theta. Equals I11.2^{-1} l*_1 at every theta; m = k gives the plain
/// parametric efficient influence function.
inline InfluenceFunction efficient_influence(const models::ParametricModel& model, std::size_t m, const Vector& theta) {
  if (m < 1 || m > model.dim_theta) throw DomainError("efficient_influence: need 1 <= m <= k");
  const auto mm = static_cast<Eigen::Index>(m);
  auto score = model.score;
  auto fisher = model.fisher;
  const Matrix bound = numerics::inverse_spd(fisher(theta)).topLeftCorner(mm, mm);
  return {[score, fisher, mm](const Obs& x, const Vector& t) {
            return Vector(numerics::solve_spd(fisher(t), score(x, t)).head(mm));
          },
          m == model.dim_theta ? BoundKind::Parametric : BoundKind::Full, bound};
}

/// Information bound (1 - rho^2)^2 for the correlation of a bivariate normal.
inline double correlation_bound(double rho) {
  if (!(std::abs(rho) < 1.0)) throw DomainError("correlation_bound: |rho| must be < 1");
  const double a = 1.0 - rho * rho;
  return a * a;
}

/// b = I^{-1} qdot^T a, maximizing (b^T qdot^T a)^2 / (b^T I b).
inline Vector optimal_direction_b(const Matrix& info, const Matrix& q_grad, const Vector& a) {
  const Vector qa = q_grad.transpose() * a;
  if (qa.isZero(0.0)) throw DomainError("optimal_direction_b: qdot^T a vanishes");
  return numerics::solve_spd(info, qa);
}

/// (b^T qdot^T a)^2 / (b^T I b); at the optimal b this is a^T qdot I^{-1} qdot^T a.
inline double direction_value(const Matrix& info, const Matrix& q_grad, const Vector& a, const Vector& b) {
  const double num = b.dot(q_grad.transpose() * a);
  return num * num / b.dot(info * b);
}

// ---------------------------------------------------------------------------
// Semiparametric cases solved in closed form

/// Symmetric location with unknown symmetric g: the efficient influence
/// function is the one for g known, -g'/g(x - nu) / I(g), and the bound is
/// 1/I(g). The score for nu is antisymmetric, so its projection on the
/// symmetric nuisance tangent space vanishes.
inline InfluenceFunction semiparametric_influence_symmetric_location(const models::LocationFamily& g) {
  if (!g.symmetric) throw DomainError("symmetric location: error density '" + g.name + "' is not symmetric");
  if (!(g.fisher_location > 0.0) || !std::isfinite(g.fisher_location)) {
    throw DomainError("symmetric location: I(g) must be finite and positive");
  }
  const double info = g.fisher_location;
  return {[g, info](const Obs& x, const Vector& t) { return models::vec({g.location_score(x.y - t[0]) / info}); },
          BoundKind::Semiparametric, Matrix::Constant(1, 1, 1.0 / info)};
}

/// Linear regression with unknown error density: the adaptive influence
/// function (I(g) E ZZ^T)^{-1} z (-g'/g)(y - nu^T z).
inline InfluenceFunction semiparametric_influence_regression(const models::LocationFamily& g,
                                                             const models::CovariateLaw& law) {
  const auto model = models::linear_regression_model(g, law);
  const Matrix info = g.fisher_location * law.second_moment;
  const Matrix inv = numerics::inverse_spd(info);
  auto score = model.score;
  return {[score, inv](const Obs& x, const Vector& t) { return Vector(inv * score(x, t)); },
          BoundKind::Semiparametric, inv};
}

// ---------------------------------------------------------------------------
// Monte Carlo moments of vector functions of observations

struct MomentEstimate {
  Vector mean, mean_se;
  Matrix second, second_se;  // E f g^T and entrywise standard errors
};

/// Mean of f and cross moment E f g^T over a sample, with standard errors.
inline MomentEstimate cross_moments(const ObsFn& f, const ObsFn& g, const std::vector<Obs>& sample,
                                    const Vector& theta) {
  const std::size_t n = sample.size();
  std::vector<Vector> fv(n), gv(n);
  for (std::size_t i = 0; i < n; ++i) {
    fv[i] = f(sample[i], theta);
    gv[i] = g(sample[i], theta);
  }
  const auto p = fv.empty() ? 0 : fv[0].size();
  const auto q = gv.empty() ? 0 : gv[0].size();
  MomentEstimate out{Vector(p), Vector(p), Matrix(p, q), Matrix(p, q)};
  std::vector<double> col(n);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (std::size_t i = 0; i < n; ++i) col[i] = fv[i][a];
    out.mean[a] = numerics::mean(col);
    out.mean_se[a] = numerics::stderr_of_mean(col);
    for (Eigen::Index b = 0; b < q; ++b) {
      for (std::size_t i = 0; i < n; ++i) col[i] = fv[i][a] * gv[i][b];
      out.second(a, b) = numerics::mean(col);
      out.second_se(a, b) = numerics::stderr_of_mean(col);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

inline nlohmann::json to_json(const Matrix& a) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json to_json(const Vector& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

struct BoundReport {
  std::string model;
  Vector theta;
  Matrix restricted_bound;
  Matrix full_bound;
  Matrix loss;
  double loss_ratio;

  nlohmann::json to_json() const {
    return {{"model", model},
            {"theta", geometry::to_json(theta)},
            {"restricted_bound", geometry::to_json(restricted_bound)},
            {"full_bound", geometry::to_json(full_bound)},
            {"loss", geometry::to_json(loss)},
            {"loss_trace_ratio", loss_ratio}};
  }
};

/// Restricted and full bounds for the leading m coordinates of theta.
inline BoundReport bound_report(const models::ParametricModel& model, const Vector& theta, std::size_t m) {
  model.require_domain(theta);
  const auto p = partition(model.fisher(theta), m);
  return {model.name,
          theta,
          numerics::inverse_spd(p.i11),
          numerics::inverse_spd(p.i11_2),
          information_loss(p),
          information_loss_ratio(p)};
}

}  // namespace semieff::geometry
