#pragma once

// Seeded Monte Carlo checks that tie estimators to information bounds: LAN
// remainder decay, spread of the error law against the normal bound,
// regularity along local alternatives, excess variance over the bound, and
// the Cramer-Rao identity for the empirical distribution function.

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semieff/errors.hpp"
#include "semieff/io.hpp"
#include "semieff/models.hpp"
#include "semieff/numerics/integrate.hpp"
#include "semieff/numerics/linalg.hpp"
#include "semieff/numerics/parallel.hpp"
#include "semieff/numerics/quantile.hpp"
#include "semieff/numerics/rng.hpp"
#include "semieff/numerics/stats.hpp"
#include "semieff/pipeline.hpp"
#include "semieff/spread.hpp"

namespace semieff::diagnostics {

using models::Obs;
using models::ParametricModel;
using numerics::Matrix;
using numerics::RngStream;
using numerics::Vector;

// ---------------------------------------------------------------------------
// Report

struct Verdict {
  std::string check;
  bool pass = false;
  double margin = 0.0;
  double threshold = 0.0;
  /// How margin is compared with threshold: "<=" or ">=".
  std::string rule;
  /// Informational verdicts are reported but do not affect all_pass().
  bool informational = false;
  std::string detail;
};

struct Cell {
  std::string label;
  std::size_t n = 0;
  std::size_t reps = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double variance = std::numeric_limits<double>::quiet_NaN();
  double stderr_mean = std::numeric_limits<double>::quiet_NaN();
  double stderr_variance = std::numeric_limits<double>::quiet_NaN();
  /// Q(u_{i+1}) - Q(u_i) on u = 0.05, 0.10, ..., 0.95.
  std::vector<double> quantile_increments;
  std::map<std::string, double> metrics;
};

struct McReport {
  std::string experiment_id;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<std::size_t> n_grid;
  std::vector<std::size_t> reps;
  std::vector<Cell> cells;
  std::vector<Verdict> verdicts;

  bool all_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass || v.informational; });
  }

  const Verdict* find_verdict(const std::string& check) const {
    for (const auto& v : verdicts) {
      if (v.check == check) return &v;
    }
    return nullptr;
  }

  const Cell* find_cell(const std::string& label) const {
    for (const auto& c : cells) {
      if (c.label == label) return &c;
    }
    return nullptr;
  }

  /// Appends the cells, verdicts and grid of another report.
  void merge(const McReport& other) {
    for (auto n : other.n_grid) {
      if (std::find(n_grid.begin(), n_grid.end(), n) == n_grid.end()) n_grid.push_back(n);
    }
    for (auto r : other.reps) {
      if (std::find(reps.begin(), reps.end(), r) == reps.end()) reps.push_back(r);
    }
    cells.insert(cells.end(), other.cells.begin(), other.cells.end());
    verdicts.insert(verdicts.end(), other.verdicts.begin(), other.verdicts.end());
  }

  nlohmann::json to_json() const {
    auto hdr = nlohmann::json::object();
    for (const auto& [k, v] : header) hdr[k] = v;
    auto cs = nlohmann::json::array();
    for (const auto& c : cells) {
      nlohmann::json m = nlohmann::json::object();
      for (const auto& [k, v] : c.metrics) m[k] = v;
      cs.push_back({{"label", c.label},
                    {"n", c.n},
                    {"reps", c.reps},
                    {"mean", c.mean},
                    {"variance", c.variance},
                    {"stderr_mean", c.stderr_mean},
                    {"stderr_variance", c.stderr_variance},
                    {"quantile_increments", c.quantile_increments},
                    {"metrics", m}});
    }
    auto vs = nlohmann::json::array();
    for (const auto& v : verdicts) {
      vs.push_back({{"check", v.check},
                    {"pass", v.pass},
                    {"margin", v.margin},
                    {"threshold", v.threshold},
                    {"rule", v.rule},
                    {"informational", v.informational},
                    {"detail", v.detail}});
    }
    return {{"experiment_id", experiment_id},
            {"seed", seed},
            {"toolkit_version", std::string(kToolkitVersion)},
            {"header", hdr},
            {"n_grid", n_grid},
            {"reps", reps},
            {"cells", cs},
            {"verdicts", vs},
            {"all_pass", all_pass()}};
  }

  std::string to_json_text() const { return to_json().dump(2) + "\n"; }

  /// One row per cell; metric columns are the union of metric names.
  void write_csv(std::ostream& os) const {
    CsvWriter csv(os);
    csv.comment("experiment_id: " + experiment_id);
    csv.comment("seed: " + std::to_string(seed));
    csv.comment("toolkit_version: " + std::string(kToolkitVersion));
    for (const auto& [k, v] : header) {
      if (k != "experiment_id" && k != "seed" && k != "toolkit_version") csv.comment(k + ": " + v);
    }
    std::set<std::string> keys;
    for (const auto& c : cells) {
      for (const auto& kv : c.metrics) keys.insert(kv.first);
    }
    std::vector<std::string> head{"cell", "n", "reps", "mean", "variance", "stderr_mean", "stderr_variance",
                                  "quantile_increments"};
    head.insert(head.end(), keys.begin(), keys.end());
    csv.row(head);
    for (const auto& c : cells) {
      std::string incs;
      for (std::size_t i = 0; i < c.quantile_increments.size(); ++i) {
        incs += (i ? ";" : "") + format_double(c.quantile_increments[i]);
      }
      std::vector<std::string> row{c.label,
                                   std::to_string(c.n),
                                   std::to_string(c.reps),
                                   format_double(c.mean),
                                   format_double(c.variance),
                                   format_double(c.stderr_mean),
                                   format_double(c.stderr_variance),
                                   incs};
      for (const auto& k : keys) {
        const auto it = c.metrics.find(k);
        row.push_back(it == c.metrics.end() ? "" : format_double(it->second));
      }
      csv.row(row);
    }
  }
};

// ---------------------------------------------------------------------------
// Options

/// Pass thresholds; all are configuration.
struct Thresholds {
  /// Allowed relative rise of median |R_n| between consecutive grid points.
  double lan_slack = 0.10;
  /// Medians of |R_n| at or below this are rounding error and count as zero.
  double lan_zero = 1e-10;
  /// Multiples of the quantile standard error tolerated in the spread order.
  double spread_sigma = 3.0;
  /// Relative tolerance on central quantile ranges for efficient pipelines.
  double equality_tol = 0.10;
  double ks_alpha = 0.01;
  double excess_sigma = 3.0;
  double ecdf_sigma = 3.0;
  /// Family-wise level of the covariance identity over the t grid.
  double identity_alpha = 0.01;
};

struct McOptions {
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string experiment_id;
  Thresholds thresholds;
};

// ---------------------------------------------------------------------------
// Helpers

/// Levels u = 0.05, 0.10, ..., 0.95.
inline std::vector<double> increment_grid() {
  std::vector<double> u;
  for (int i = 1; i <= 19; ++i) u.push_back(0.05 * i);
  return u;
}

/// Runs fn(r, rng) for r < reps on RngStream(seed, r).child(cell); a failing
/// replication is reported by index.
template <class Fn>
auto replicate(std::size_t reps, const McOptions& opts, std::uint64_t cell, Fn&& fn) {
  return numerics::run_indexed(reps, opts.workers, [&](std::size_t r) {
    RngStream rng = RngStream(opts.seed, r).child(cell);
    try {
      return fn(r, rng);
    } catch (const ReplicationError&) {
      throw;
    } catch (const std::exception& e) {
      throw ReplicationError("replication " + std::to_string(r) + ": " + e.what(), r);
    }
  });
}

/// Moments and quantile increments of the finite values; the count of
/// non-finite values is recorded as a metric when positive.
inline Cell summarize(std::string label, std::size_t n, const std::vector<double>& values) {
  Cell c;
  c.label = std::move(label);
  c.n = n;
  c.reps = values.size();
  std::vector<double> finite;
  finite.reserve(values.size());
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  if (finite.size() != values.size()) c.metrics["nonfinite"] = static_cast<double>(values.size() - finite.size());
  if (finite.size() >= 2) {
    c.mean = numerics::mean(finite);
    c.variance = numerics::variance(finite);
    c.stderr_mean = numerics::stderr_of_mean(finite);
    c.stderr_variance = numerics::stderr_of_variance(finite);
    const numerics::EmpiricalQuantile q(finite);
    const auto u = increment_grid();
    for (std::size_t i = 1; i < u.size(); ++i) c.quantile_increments.push_back(q(u[i]) - q(u[i - 1]));
  } else if (finite.size() == 1) {
    c.mean = finite[0];
  }
  return c;
}

inline McReport new_report(const std::string& default_id, const McOptions& opts) {
  McReport r;
  r.experiment_id = opts.experiment_id.empty() ? default_id : opts.experiment_id;
  r.seed = opts.seed;
  return r;
}

inline std::string vec_text(const Vector& v) { return spread::describe_theta(v); }

/// sqrt(n) (T_n - q(theta)) for one sample.
inline Vector scaled_error(const pipeline::Pipeline& est, const std::vector<Obs>& xs, const Vector& theta) {
  const Vector t = est(xs);
  return std::sqrt(static_cast<double>(xs.size())) * (t - est.target(theta));
}

inline Matrix default_bound(const ParametricModel& model, const Vector& theta0, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  return numerics::inverse_spd(model.fisher(theta0)).topLeftCorner(d, d);
}

// ---------------------------------------------------------------------------
// LAN remainder

/// R_n = [L_n(theta0 + t/sqrt n) - L_n(theta0)] - [t^T S_n - t^T I t / 2] with
/// S_n = n^{-1/2} sum score(X_i, theta0). Passes when median |R_n| does not
/// rise by more than lan_slack between consecutive n. For a model without a
/// Fisher information the quadratic term uses the sample outer product of
/// the scores.
inline McReport lan_check(const ParametricModel& model, const Vector& theta0, const Vector& t,
                          const std::vector<std::size_t>& n_grid, std::size_t reps, const McOptions& opts) {
  if (n_grid.empty() || reps == 0) throw DomainError("lan_check: need a nonempty n grid and reps >= 1");
  if (static_cast<std::size_t>(t.size()) != model.dim_theta) throw DomainError("lan_check: t has the wrong length");
  model.require_domain(theta0);
  for (auto n : n_grid) {
    if (n == 0) throw DomainError("lan_check: n must be positive");
    model.require_domain(theta0 + t / std::sqrt(static_cast<double>(n)));
  }
  std::optional<Matrix> info;
  try {
    info = model.fisher(theta0);
  } catch (const NotRegularError&) {
  }
  auto report = new_report("lan_check:" + model.name, opts);
  report.n_grid = n_grid;
  report.reps = {reps};
  std::vector<double> medians;
  bool all_exact = true;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    const std::size_t n = n_grid[g];
    const double rn = std::sqrt(static_cast<double>(n));
    const Vector theta_n = theta0 + t / rn;
    const auto rem = replicate(reps, opts, g, [&](std::size_t, RngStream& rng) {
      const auto xs = model.sample(theta0, n, rng);
      std::vector<double> llr(n);
      std::vector<Vector> scores(n);
      for (std::size_t i = 0; i < n; ++i) {
        llr[i] = model.log_density(xs[i], theta_n) - model.log_density(xs[i], theta0);
        scores[i] = model.score(xs[i], theta0);
      }
      Vector s = Vector::Zero(t.size());
      std::vector<double> col(n);
      for (Eigen::Index j = 0; j < t.size(); ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = scores[i][j];
        s[j] = numerics::pairwise_sum(col) / rn;
      }
      double quad;
      if (info) {
        quad = t.dot(*info * t);
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          const double ts = t.dot(scores[i]);
          col[i] = ts * ts;
        }
        quad = numerics::pairwise_sum(col) / static_cast<double>(n);
      }
      return numerics::pairwise_sum(llr) - (t.dot(s) - 0.5 * quad);
    });
    std::vector<double> abs_rem(rem.size());
    for (std::size_t r = 0; r < rem.size(); ++r) abs_rem[r] = std::abs(rem[r]);
    auto cell = summarize("lan n=" + std::to_string(n), n, rem);
    const double med = numerics::median(abs_rem);
    const double mx = *std::max_element(abs_rem.begin(), abs_rem.end());
    cell.metrics["median_abs_remainder"] = med;
    cell.metrics["max_abs_remainder"] = mx;
    if (!(mx <= opts.thresholds.lan_zero)) all_exact = false;
    medians.push_back(med);
    report.cells.push_back(std::move(cell));
  }
  double worst = 0.0;
  bool finite = true;
  for (auto& m : medians) {
    if (m <= opts.thresholds.lan_zero) m = 0.0;
  }
  for (std::size_t g = 0; g < medians.size(); ++g) {
    if (!std::isfinite(medians[g])) finite = false;
    if (g == 0) continue;
    double ratio;
    if (medians[g] == 0.0) {
      ratio = 0.0;
    } else if (medians[g - 1] == 0.0) {
      ratio = std::numeric_limits<double>::infinity();
    } else {
      ratio = medians[g] / medians[g - 1];
    }
    if (std::isnan(ratio)) ratio = std::numeric_limits<double>::infinity();
    worst = std::max(worst, ratio);
  }
  const double threshold = 1.0 + opts.thresholds.lan_slack;
  std::string detail = "largest ratio of consecutive median |R_n| along n";
  if (!info) detail += "; Fisher information undefined, quadratic term from the sample score outer product";
  if (!finite) detail += "; non-finite remainders (log-likelihood ratio is -inf off the support)";
  if (all_exact) detail += "; |R_n| <= " + format_double(opts.thresholds.lan_zero) + " in every replication";
  report.verdicts.push_back({"lan_remainder_decay", finite && worst <= threshold, finite ? worst : std::numeric_limits<double>::infinity(), threshold,
                             "<=", false, detail});
  return report;
}

// ---------------------------------------------------------------------------
// Spread of the error law

struct LasOptions {
  /// Information bound for the pipeline's target; defaults to the leading
  /// block of I(theta0)^{-1}.
  std::optional<Matrix> bound;
  /// Also require central quantile ranges to match the bound's.
  bool expect_efficient = false;
  /// Lower levels u of the central ranges [u, 1 - u] used for near-equality.
  std::vector<double> equality_levels{0.05, 0.10, 0.25};
};

/// Builds the empirical quantile function of sqrt(n) a^T (T_n - q(theta0))
/// and compares its increments on u in [0.05, 0.95] with those of the normal
/// bound N(0, a^T B a), allowing spread_sigma standard errors of the two
/// empirical quantiles. A degenerate (constant) error law is reported as an
/// informational cell.
inline McReport las_spread_check(const ParametricModel& model, const pipeline::Pipeline& est, const Vector& theta0,
                                 const Vector& a, std::size_t n, std::size_t reps, const McOptions& opts,
                                 const LasOptions& las = {}) {
  if (static_cast<std::size_t>(a.size()) != est.output_dim) throw DomainError("las_spread_check: a has the wrong length");
  if (reps < 20) throw DomainError("las_spread_check: need at least 20 replications");
  model.require_domain(theta0);
  const Matrix bound = las.bound ? *las.bound : default_bound(model, theta0, est.output_dim);
  const double sigma2 = a.dot(bound * a);
  if (!(sigma2 > 0.0)) throw DomainError("las_spread_check: bound variance a^T B a must be positive");
  const double sigma = std::sqrt(sigma2);
  auto report = new_report("las_spread_check:" + model.name, opts);
  report.n_grid = {n};
  report.reps = {reps};
  const auto z = replicate(reps, opts, 0, [&](std::size_t, RngStream& rng) {
    return a.dot(scaled_error(est, model.sample(theta0, n, rng), theta0));
  });
  auto cell = summarize("las n=" + std::to_string(n), n, z);
  const auto grid = increment_grid();
  const numerics::EmpiricalQuantile g(z);
  const auto k = numerics::normal_quantile_fn(0.0, sigma);
  const double spread = g(0.95) - g(0.05);
  cell.metrics["bound_variance"] = sigma2;
  cell.metrics["spread_90"] = spread;
  cell.metrics["bound_spread_90"] = k(0.95) - k(0.05);
  cell.metrics["iqr_ratio"] = (g(0.75) - g(0.25)) / (k(0.75) - k(0.25));
  report.cells.push_back(cell);

  const double lo = *std::min_element(z.begin(), z.end()), hi = *std::max_element(z.begin(), z.end());
  if (lo == hi) {
    report.verdicts.push_back({"las_spread", false, 0.0, k(0.95) - k(0.05), ">=", true,
                               "degenerate estimator: zero spread at theta0; the bound constrains averaged or local "
                               "risk, not a single parameter value"});
    return report;
  }
  std::vector<double> se(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double u = grid[i];
    se[i] = sigma * std::sqrt(u * (1.0 - u) / static_cast<double>(reps)) / numerics::normal_pdf(numerics::normal_quantile(u));
  }
  const double mult = opts.thresholds.spread_sigma;
  auto slack = [&](std::size_t i, std::size_t j) { return mult * (se[i] + se[j]); };
  const auto cmp = spread::is_more_spread(g.as_quantile_fn(), k, grid, slack);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      worst = std::max(worst, (k(grid[j]) - k(grid[i])) - (g(grid[j]) - g(grid[i])) - slack(i, j));
    }
  }
  report.verdicts.push_back({"las_spread", cmp.more_spread, worst, 0.0, "<=", false,
                             "largest shortfall of an empirical quantile increment below the bound's, net of " +
                                 format_double(mult) + " standard errors"});
  if (las.expect_efficient) {
    double dev = 0.0;
    for (double u : las.equality_levels) {
      dev = std::max(dev, std::abs((g(1.0 - u) - g(u)) / (k(1.0 - u) - k(u)) - 1.0));
    }
    report.verdicts.push_back({"las_equality", dev <= opts.thresholds.equality_tol, dev, opts.thresholds.equality_tol,
                               "<=", false, "largest relative gap between central quantile ranges and the bound's"});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Regularity along a local alternative

/// Compares the law of sqrt(n)(T_n - q(theta_n)) under theta_n = theta0 +
/// t/sqrt(n) with the law of sqrt(n)(T_n - q(theta0)) under theta0, one
/// coordinate at a time, by the two-sample KS distance against its
/// ks_alpha critical value (Bonferroni over coordinates).
inline McReport regularity_check(const ParametricModel& model, const pipeline::Pipeline& est, const Vector& theta0,
                                 const Vector& t, std::size_t n, std::size_t reps, const McOptions& opts) {
  if (static_cast<std::size_t>(t.size()) != model.dim_theta) throw DomainError("regularity_check: t has the wrong length");
  if (reps < 20) throw DomainError("regularity_check: need at least 20 replications");
  model.require_domain(theta0);
  const Vector theta_n = theta0 + t / std::sqrt(static_cast<double>(n));
  model.require_domain(theta_n);
  auto report = new_report("regularity_check:" + model.name, opts);
  report.n_grid = {n};
  report.reps = {reps};
  const auto under_n = replicate(reps, opts, 1, [&](std::size_t, RngStream& rng) {
    return scaled_error(est, model.sample(theta_n, n, rng), theta_n);
  });
  const auto under_0 = replicate(reps, opts, 0, [&](std::size_t, RngStream& rng) {
    return scaled_error(est, model.sample(theta0, n, rng), theta0);
  });
  const std::size_t d = est.output_dim;
  const double crit = numerics::ks_two_sample_critical(opts.thresholds.ks_alpha / static_cast<double>(d), reps, reps);
  double worst = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> a(reps), b(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      a[r] = under_n[r][static_cast<Eigen::Index>(j)];
      b[r] = under_0[r][static_cast<Eigen::Index>(j)];
    }
    const double ks = numerics::ks_distance(a, b);
    worst = std::max(worst, ks);
    auto ca = summarize("regularity coord " + std::to_string(j) + " under theta_n", n, a);
    ca.metrics["ks_distance"] = ks;
    report.cells.push_back(ca);
    auto cb = summarize("regularity coord " + std::to_string(j) + " under theta0", n, b);
    cb.metrics["ks_distance"] = ks;
    report.cells.push_back(cb);
  }
  report.verdicts.push_back({"regularity", worst < crit, worst, crit, "<", false,
                             "two-sample KS distance between the laws under theta_n = theta0 + t/sqrt(n), t = " +
                                 vec_text(t) + ", and under theta0"});
  return report;
}

// ---------------------------------------------------------------------------
// Excess variance over the information bound

/// Covariance of sqrt(n)(T_n - q(theta0)) minus the bound B. Passes when the
/// smallest eigenvalue of the difference is at least -excess_sigma times the
/// Frobenius norm of the entrywise standard errors.
inline McReport excess_variance(const ParametricModel& model, const pipeline::Pipeline& est, const Vector& theta0,
                                std::size_t n, std::size_t reps, const McOptions& opts,
                                std::optional<Matrix> bound = std::nullopt) {
  if (reps < 20) throw DomainError("excess_variance: need at least 20 replications");
  model.require_domain(theta0);
  const std::size_t d = est.output_dim;
  const auto dd = static_cast<Eigen::Index>(d);
  const Matrix b = bound ? *bound : default_bound(model, theta0, d);
  if (b.rows() != dd || b.cols() != dd) throw DomainError("excess_variance: bound has the wrong shape");
  auto report = new_report("excess_variance:" + model.name, opts);
  report.n_grid = {n};
  report.reps = {reps};
  const auto z = replicate(reps, opts, 0, [&](std::size_t, RngStream& rng) {
    return scaled_error(est, model.sample(theta0, n, rng), theta0);
  });
  std::vector<std::vector<double>> cols(d, std::vector<double>(reps));
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t j = 0; j < d; ++j) cols[j][r] = z[r][static_cast<Eigen::Index>(j)];
  }
  Matrix cov(dd, dd), se(dd, dd);
  std::vector<double> prod(reps);
  for (std::size_t i = 0; i < d; ++i) {
    const double mi = numerics::mean(cols[i]);
    for (std::size_t j = 0; j < d; ++j) {
      const double mj = numerics::mean(cols[j]);
      for (std::size_t r = 0; r < reps; ++r) prod[r] = (cols[i][r] - mi) * (cols[j][r] - mj);
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      cov(ii, jj) = numerics::pairwise_sum(prod) / static_cast<double>(reps - 1);
      se(ii, jj) = numerics::stderr_of_mean(prod);
    }
  }
  const Matrix excess = numerics::symmetrized(cov - b);
  const double lambda_min = Eigen::SelfAdjointEigenSolver<Matrix>(excess).eigenvalues().minCoeff();
  const double threshold = -opts.thresholds.excess_sigma * se.norm();
  for (std::size_t j = 0; j < d; ++j) {
    auto cell = summarize("excess coord " + std::to_string(j), n, cols[j]);
    for (std::size_t i = 0; i < d; ++i) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      cell.metrics["bound_" + std::to_string(i)] = b(jj, ii);
      cell.metrics["excess_" + std::to_string(i)] = excess(jj, ii);
      cell.metrics["excess_stderr_" + std::to_string(i)] = se(jj, ii);
    }
    report.cells.push_back(std::move(cell));
  }
  report.verdicts.push_back({"excess_variance", lambda_min >= threshold, lambda_min, threshold, ">=", false,
                             "smallest eigenvalue of Cov(sqrt(n)(T_n - q)) - bound"});
  return report;
}

// ---------------------------------------------------------------------------
// Cramer-Rao bound for the empirical distribution function

/// Quantile of a location family by bisection on its CDF.
inline double family_quantile(const models::LocationFamily& f, double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("family_quantile: u outside (0,1)");
  double lo = -1.0, hi = 1.0;
  while (f.cdf(lo) > u) lo *= 2.0;
  while (f.cdf(hi) < u) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (f.cdf(mid) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct EcdfOptions {
  /// The competitor is F_n(t) + N(0, c^2 F(t)(1 - F(t))/n); unbiased, with
  /// variance (1 + c^2) times the bound.
  double competitor_scale = 1.0;
  /// Grid of epsilon in [0, 1] and x points for the perturbed-law check.
  std::size_t epsilon_points = 11;
};

/// Variance of F_n(t) against F(t)(1 - F(t))/n at each t, an unbiased noisy
/// competitor against the same bound, the covariance identity
/// Cov(competitor, F_n(t)) = Var F_n(t), and validity of the perturbed laws
/// dF_eps = (1 - eps (1[x <= t] - F(t))) dF.
inline McReport ecdf_cramer_rao_check(const models::LocationFamily& f, const std::vector<double>& t_grid,
                                      std::size_t n, std::size_t reps, const McOptions& opts,
                                      const EcdfOptions& eo = {}) {
  if (t_grid.empty() || n == 0 || reps < 20) throw DomainError("ecdf_cramer_rao_check: bad grid, n or reps");
  auto report = new_report("ecdf_cramer_rao_check:" + f.name, opts);
  report.n_grid = {n};
  report.reps = {reps};
  const std::size_t k = t_grid.size();
  const double nd = static_cast<double>(n);
  std::vector<double> ft(k);
  for (std::size_t j = 0; j < k; ++j) ft[j] = f.cdf(t_grid[j]);
  // Per replication: F_n(t_j) followed by the competitor at t_j.
  const auto draws = replicate(reps, opts, 0, [&](std::size_t, RngStream& rng) {
    std::vector<double> xs(n);
    for (auto& x : xs) x = f.sample(rng);
    std::sort(xs.begin(), xs.end());
    std::vector<double> out(2 * k);
    for (std::size_t j = 0; j < k; ++j) {
      out[j] = numerics::ecdf_sorted(xs, t_grid[j]);
      out[k + j] = out[j] + eo.competitor_scale * std::sqrt(ft[j] * (1.0 - ft[j]) / nd) * rng.normal();
    }
    return out;
  });
  const double sig = opts.thresholds.ecdf_sigma;
  double worst_var = 0.0, worst_comp = std::numeric_limits<double>::infinity(), worst_cov = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> hat(reps), comp(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      hat[r] = draws[r][j];
      comp[r] = draws[r][k + j];
    }
    const double bound = ft[j] * (1.0 - ft[j]) / nd;
    auto cell = summarize("ecdf t=" + format_double(t_grid[j]), n, hat);
    const double var_se = cell.stderr_variance;
    const double comp_var = numerics::variance(comp);
    const double comp_se = numerics::stderr_of_variance(comp);
    const double mh = numerics::mean(hat), mc = numerics::mean(comp);
    std::vector<double> cross(reps), gap(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      cross[r] = (comp[r] - mc) * (hat[r] - mh);
      gap[r] = (comp[r] - mc - hat[r] + mh) * (hat[r] - mh);
    }
    const double cov = numerics::pairwise_sum(cross) / static_cast<double>(reps - 1);
    const double cov_gap_se = numerics::stderr_of_mean(gap);
    cell.metrics["t"] = t_grid[j];
    cell.metrics["F_t"] = ft[j];
    cell.metrics["bound"] = bound;
    cell.metrics["competitor_variance"] = comp_var;
    cell.metrics["competitor_variance_stderr"] = comp_se;
    cell.metrics["competitor_covariance"] = cov;
    // With no variation across replications the bound must be too small to
    // show up in reps samples of size n.
    const double zv = var_se > 0.0 ? std::abs(cell.variance - bound) / var_se
                                   : (bound * nd * static_cast<double>(reps) < 1.0 ? 0.0
                                                                                 : std::numeric_limits<double>::infinity());
    const double zc = comp_se > 0.0 ? (comp_var - bound) / comp_se : std::numeric_limits<double>::infinity();
    const double zcov = cov_gap_se > 0.0 ? std::abs(cov - cell.variance) / cov_gap_se : 0.0;
    worst_var = std::max(worst_var, zv);
    if (bound > 0.0) worst_comp = std::min(worst_comp, zc);
    worst_cov = std::max(worst_cov, zcov);
    report.cells.push_back(std::move(cell));
  }
  report.verdicts.push_back({"ecdf_variance", worst_var <= sig, worst_var, sig, "<=", false,
                             "largest |Var F_n(t) - F(t)(1-F(t))/n| in standard errors over the t grid"});
  report.verdicts.push_back({"competitor_exceeds_bound", worst_comp >= sig, worst_comp, sig, ">=", false,
                             "smallest (Var competitor - bound) in standard errors over the t grid"});
  const double zid = numerics::normal_quantile(1.0 - opts.thresholds.identity_alpha / (2.0 * static_cast<double>(k)));
  report.verdicts.push_back({"competitor_covariance_identity", worst_cov <= zid, worst_cov, zid, "<=", false,
                             "largest |Cov(competitor, F_n(t)) - Var F_n(t)| in standard errors, Bonferroni over the "
                             "t grid"});

  // Perturbed laws: the density ratio must be nonnegative and integrate to one.
  double min_ratio = std::numeric_limits<double>::infinity(), worst_mass = 0.0;
  const std::size_t ne = std::max<std::size_t>(eo.epsilon_points, 2);
  const double span = 40.0 * std::sqrt(f.variance);
  for (double t : t_grid) {
    const double ftt = f.cdf(t);
    for (std::size_t e = 0; e < ne; ++e) {
      const double eps = static_cast<double>(e) / static_cast<double>(ne - 1);
      auto ratio = [&](double x) { return 1.0 - eps * ((x <= t ? 1.0 : 0.0) - ftt); };
      for (int i = -200; i <= 200; ++i) min_ratio = std::min(min_ratio, ratio(t + span * i / 200.0));
      auto dens = [&](double x) { return ratio(x) * f.density(x); };
      const double mass = numerics::integrate(dens, t - span, t, 1e-12) + numerics::integrate(dens, t, t + span, 1e-12);
      worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
    }
  }
  report.verdicts.push_back({"perturbation_density", min_ratio >= 0.0 && worst_mass <= 1e-6, min_ratio, 0.0, ">=",
                             false, "smallest density ratio dF_eps/dF over eps in [0,1]; largest |mass - 1| = " +
                                        format_double(worst_mass)});
  return report;
}

}  // namespace semieff::diagnostics
