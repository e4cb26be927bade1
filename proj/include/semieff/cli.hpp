#pragma once

// Subcommand implementations behind the semieff executable. Each returns
// the process exit code: 0 success or all checks pass, 1 a diagnostic
// failed, 2 configuration error, 3 runtime error.

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "semieff/config.hpp"
#include "semieff/diagnostics.hpp"
#include "semieff/numerics/parallel.hpp"
#include "semieff/pipeline.hpp"
#include "semieff/registry.hpp"
#include "semieff/spread.hpp"

namespace semieff::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kConfigError = 2, kRuntimeError = 3 };

// ---------------------------------------------------------------------------
// list-models

inline int cmd_list_models(std::ostream& out) {
  for (const auto& name : registry::model_names()) out << name << "\t" << registry::model_summary(name) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// bound

struct BoundArgs {
  /// score | uniform | vanzwet | trig
  std::string family = "score";
  /// normal | laplace | logistic, for family score.
  std::string score;
  /// E S^2 of a normal score.
  std::optional<double> var;
  /// Scale of the Laplace or logistic error law.
  double scale = 1.0;
  std::optional<double> es2;
  std::optional<double> eabs;
  double step = 0.005;
  double tol = 1e-9;
  std::uint64_t seed = 20240601;
  std::string out;
};

inline std::string canonical(const BoundArgs& a) {
  nlohmann::json j = {{"family", a.family}, {"score", a.score}, {"scale", a.scale}, {"step", a.step},
                      {"tol", a.tol},       {"seed", a.seed}};
  j["var"] = a.var ? nlohmann::json(*a.var) : nlohmann::json(nullptr);
  j["es2"] = a.es2 ? nlohmann::json(*a.es2) : nlohmann::json(nullptr);
  j["eabs"] = a.eabs ? nlohmann::json(*a.eabs) : nlohmann::json(nullptr);
  return j.dump();
}

inline spread::SpreadBound make_bound(const BoundArgs& a) {
  if (a.family == "score") {
    spread::ScoreStatistic s;
    if (a.score == "normal") {
      if (!a.var) throw config::ConfigError("bound: --score normal needs --var");
      s = spread::normal_score(*a.var);
    } else if (a.score == "laplace") {
      s = spread::laplace_score(a.scale);
    } else if (a.score == "logistic") {
      s = spread::logistic_score(a.scale);
    } else {
      throw config::ConfigError("bound: --score must be normal, laplace or logistic");
    }
    spread::ScoreBoundOptions opts;
    opts.seed = a.seed;
    return spread::spread_bound_from_score(s, a.tol, opts);
  }
  if (a.family == "uniform") {
    if (!a.eabs) throw config::ConfigError("bound: --family uniform needs --eabs");
    return spread::uniform_bound(*a.eabs);
  }
  if (a.family == "vanzwet" || a.family == "trig") {
    if (!a.es2) throw config::ConfigError("bound: --family " + a.family + " needs --es2");
    return a.family == "vanzwet" ? spread::van_zwet_bound(*a.es2) : spread::trigonometric_bound(*a.es2);
  }
  throw config::ConfigError("bound: --family must be score, uniform, vanzwet or trig");
}

inline int cmd_bound(const BoundArgs& a, std::ostream& out, std::ostream& err) {
  spread::SpreadBound bound;
  std::vector<double> grid;
  try {
    if (!(a.step > 0.0 && a.step < 0.5)) throw config::ConfigError("bound: --step must lie in (0, 0.5)");
    bound = make_bound(a);
    grid = spread::default_grid(a.step);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  std::vector<std::string> header{"config_hash: " + hex64(fnv1a64(canonical(a))), "seed: " + std::to_string(a.seed),
                                  "toolkit_version: " + std::string(kToolkitVersion)};
  if (bound.k_inverse.support_hint) {
    header.push_back("support: " + format_double(bound.k_inverse.support_hint->first) + ", " +
                     format_double(bound.k_inverse.support_hint->second));
  }
  try {
    if (a.out.empty()) {
      spread::write_bound_csv(out, bound, grid, header);
    } else {
      auto f = open_output(a.out);
      spread::write_bound_csv(f, bound, grid, header);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// estimate and check

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::size_t> n;
  std::optional<std::string> out;
};

inline config::ExperimentConfig load_config(const std::string& path, const RunOverrides& o) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config::ConfigError("cannot read config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  auto c = config::parse(buf.str());
  if (o.seed) c.seed = *o.seed;
  if (o.reps) {
    if (*o.reps == 0) throw config::ConfigError("--reps must be positive");
    c.reps = *o.reps;
  }
  if (o.n) {
    if (*o.n == 0) throw config::ConfigError("--n must be positive");
    c.n_grid = {*o.n};
  }
  if (o.out) c.output_dir = *o.out;
  return c;
}

inline std::vector<std::string> header_lines(const config::ExperimentConfig& c) {
  return {"experiment: " + c.name, "config_hash: " + config::config_hash(c), "seed: " + std::to_string(c.seed),
          "toolkit_version: " + std::string(kToolkitVersion)};
}

inline std::string output_path(const config::ExperimentConfig& c, const std::string& suffix) {
  std::filesystem::create_directories(c.output_dir);
  return (std::filesystem::path(c.output_dir) / (c.name + suffix)).string();
}

inline pipeline::Pipeline build(const registry::ModelEntry& e, const config::ExperimentConfig& c) {
  try {
    return pipeline::build_pipeline(e, c.estimator, e.theta0);
  } catch (const DomainError& ex) {
    throw config::ConfigError(std::string("estimator: ") + ex.what());
  } catch (const NotRegularError& ex) {
    throw config::ConfigError(std::string("estimator: ") + ex.what());
  }
}

inline diagnostics::McOptions mc_options(const config::ExperimentConfig& c) {
  diagnostics::McOptions o;
  o.seed = c.seed;
  o.workers = numerics::worker_count_from_env();
  o.experiment_id = c.name;
  o.thresholds = c.slack;
  return o;
}

template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const config::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ReplicationError& e) {
    err << "runtime error in replication " << e.index() << ": " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

/// Runs the pipeline over reps samples drawn at theta0 for each n and writes
/// <name>.estimates.csv (one row per replication) and <name>.summary.csv.
inline int cmd_estimate(const std::string& config_path, const RunOverrides& o, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto c = load_config(config_path, o);
    const auto entry = config::resolve_model(c.model);
    const auto est = build(entry, c);
    const auto opts = mc_options(c);
    const auto d = static_cast<Eigen::Index>(est.output_dim);
    std::optional<models::Matrix> bound;
    try {
      bound = diagnostics::default_bound(entry.model, entry.theta0, est.output_dim);
    } catch (const NotRegularError&) {
    }
    const models::Vector target = est.target(entry.theta0);
    std::ostringstream est_csv, sum_csv;
    CsvWriter ecsv(est_csv), scsv(sum_csv);
    for (const auto& line : header_lines(c)) {
      ecsv.comment(line);
      scsv.comment(line);
    }
    ecsv.comment("pipeline: " + est.label);
    scsv.comment("pipeline: " + est.label);
    std::vector<std::string> ehead{"n", "rep"};
    for (Eigen::Index j = 0; j < d; ++j) ehead.push_back("estimate_" + std::to_string(j));
    ecsv.row(ehead);
    scsv.row(std::vector<std::string>{"n", "coord", "reps", "target", "mean", "variance", "scaled_variance", "bound",
                                      "scaled_variance_over_bound"});
    for (std::size_t g = 0; g < c.n_grid.size(); ++g) {
      const std::size_t n = c.n_grid[g];
      const auto values = diagnostics::replicate(c.reps, opts, g, [&](std::size_t, numerics::RngStream& rng) {
        return est(entry.model.sample(entry.theta0, n, rng));
      });
      for (std::size_t r = 0; r < values.size(); ++r) {
        std::vector<std::string> row{std::to_string(n), std::to_string(r)};
        for (Eigen::Index j = 0; j < d; ++j) row.push_back(format_double(values[r][j]));
        ecsv.row(row);
      }
      for (Eigen::Index j = 0; j < d; ++j) {
        std::vector<double> col(values.size()), sq(values.size());
        for (std::size_t r = 0; r < values.size(); ++r) {
          col[r] = values[r][j];
          const double z = std::sqrt(static_cast<double>(n)) * (values[r][j] - target[j]);
          sq[r] = z * z;
        }
        const double mean = numerics::mean(col);
        const double var = col.size() > 1 ? numerics::variance(col) : 0.0;
        const double scaled = numerics::mean(sq);
        const double b = bound ? (*bound)(j, j) : std::numeric_limits<double>::quiet_NaN();
        scsv.row(std::vector<std::string>{std::to_string(n), std::to_string(j), std::to_string(c.reps),
                                          format_double(target[j]), format_double(mean), format_double(var),
                                          format_double(scaled), bound ? format_double(b) : "",
                                          bound ? format_double(scaled / b) : ""});
        log << "n=" << n << " coord=" << j << " mean=" << format_double(mean) << " variance=" << format_double(var)
            << " n*MSE=" << format_double(scaled);
        if (bound) log << " bound=" << format_double(b) << " ratio=" << format_double(scaled / b);
        log << "\n";
      }
    }
    {
      auto f = open_output(output_path(c, ".estimates.csv"));
      f << est_csv.str();
    }
    {
      auto f = open_output(output_path(c, ".summary.csv"));
      f << sum_csv.str();
    }
    return static_cast<int>(kOk);
  });
}

namespace detail {

inline models::Vector to_vector(const std::vector<double>& v) {
  models::Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

inline models::Vector unit_or(const std::vector<double>& v, std::size_t dim) {
  if (!v.empty()) return to_vector(v);
  models::Vector e = models::Vector::Zero(static_cast<Eigen::Index>(dim));
  e[0] = 1.0;
  return e;
}

inline std::optional<models::Matrix> to_matrix(const std::optional<std::vector<std::vector<double>>>& m) {
  if (!m) return std::nullopt;
  const auto k = static_cast<Eigen::Index>(m->size());
  models::Matrix out(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& row = (*m)[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != k) throw config::ConfigError("diagnostics bound: must be square");
    for (Eigen::Index j = 0; j < k; ++j) out(i, j) = row[static_cast<std::size_t>(j)];
  }
  return out;
}

}  // namespace detail

/// Runs every listed diagnostic and writes <name>.report.json and
/// <name>.report.csv. lan runs once over n_grid; the others run at each n.
inline diagnostics::McReport run_checks(const config::ExperimentConfig& c) {
  const auto entry = config::resolve_model(c.model);
  const auto opts = mc_options(c);
  diagnostics::McReport report = diagnostics::new_report(c.name, opts);
  report.header = {{"experiment", c.name},
                   {"config_hash", config::config_hash(c)},
                   {"seed", std::to_string(c.seed)},
                   {"toolkit_version", std::string(kToolkitVersion)}};
  std::optional<pipeline::Pipeline> est;
  auto estimator = [&]() -> const pipeline::Pipeline& {
    if (!est) est = build(entry, c);
    return *est;
  };
  const auto& model = entry.model;
  for (std::size_t i = 0; i < c.diagnostics.size(); ++i) {
    const auto& d = c.diagnostics[i];
    auto precondition = [&](auto&& fn) {
      try {
        return fn();
      } catch (const DomainError& e) {
        throw config::ConfigError("diagnostics[" + std::to_string(i) + "] (" + d.check + "): " + e.what());
      } catch (const NotRegularError& e) {
        throw config::ConfigError("diagnostics[" + std::to_string(i) + "] (" + d.check + "): " + e.what());
      }
    };
    if (d.check == "lan") {
      const auto t = detail::unit_or(d.t, model.dim_theta);
      report.merge(precondition([&] { return diagnostics::lan_check(model, entry.theta0, t, c.n_grid, c.reps, opts); }));
      continue;
    }
    for (std::size_t n : c.n_grid) {
      if (d.check == "las") {
        diagnostics::LasOptions las;
        las.bound = detail::to_matrix(d.bound);
        las.expect_efficient = d.expect_efficient;
        const auto& p = estimator();
        const auto a = detail::unit_or(d.a, p.output_dim);
        report.merge(precondition(
            [&] { return diagnostics::las_spread_check(model, p, entry.theta0, a, n, c.reps, opts, las); }));
      } else if (d.check == "regularity") {
        const auto& p = estimator();
        const auto t = detail::unit_or(d.t, model.dim_theta);
        report.merge(
            precondition([&] { return diagnostics::regularity_check(model, p, entry.theta0, t, n, c.reps, opts); }));
      } else if (d.check == "excess") {
        const auto& p = estimator();
        const auto b = detail::to_matrix(d.bound);
        report.merge(
            precondition([&] { return diagnostics::excess_variance(model, p, entry.theta0, n, c.reps, opts, b); }));
      } else if (d.check == "ecdf") {
        report.merge(precondition([&] {
          const auto f = models::family_by_name(d.family);
          std::vector<double> t;
          for (double u : d.levels) t.push_back(diagnostics::family_quantile(f, u));
          return diagnostics::ecdf_cramer_rao_check(f, t, n, c.reps, opts);
        }));
      }
    }
  }
  return report;
}

inline int cmd_check(const std::string& config_path, const RunOverrides& o, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto c = load_config(config_path, o);
    const auto report = run_checks(c);
    {
      auto f = open_output(output_path(c, ".report.json"));
      f << report.to_json_text();
    }
    {
      auto f = open_output(output_path(c, ".report.csv"));
      report.write_csv(f);
    }
    for (const auto& v : report.verdicts) {
      log << (v.pass ? "PASS" : (v.informational ? "INFO" : "FAIL")) << "  " << v.check << "  margin "
          << format_double(v.margin) << " " << v.rule << " " << format_double(v.threshold) << "  (" << v.detail
          << ")\n";
    }
    return static_cast<int>(report.all_pass() ? kOk : kCheckFailed);
  });
}

}  // namespace semieff::cli
