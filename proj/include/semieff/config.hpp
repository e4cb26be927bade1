#pragma once

// Experiment configuration: a strict JSON schema shared by the estimate and
// check subcommands. Unknown keys are rejected at every level, and
// to_json(from_json(j)) reproduces every field.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "semieff/diagnostics.hpp"
#include "semieff/io.hpp"
#include "semieff/pipeline.hpp"
#include "semieff/registry.hpp"

namespace semieff::config {

using nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSpec {
  std::string name;
  registry::ModelParams params;
  /// Overrides the registry default parameter value when set.
  std::optional<std::vector<double>> theta0;
};

struct DiagnosticSpec {
  /// lan | las | regularity | excess | ecdf
  std::string check;
  /// Local direction for lan and regularity; defaults to the first unit vector.
  std::vector<double> t;
  /// Direction for las; defaults to the first unit vector of the target.
  std::vector<double> a;
  bool expect_efficient = false;
  /// Information bound for the target, row-major square matrix; defaults to
  /// the leading block of I(theta0)^{-1}.
  std::optional<std::vector<std::vector<double>>> bound;
  /// ecdf: distribution family and the probability levels of the t grid.
  std::string family = "normal";
  std::vector<double> levels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

struct ExperimentConfig {
  std::string name;
  ModelSpec model;
  pipeline::PipelineConfig estimator;
  std::vector<DiagnosticSpec> diagnostics;
  std::vector<std::size_t> n_grid{1000};
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  /// Directory for output files.
  std::string output_dir = ".";
  diagnostics::Thresholds slack;
};

// ---------------------------------------------------------------------------
// Parsing helpers

namespace detail {

inline void require_object(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": missing or of the wrong type");
  }
}

template <class T>
void get_if(const json& j, const std::string& key, const std::string& where, T& out) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

inline double get_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.at(key).is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

inline void get_number_if(const json& j, const std::string& key, const std::string& where, double& out) {
  if (j.contains(key)) out = get_number(j, key, where);
}

inline std::vector<double> get_numbers(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_array()) throw ConfigError(where + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(where + "." + key + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::size_t get_count(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(where + "." + key + ": expected a nonnegative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Serialization

inline json to_json(const ModelSpec& m) {
  json j = {{"name", m.name},
            {"errors", m.params.errors},
            {"error_variance", nullptr},
            {"ez", m.params.ez},
            {"ez2", m.params.ez2},
            {"covariates", m.params.covariates},
            {"theta0", nullptr}};
  if (m.params.error_variance) j["error_variance"] = *m.params.error_variance;
  if (m.theta0) j["theta0"] = *m.theta0;
  return j;
}

inline json to_json(const pipeline::PipelineConfig& c) {
  return {{"preliminary", c.preliminary}, {"discretize", c.discretize}, {"splitting", c.splitting},
          {"score", c.score},             {"plan", c.plan},             {"mesh_c", c.mesh_c}};
}

inline json to_json(const DiagnosticSpec& d) {
  json j = {{"check", d.check},   {"t", d.t},           {"a", d.a},          {"expect_efficient", d.expect_efficient},
            {"bound", nullptr},   {"family", d.family}, {"levels", d.levels}};
  if (d.bound) j["bound"] = *d.bound;
  return j;
}

inline json to_json(const diagnostics::Thresholds& t) {
  return {{"lan_slack", t.lan_slack},       {"lan_zero", t.lan_zero},         {"spread_sigma", t.spread_sigma},
          {"equality_tol", t.equality_tol}, {"ks_alpha", t.ks_alpha},         {"excess_sigma", t.excess_sigma},
          {"ecdf_sigma", t.ecdf_sigma},     {"identity_alpha", t.identity_alpha}};
}

inline json to_json(const ExperimentConfig& c) {
  auto diags = json::array();
  for (const auto& d : c.diagnostics) diags.push_back(to_json(d));
  return {{"name", c.name},
          {"model", to_json(c.model)},
          {"estimator", to_json(c.estimator)},
          {"diagnostics", diags},
          {"n_grid", c.n_grid},
          {"reps", c.reps},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"slack", to_json(c.slack)}};
}

inline ModelSpec model_from_json(const json& j) {
  const std::string w = "model";
  detail::require_object(j, w, {"name", "errors", "error_variance", "ez", "ez2", "covariates", "theta0"});
  ModelSpec m;
  m.name = detail::get<std::string>(j, "name", w);
  detail::get_if(j, "errors", w, m.params.errors);
  if (j.contains("error_variance") && !j["error_variance"].is_null()) {
    m.params.error_variance = detail::get_number(j, "error_variance", w);
  }
  detail::get_number_if(j, "ez", w, m.params.ez);
  detail::get_number_if(j, "ez2", w, m.params.ez2);
  if (j.contains("covariates")) m.params.covariates = detail::get_count(j, "covariates", w);
  if (j.contains("theta0") && !j["theta0"].is_null()) m.theta0 = detail::get_numbers(j, "theta0", w);
  return m;
}

inline pipeline::PipelineConfig estimator_from_json(const json& j) {
  const std::string w = "estimator";
  detail::require_object(j, w, {"preliminary", "discretize", "splitting", "score", "plan", "mesh_c"});
  pipeline::PipelineConfig c;
  detail::get_if(j, "preliminary", w, c.preliminary);
  detail::get_if(j, "discretize", w, c.discretize);
  detail::get_if(j, "splitting", w, c.splitting);
  detail::get_if(j, "score", w, c.score);
  if (j.contains("plan")) {
    const auto p = detail::get_numbers(j, "plan", w);
    if (p.size() != 3) throw ConfigError("estimator.plan: expected three numbers [lambda, mu, nu]");
    c.plan = {p[0], p[1], p[2]};
  }
  detail::get_number_if(j, "mesh_c", w, c.mesh_c);
  return c;
}

inline DiagnosticSpec diagnostic_from_json(const json& j, std::size_t index) {
  const std::string w = "diagnostics[" + std::to_string(index) + "]";
  detail::require_object(j, w, {"check", "t", "a", "expect_efficient", "bound", "family", "levels"});
  DiagnosticSpec d;
  d.check = detail::get<std::string>(j, "check", w);
  static const std::set<std::string> checks{"lan", "las", "regularity", "excess", "ecdf"};
  if (!checks.count(d.check)) throw ConfigError(w + ".check: unknown check '" + d.check + "'");
  if (j.contains("t")) d.t = detail::get_numbers(j, "t", w);
  if (j.contains("a")) d.a = detail::get_numbers(j, "a", w);
  detail::get_if(j, "expect_efficient", w, d.expect_efficient);
  if (j.contains("bound") && !j["bound"].is_null()) {
    d.bound = detail::get<std::vector<std::vector<double>>>(j, "bound", w);
  }
  detail::get_if(j, "family", w, d.family);
  if (j.contains("levels")) d.levels = detail::get_numbers(j, "levels", w);
  return d;
}

inline diagnostics::Thresholds slack_from_json(const json& j) {
  const std::string w = "slack";
  detail::require_object(j, w,
                         {"lan_slack", "lan_zero", "spread_sigma", "equality_tol", "ks_alpha", "excess_sigma", "ecdf_sigma",
                          "identity_alpha"});
  diagnostics::Thresholds t;
  detail::get_number_if(j, "lan_slack", w, t.lan_slack);
  detail::get_number_if(j, "lan_zero", w, t.lan_zero);
  detail::get_number_if(j, "spread_sigma", w, t.spread_sigma);
  detail::get_number_if(j, "equality_tol", w, t.equality_tol);
  detail::get_number_if(j, "ks_alpha", w, t.ks_alpha);
  detail::get_number_if(j, "excess_sigma", w, t.excess_sigma);
  detail::get_number_if(j, "ecdf_sigma", w, t.ecdf_sigma);
  detail::get_number_if(j, "identity_alpha", w, t.identity_alpha);
  if (!(t.identity_alpha > 0.0 && t.identity_alpha < 1.0) || !(t.ks_alpha > 0.0 && t.ks_alpha < 1.0)) {
    throw ConfigError("slack: ks_alpha and identity_alpha must lie in (0, 1)");
  }
  return t;
}

inline ExperimentConfig from_json(const json& j) {
  const std::string w = "config";
  detail::require_object(j, w,
                         {"name", "model", "estimator", "diagnostics", "n_grid", "reps", "seed", "output_dir", "slack"});
  ExperimentConfig c;
  c.name = detail::get<std::string>(j, "name", w);
  if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos) {
    throw ConfigError("config.name: must be a nonempty file-name-safe string");
  }
  if (!j.contains("model")) throw ConfigError("config.model: missing");
  c.model = model_from_json(j["model"]);
  if (j.contains("estimator")) c.estimator = estimator_from_json(j["estimator"]);
  if (j.contains("diagnostics")) {
    if (!j["diagnostics"].is_array()) throw ConfigError("config.diagnostics: expected an array");
    for (std::size_t i = 0; i < j["diagnostics"].size(); ++i) {
      c.diagnostics.push_back(diagnostic_from_json(j["diagnostics"][i], i));
    }
  }
  if (j.contains("n_grid")) {
    if (!j["n_grid"].is_array() || j["n_grid"].empty()) throw ConfigError("config.n_grid: expected a nonempty array");
    c.n_grid.clear();
    for (const auto& v : j["n_grid"]) {
      if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) {
        throw ConfigError("config.n_grid: entries must be positive integers");
      }
      c.n_grid.push_back(v.get<std::size_t>());
    }
  }
  if (j.contains("reps")) c.reps = detail::get_count(j, "reps", w);
  if (c.reps == 0) throw ConfigError("config.reps: must be positive");
  if (j.contains("seed")) {
    const auto& v = j["seed"];
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError("config.seed: expected a nonnegative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  detail::get_if(j, "output_dir", w, c.output_dir);
  if (j.contains("slack")) c.slack = slack_from_json(j["slack"]);
  return c;
}

inline ExperimentConfig parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

/// FNV-1a of the canonical serialization, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) { return hex64(fnv1a64(to_json(c).dump())); }

inline registry::ModelEntry resolve_model(const ModelSpec& m) {
  try {
    auto e = registry::make_model(m.name, m.params);
    if (m.theta0) {
      models::Vector t(static_cast<Eigen::Index>(m.theta0->size()));
      for (std::size_t i = 0; i < m.theta0->size(); ++i) t[static_cast<Eigen::Index>(i)] = (*m.theta0)[i];
      e.model.require_domain(t);
      e.theta0 = t;
    }
    return e;
  } catch (const DomainError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

}  // namespace semieff::config
