#include <iostream>

#include <CLI11.hpp>

#include "semieff/cli.hpp"

namespace {

void add_run_overrides(CLI::App* cmd, std::string& config, semieff::cli::RunOverrides& o) {
  cmd->add_option("--config", config, "experiment config (JSON)")->required();
  cmd->add_option("--seed", o.seed, "override the master seed");
  cmd->add_option("--reps", o.reps, "override the replication count");
  cmd->add_option("--n", o.n, "run a single sample size instead of n_grid");
  cmd->add_option("--out", o.out, "override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace semieff::cli;
  CLI::App app{"semieff: efficiency bounds and adaptive estimation diagnostics"};
  app.set_version_flag("--version", std::string(semieff::kToolkitVersion));
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list-models", "list the named models");

  BoundArgs b;
  auto* bound = app.add_subcommand("bound", "tabulate a spread lower bound K^{-1}(u)");
  bound->add_option("--family", b.family, "score | uniform | vanzwet | trig")->capture_default_str();
  bound->add_option("--score", b.score, "score law for --family score: normal | laplace | logistic");
  bound->add_option("--var", b.var, "variance (information) of a normal score");
  bound->add_option("--scale", b.scale, "scale of a Laplace or logistic error law")->capture_default_str();
  bound->add_option("--es2", b.es2, "second moment E S^2 for vanzwet and trig");
  bound->add_option("--eabs", b.eabs, "absolute moment E|S| for uniform");
  bound->add_option("--grid-step", b.step, "spacing of the u grid")->capture_default_str();
  bound->add_option("--tol", b.tol, "quadrature tolerance")->capture_default_str();
  bound->add_option("--seed", b.seed, "seed for empirical score laws")->capture_default_str();
  bound->add_option("--out", b.out, "output CSV (default stdout)");

  std::string est_config, check_config;
  RunOverrides est_o, check_o;
  auto* estimate = app.add_subcommand("estimate", "Monte Carlo replications of a configured estimator");
  add_run_overrides(estimate, est_config, est_o);
  auto* check = app.add_subcommand("check", "run the configured diagnostics and write a report");
  add_run_overrides(check, check_config, check_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  if (list->parsed()) return cmd_list_models(std::cout);
  if (bound->parsed()) return cmd_bound(b, std::cout, std::cerr);
  if (estimate->parsed()) return cmd_estimate(est_config, est_o, std::cout, std::cerr);
  if (check->parsed()) return cmd_check(check_config, check_o, std::cout, std::cerr);
  return kConfigError;
}
