// Adaptive estimation of a symmetric location with the error density
// unknown: the four-way split estimator against the sample mean and median.

#include <cmath>
#include <cstdio>

#include "semieff/diagnostics.hpp"
#include "semieff/pipeline.hpp"
#include "semieff/registry.hpp"

using namespace semieff;

int main() {
  const std::size_t n = 4000, reps = 200;
  diagnostics::McOptions opts;
  opts.seed = 77;
  std::printf("%-10s %10s %10s %10s %10s\n", "errors", "bound", "mean", "median", "adaptive");
  for (const auto* g : {"normal", "laplace", "logistic"}) {
    registry::ModelParams params;
    params.error_variance = 1.0;
    const auto e = registry::make_model(std::string("location:") + g, params);
    std::printf("%-10s %10.4f", g, 1.0 / e.errors->fisher_location);
    for (const auto* prelim : {"mean", "median", "adaptive"}) {
      pipeline::PipelineConfig cfg;
      if (std::string(prelim) == "adaptive") {
        cfg.preliminary = "median";
        cfg.score = "kernel";
        cfg.splitting = "four-way";
      } else {
        cfg.preliminary = prelim;
        cfg.score = "none";
        cfg.discretize = false;
      }
      const auto est = pipeline::build_pipeline(e, cfg, e.theta0);
      const auto errs = diagnostics::replicate(reps, opts, 0, [&](std::size_t, numerics::RngStream& rng) {
        return diagnostics::scaled_error(est, e.model.sample(e.theta0, n, rng), e.theta0)[0];
      });
      std::printf(" %10.4f", numerics::variance(errs));
    }
    std::printf("\n");
  }
  return 0;
}
