#pragma once

// Umbrella header.

#include "semieff/errors.hpp"
#include "semieff/io.hpp"
#include "semieff/numerics/integrate.hpp"
#include "semieff/numerics/linalg.hpp"
#include "semieff/numerics/parallel.hpp"
#include "semieff/numerics/quantile.hpp"
#include "semieff/numerics/rng.hpp"
#include "semieff/numerics/stats.hpp"
#include "semieff/spread.hpp"
#include "semieff/models.hpp"
#include "semieff/geometry.hpp"
#include "semieff/estimators.hpp"
#include "semieff/timeseries.hpp"
#include "semieff/registry.hpp"
#include "semieff/pipeline.hpp"
#include "semieff/diagnostics.hpp"
#include "semieff/config.hpp"
