#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "semieff/estimators.hpp"
#include "semieff/geometry.hpp"
#include "semieff/models.hpp"
#include "semieff/numerics/stats.hpp"
#include "semieff/pipeline.hpp"

using namespace semieff;
using namespace semieff::estimators;
using models::Obs;
using models::vec;

namespace {

std::vector<Obs> location_sample(const models::LocationFamily& g, double theta, std::size_t n,
                                 numerics::RngStream& rng) {
  std::vector<Obs> xs(n);
  for (auto& x : xs) x.y = theta + g.sample(rng);
  return xs;
}

std::vector<double> responses(std::span<const Obs> xs) {
  std::vector<double> y(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) y[i] = xs[i].y;
  return y;
}

double root_n(std::size_t n) { return std::sqrt(static_cast<double>(n)); }

// Relative band on a Monte Carlo variance.
void expect_variance_within(std::span<const double> z, double target, double rel, const std::string& what) {
  const double v = numerics::variance(z);
  EXPECT_NEAR(v / target, 1.0, rel) << what << ": variance " << v << " vs " << target;
}

ObsFn true_location_influence(const models::LocationFamily& g) {
  return geometry::semiparametric_influence_symmetric_location(g).eval;
}

}  // namespace

// ---------------------------------------------------------------------------
// M-estimator

TEST(MEstimator, SymmetricSampleGivesZero) {
  const std::vector<double> x{-1.0, 0.0, 1.0};
  EXPECT_NEAR(m_estimate(x), 0.0, 1e-12);
}

TEST(MEstimator, RootSolvesEstimatingEquation) {
  const std::vector<double> x{0.0, 0.0, 10.0};
  const double t = m_estimate(x);
  EXPECT_GT(t, 0.0);
  EXPECT_LT(t, 10.0);
  double s = 0.0;
  for (double v : x) s += std::tanh(v - t);
  EXPECT_LE(std::abs(s), 1e-10 * 3);
}

TEST(MEstimator, RejectsDegenerateInput) {
  EXPECT_THROW(m_estimate(std::vector<double>{}), EstimationError);
  EXPECT_THROW(m_estimate(std::vector<double>{1.0, NAN}), EstimationError);
  const Psi bad{[](double) { return 1.0; }, [](double) { return 0.0; }, "constant"};
  EXPECT_THROW(m_estimate(std::vector<double>{1.0, 2.0}, bad), EstimationError);
}

TEST(MEstimator, EquivariantUnderShift) {
  numerics::RngStream rng(21, 0);
  std::vector<double> x(301);
  for (double& v : x) v = rng.laplace();
  const double t = m_estimate(x);
  for (double& v : x) v += 3.25;
  EXPECT_NEAR(m_estimate(x), t + 3.25, 1e-9);
}

TEST(MEstimator, RootNCertificateOnLaplace) {
  const auto g = models::laplace_family();
  const auto est = m_estimator();
  double prev = INFINITY;
  for (std::size_t n : {200u, 800u, 3200u}) {
    std::vector<double> z(500);
    for (std::size_t r = 0; r < z.size(); ++r) {
      numerics::RngStream rng(22, r);
      const auto xs = location_sample(g, 0.7, n, rng);
      z[r] = std::abs(root_n(n) * (est(xs)[0] - 0.7));
    }
    const double q = numerics::quantile_of(z, 0.95);
    EXPECT_TRUE(std::isfinite(q));
    EXPECT_LE(q, prev * 1.10) << "n=" << n;
    prev = q;
  }
}

// ---------------------------------------------------------------------------
// Closed-form preliminaries

TEST(MomentsPreliminary, NormalIsMeanAndSd) {
  std::vector<Obs> xs(4);
  const double ys[] = {1.0, 2.0, 4.0, 5.0};
  for (int i = 0; i < 4; ++i) xs[i].y = ys[i];
  const Vector t = moments_preliminary("normal")(xs);
  EXPECT_DOUBLE_EQ(t[0], 3.0);
  EXPECT_NEAR(t[1], std::sqrt(10.0 / 3.0), 1e-14);
}

TEST(MomentsPreliminary, Ar1IsLeastSquares) {
  std::vector<Obs> xs(3);
  const double y[] = {1.0, 0.5, -0.25, 2.0};
  for (int t = 0; t < 3; ++t) {
    xs[t].z[0] = y[t];
    xs[t].y = y[t + 1];
  }
  const double num = 1.0 * 0.5 + 0.5 * -0.25 + -0.25 * 2.0;
  const double den = 1.0 + 0.25 + 0.0625;
  EXPECT_NEAR(moments_preliminary("ar1")(xs)[0], num / den, 1e-15);
}

TEST(MomentsPreliminary, UnsupportedTag) {
  EXPECT_THROW(moments_preliminary("garch"), DomainError);
  EXPECT_FALSE(moments_preliminary("cox").rate_certificate.empty());
}

TEST(MomentsPreliminary, CoxRootNCertificate) {
  const auto model = models::cox_parametric_model(models::normal_covariate_with_moments(1.0, 2.0));
  const Vector theta = vec({0.3, 1.5});
  const auto est = moments_preliminary("cox");
  double prev = INFINITY;
  for (std::size_t n : {200u, 800u, 3200u}) {
    std::vector<double> err(500), bias(500);
    for (std::size_t r = 0; r < err.size(); ++r) {
      numerics::RngStream rng(23, r);
      const Vector d = root_n(n) * (est(model.sample(theta, n, rng)) - theta);
      err[r] = d.norm();
      bias[r] = d[0];
    }
    const double q = numerics::quantile_of(err, 0.95);
    EXPECT_LE(q, prev * 1.10) << "n=" << n;
    prev = q;
    if (n == 3200u) {
      EXPECT_NEAR(numerics::mean(bias), 0.0, 4 * numerics::stderr_of_mean(bias));
    }
  }
}

// ---------------------------------------------------------------------------
// Discretization

TEST(Discretize, SpecExamples) {
  EXPECT_NEAR(discretize(vec({0.537}), 100)[0], 0.5, 1e-15);
  EXPECT_NEAR(discretize(vec({-0.05}), 100)[0], -0.1, 1e-15);
  EXPECT_NEAR(discretize(vec({0.05}), 100)[0], 0.1, 1e-15);
  EXPECT_THROW(discretize(vec({1.0}), 100, 0.0), DomainError);
}

TEST(Discretize, IdempotentAndWithinHalfStep) {
  numerics::RngStream rng(24, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 10 + static_cast<std::size_t>(rng.uniform() * 5000);
    const double c = 0.1 + 2.0 * rng.uniform();
    const Vector t = vec({rng.normal() * 3, rng.normal(), rng.normal() * 0.01});
    const Vector d = discretize(t, n, c);
    const double step = c / root_n(n);
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      EXPECT_LE(std::abs(d[i] - t[i]), 0.5 * step * (1 + 1e-12));
      EXPECT_NEAR(d[i] / step, std::round(d[i] / step), 1e-9);
    }
    EXPECT_TRUE(discretize(d, n, c).isApprox(d, 1e-14) || d.isZero());
  }
}

// ---------------------------------------------------------------------------
// One-step updates

TEST(OneStep, NormalLocationReturnsSampleMean) {
  const auto g = models::normal_family();
  const auto infl = geometry::efficient_influence(models::location_model(g), 1, vec({0.0}));
  for (std::size_t r = 0; r < 20; ++r) {
    numerics::RngStream rng(25, r);
    const auto xs = location_sample(g, 1.3, 57 + r, rng);
    const double xbar = numerics::mean(responses(xs));
    for (double start : {-4.0, 0.0, 1.3, 10.0}) {
      EXPECT_NEAR(one_step(vec({start}), xs, infl)[0], xbar, 1e-12);
    }
  }
}

TEST(OneStep, NormalBothParametersAtTruth) {
  const auto model = models::normal_model();
  const Vector theta = vec({0.5, 2.0});
  const auto infl = geometry::efficient_influence(model, 2, theta);
  const std::size_t n = 2000;
  std::vector<double> a(1000), b(1000);
  for (std::size_t r = 0; r < a.size(); ++r) {
    numerics::RngStream rng(26, r);
    const Vector d = root_n(n) * (one_step(theta, model.sample(theta, n, rng), infl) - theta);
    a[r] = d[0];
    b[r] = d[1];
  }
  EXPECT_NEAR(numerics::mean(a), 0.0, 3 * numerics::stderr_of_mean(a));
  EXPECT_NEAR(numerics::mean(b), 0.0, 3 * numerics::stderr_of_mean(b));
  const Matrix bound = numerics::inverse_spd(model.fisher(theta));
  EXPECT_NEAR(numerics::variance(a), bound(0, 0), 3 * numerics::stderr_of_variance(a));
  EXPECT_NEAR(numerics::variance(b), bound(1, 1), 3 * numerics::stderr_of_variance(b));
  EXPECT_NEAR(numerics::covariance(a, b), 0.0, 0.1 * std::sqrt(bound(0, 0) * bound(1, 1)));
}

TEST(OneStep, PartialInfluenceUpdatesLeadingCoordinates) {
  const ObsFn infl = [](const Obs& x, const Vector& t) { return vec({x.y - t[0]}); };
  std::vector<Obs> xs(2);
  xs[0].y = 1.0;
  xs[1].y = 3.0;
  const Vector out = one_step(vec({0.0, 7.0}), xs, infl);
  EXPECT_DOUBLE_EQ(out[0], 2.0);
  EXPECT_DOUBLE_EQ(out[1], 7.0);
}

TEST(OneStep, SingularFisherPropagates) {
  const auto model = models::normal_model();
  const ObsFn infl = [&](const Obs& x, const Vector& t) {
    return Vector(numerics::solve_spd(model.fisher(t), model.score(x, t)));
  };
  std::vector<Obs> xs(3);
  EXPECT_THROW(one_step(vec({0.0, 0.0}), xs, infl), DomainError);
  EXPECT_THROW(one_step(vec({0.0, 1.0}), std::vector<Obs>{}, infl), EstimationError);
}

TEST(OneStep, CoxFromDiscretizedPreliminaryIsEfficient) {
  const auto model = models::cox_parametric_model(models::normal_covariate_with_moments(1.0, 2.0));
  const Vector theta = vec({0.0, 1.0});
  const auto prelim = moments_preliminary("cox");
  const std::size_t n = 4000;
  std::vector<double> z(500);
  for (std::size_t r = 0; r < z.size(); ++r) {
    numerics::RngStream rng(27, r);
    const auto xs = model.sample(theta, n, rng);
    const Vector start = discretize(prelim(xs), n);
    const auto infl = geometry::efficient_influence(model, 1, start);
    z[r] = root_n(n) * (one_step(start, xs, infl)[0] - theta[0]);
  }
  expect_variance_within(z, 1.0, 0.15, "cox one-step");
}

// ---------------------------------------------------------------------------
// Two-way splitting

TEST(SplitOneStep, NormalLocationIsSampleMean) {
  const auto g = models::normal_family();
  const auto infl = true_location_influence(g);
  for (std::size_t r = 0; r < 10; ++r) {
    numerics::RngStream rng(28, r);
    const auto xs = location_sample(g, -0.4, 101 + 17 * r, rng);
    const double xbar = numerics::mean(responses(xs));
    for (double lam : {0.5, 0.3, 0.77}) {
      EXPECT_NEAR(split_one_step(xs, m_estimator(), infl, lam)[0], xbar, 1e-12);
      EXPECT_NEAR(split_one_step(xs, m_estimator(), infl, lam, 1.0)[0], xbar, 1e-12);
    }
  }
}

TEST(SplitOneStep, MatchesHandComputedCombination) {
  const ObsFn infl = [](const Obs& x, const Vector& t) { return vec({std::tanh(x.y - t[0])}); };
  const PreliminaryEstimator first_value{[](ObsSpan s) { return vec({s[0].y}); }, "first observation"};
  std::vector<Obs> xs(10);
  for (int i = 0; i < 10; ++i) xs[i].y = 0.1 * i * i;
  const double lam = 0.4;  // lambda_n = 4
  const double t1 = xs[0].y, t2 = xs[4].y;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < 4; ++i) s1 += std::tanh(xs[i].y - t2);
  for (int i = 4; i < 10; ++i) s2 += std::tanh(xs[i].y - t1);
  const double expected = 0.4 * (t2 + s1 / 4) + 0.6 * (t1 + s2 / 6);
  EXPECT_NEAR(split_one_step(xs, first_value, infl, lam)[0], expected, 1e-14);
}

TEST(SplitOneStep, Errors) {
  const auto infl = true_location_influence(models::normal_family());
  std::vector<Obs> small(9), ok(20);
  EXPECT_THROW(split_one_step(small, m_estimator(), infl), EstimationError);
  EXPECT_THROW(split_one_step(ok, m_estimator(), infl, 0.0), DomainError);
  EXPECT_THROW(split_one_step(ok, m_estimator(), infl, 1.0), DomainError);
  const PreliminaryEstimator failing{[](ObsSpan s) -> Vector {
                                       if (s[0].y > 0) throw DomainError("boom");
                                       return vec({0.0});
                                     },
                                     "fails on positive first value"};
  ok[10].y = 1.0;
  try {
    split_one_step(ok, failing, infl);
    FAIL() << "expected EstimationError";
  } catch (const EstimationError& e) {
    EXPECT_NE(std::string(e.what()).find("block 2"), std::string::npos) << e.what();
  }
}

TEST(SplitOneStep, DeterministicAndEfficientOnLaplace) {
  const auto g = models::laplace_family();
  const auto infl = true_location_influence(g);
  const std::size_t n = 4000;
  std::vector<double> z(500);
  for (std::size_t r = 0; r < z.size(); ++r) {
    numerics::RngStream rng(29, r);
    const auto xs = location_sample(g, 2.0, n, rng);
    const double est = split_one_step(xs, m_estimator(), infl, 0.5, 1.0)[0];
    if (r < 3) {
      EXPECT_EQ(est, split_one_step(xs, m_estimator(), infl, 0.5, 1.0)[0]);
    }
    z[r] = root_n(n) * (est - 2.0);
  }
  expect_variance_within(z, 1.0 / g.fisher_location, 0.15, "laplace split one-step");
}

TEST(SplitOneStep, DiscretizationChangesEstimateByOrderRootNInverse) {
  const auto g = models::laplace_family();
  const auto infl = true_location_influence(g);
  for (std::size_t n : {500u, 4000u}) {
    std::vector<double> d(200);
    for (std::size_t r = 0; r < d.size(); ++r) {
      numerics::RngStream rng(30, r);
      const auto xs = location_sample(g, 0.0, n, rng);
      d[r] = root_n(n) * std::abs(split_one_step(xs, m_estimator(), infl, 0.5, 1.0)[0] -
                                  split_one_step(xs, m_estimator(), infl, 0.5)[0]);
    }
    EXPECT_LE(numerics::median(d), 1.0 + 1.0) << "n=" << n;
  }
}

// ---------------------------------------------------------------------------
// Efficiency linearization and local uniformity

namespace {

// 0.9-quantile over replications of the norm of
// sqrt(n)(theta_hat - theta - mean influence(X_i; theta)).
double linearization_quantile(const models::ParametricModel& model, const Vector& truth,
                              const PreliminaryEstimator& prelim, std::size_t n, std::uint64_t seed) {
  const auto oracle = geometry::efficient_influence(model, model.dim_theta, truth);
  std::vector<double> res(500);
  for (std::size_t r = 0; r < res.size(); ++r) {
    numerics::RngStream rng(seed, r);
    const auto xs = model.sample(truth, n, rng);
    const Vector start = discretize(prelim(xs), n);
    const auto infl = geometry::efficient_influence(model, model.dim_theta, start);
    const Vector est = one_step(start, xs, infl);
    res[r] = (root_n(n) * (est - truth - mean_of(oracle.eval, xs, truth))).norm();
  }
  return numerics::quantile_of(res, 0.9);
}

}  // namespace

TEST(Linearization, RemainderShrinksForNormalAndCox) {
  struct Case {
    models::ParametricModel model;
    Vector theta;
    std::string tag;
  };
  const std::vector<Case> cases{
      {models::normal_model(), vec({0.5, 2.0}), "normal"},
      {models::cox_parametric_model(models::normal_covariate_with_moments(1.0, 2.0)), vec({0.0, 1.0}), "cox"}};
  for (const auto& c : cases) {
    std::vector<double> fixed, local;
    for (std::size_t n : {500u, 2000u, 8000u}) {
      fixed.push_back(linearization_quantile(c.model, c.theta, moments_preliminary(c.tag), n, 31));
      Vector moved = c.theta + Vector::Ones(c.theta.size()) / root_n(n);
      local.push_back(linearization_quantile(c.model, moved, moments_preliminary(c.tag), n, 32));
    }
    EXPECT_LT(fixed[1], fixed[0]) << c.tag;
    EXPECT_LT(fixed[2], fixed[1]) << c.tag;
    for (std::size_t i = 0; i < fixed.size(); ++i) {
      EXPECT_NEAR(local[i] / fixed[i], 1.0, 0.25) << c.tag << " grid point " << i;
    }
  }
}

// ---------------------------------------------------------------------------
// Kernel score estimator

TEST(KernelScore, FittedScoreIsExactlyOdd) {
  const auto g = models::laplace_family();
  numerics::RngStream rng(33, 0);
  const auto aux = location_sample(g, 1.5, 800, rng);
  const auto fitted = kernel_score_estimator().fit(aux, vec({1.5}));
  for (double t : {0.0, 0.01, 0.3, 1.0, 2.7, 6.0, 40.0}) {
    Obs up, down;
    up.y = 1.5 + t;
    down.y = 1.5 - t;
    EXPECT_EQ(fitted(up, vec({1.5}))[0], -fitted(down, vec({1.5}))[0]) << "t=" << t;
  }
}

TEST(KernelScore, ClampsLargeResiduals) {
  const auto g = models::laplace_family();
  numerics::RngStream rng(34, 0);
  const auto aux = location_sample(g, 0.0, 1000, rng);
  const auto fitted = kernel_score_estimator().fit(aux, vec({0.0}));
  const double a = fitted.truncation();
  const double sd = std::sqrt(numerics::variance(responses(aux)));
  EXPECT_NEAR(a, 2.0 * std::log(1000.0) / sd, 1e-12);
  EXPECT_EQ(fitted.location_score(1e6), a);
  EXPECT_EQ(fitted.location_score(-1e6), -a);
  for (double e = -30; e <= 30; e += 0.37) EXPECT_LE(std::abs(fitted.location_score(e)), a);
}

TEST(KernelScore, NormalizedByLeaveOneOutMeanSquaredScore) {
  const auto g = models::logistic_family();
  numerics::RngStream rng(35, 0);
  const auto aux = location_sample(g, 0.0, 600, rng);
  const auto fitted = kernel_score_estimator().fit(aux, vec({0.0}));
  std::vector<double> sq(aux.size());
  for (std::size_t i = 0; i < aux.size(); ++i) sq[i] = std::pow(fitted.location_score_excluding(aux[i].y, aux[i].y), 2);
  EXPECT_NEAR(fitted.information()(0, 0), numerics::mean(sq), 1e-12);
  Obs x;
  x.y = 0.8;
  EXPECT_NEAR(fitted(x, vec({0.0}))[0], fitted.location_score(0.8) / numerics::mean(sq), 1e-12);
  // Leaving a point out only matters near that point.
  EXPECT_NE(fitted.location_score_excluding(aux[0].y, aux[0].y), fitted.location_score(aux[0].y));
  EXPECT_NEAR(fitted.location_score_excluding(aux[0].y + 50.0, aux[0].y), fitted.location_score(aux[0].y + 50.0),
              1e-12);
}

TEST(KernelScore, InformationFactorsThroughWeights) {
  const auto g = models::normal_family();
  numerics::RngStream rng(43, 0);
  const auto path_aux = [&] {
    std::vector<Obs> xs(3000);
    for (auto& x : xs) {
      x.z[0] = 2.0 * rng.normal();
      x.y = 0.4 * x.z[0] + g.sample(rng);
    }
    return xs;
  }();
  const auto fitted = kernel_score_estimator(ar1_structure()).fit(path_aux, vec({0.4}));
  std::vector<double> w2(path_aux.size()), sq(path_aux.size());
  for (std::size_t i = 0; i < path_aux.size(); ++i) {
    const double e = path_aux[i].y - 0.4 * path_aux[i].z[0];
    w2[i] = path_aux[i].z[0] * path_aux[i].z[0];
    sq[i] = std::pow(fitted.location_score_excluding(e, e), 2);
  }
  EXPECT_NEAR(fitted.information()(0, 0), numerics::mean(w2) * numerics::mean(sq), 1e-9);
  EXPECT_NEAR(fitted.information()(0, 0), 4.0, 0.4);
}

TEST(KernelScore, DegenerateResiduals) {
  std::vector<Obs> aux(100);
  for (auto& x : aux) x.y = 2.0;
  EXPECT_THROW(kernel_score_estimator().fit(aux, vec({0.0})), EstimationError);
  EXPECT_THROW(kernel_score_estimator().fit(std::vector<Obs>(1), vec({0.0})), EstimationError);
}

TEST(KernelScore, ConsistencyOnLaplace) {
  const auto g = models::laplace_family();
  const auto truth = true_location_influence(g);
  const auto est = kernel_score_estimator();
  std::vector<double> medians;
  for (std::size_t n : {500u, 2000u, 8000u}) {
    std::vector<double> err(200);
    for (std::size_t r = 0; r < err.size(); ++r) {
      numerics::RngStream rng(36, r);
      const auto fitted = est.fit(location_sample(g, 0.0, n, rng), vec({0.0}));
      double acc = 0.0;
      const double dx = 0.01;
      Obs x;
      for (double e = -20.0; e <= 20.0; e += dx) {
        x.y = e;
        const double d = fitted(x, vec({0.0}))[0] - truth(x, vec({0.0}))[0];
        acc += d * d * g.density(e) * dx;
      }
      err[r] = std::sqrt(acc);
    }
    medians.push_back(numerics::median(err));
  }
  EXPECT_LT(medians[1], medians[0]);
  EXPECT_LT(medians[2], medians[1]);
}

TEST(KernelScore, RootNUnbiasednessDiagnostic) {
  const auto g = models::laplace_family();
  const auto est = kernel_score_estimator();
  const std::size_t n = 8000;
  std::vector<double> stat(200);
  for (std::size_t r = 0; r < stat.size(); ++r) {
    numerics::RngStream rng(37, r);
    const auto fitted = est.fit(location_sample(g, 0.0, n, rng), vec({0.0}));
    const auto fresh = location_sample(g, 0.0, n, rng);
    stat[r] = std::abs(root_n(n) * mean_of(fitted.as_function(), fresh, vec({0.0}))[0]);
  }
  EXPECT_LE(numerics::median(stat), 1.0);
}

TEST(KernelScore, SlopeNormalizerMatchesInformationForLocation) {
  const auto g = models::normal_family();
  numerics::RngStream rng(38, 0);
  const auto aux = location_sample(g, 0.0, 4000, rng);
  KernelRules rules;
  rules.normalizer = Normalizer::Slope;
  const auto fitted = kernel_score_estimator(location_structure(), rules).fit(aux, vec({0.0}));
  EXPECT_NEAR(fitted.information()(0, 0), 1.0, 0.1);
}

TEST(KernelScore, RegressionStructureRecoversWeights) {
  const auto law = models::normal_covariates(vec({1.0, 0.0}), vec({0.5, 1.0}));
  const auto model = models::linear_regression_model(models::logistic_family(), law);
  const Vector theta = vec({0.5, -1.0});
  numerics::RngStream rng(39, 0);
  const auto aux = model.sample(theta, 4000, rng);
  const auto fitted = kernel_score_estimator(regression_structure(2)).fit(aux, theta);
  const Matrix expected = models::logistic_family().fisher_location * law.second_moment;
  EXPECT_TRUE(fitted.information().isApprox(expected, 0.15)) << fitted.information();
}

// ---------------------------------------------------------------------------
// Four-way splitting

TEST(SplitPlan, BlocksAndValidation) {
  const SplitPlan plan;
  const auto c = plan.cuts(400);
  EXPECT_EQ(c[0], 100u);
  EXPECT_EQ(c[1], 200u);
  EXPECT_EQ(c[2], 300u);
  EXPECT_THROW((SplitPlan{0.5, 0.5, 0.75}.validate()), DomainError);
  EXPECT_THROW((SplitPlan{0.0, 0.5, 0.75}.validate()), DomainError);
  EXPECT_THROW((SplitPlan{0.25, 0.5, 1.0}.validate()), DomainError);
}

TEST(SemiparametricOneStep, BlockSizeErrorNamesBlock) {
  numerics::RngStream rng(40, 0);
  const auto xs = location_sample(models::normal_family(), 0.0, 400, rng);
  try {
    semiparametric_one_step(xs, m_estimator(), kernel_score_estimator(), SplitPlan{0.1, 0.5, 0.75});
    FAIL() << "expected EstimationError";
  } catch (const EstimationError& e) {
    EXPECT_NE(std::string(e.what()).find("block 1"), std::string::npos) << e.what();
  }
  try {
    semiparametric_one_step(xs, m_estimator(), kernel_score_estimator(), SplitPlan{0.25, 0.5, 0.9});
    FAIL() << "expected EstimationError";
  } catch (const EstimationError& e) {
    EXPECT_NE(std::string(e.what()).find("block 4"), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW(semiparametric_one_step(xs, m_estimator(), kernel_score_estimator()));
}

TEST(SemiparametricOneStep, MatchesHandAssembledCombination) {
  numerics::RngStream rng(41, 0);
  const auto xs = location_sample(models::logistic_family(), 0.3, 400, rng);
  const auto pre = m_estimator();
  const auto est = kernel_score_estimator();
  const std::span<const Obs> all(xs);
  const Vector t1 = pre(all.subspan(0, 100));
  const Vector t2 = pre(all.subspan(200, 100));
  const auto l1 = est.fit(all.subspan(100, 100), t1);
  const auto l2 = est.fit(all.subspan(300, 100), t2);
  double s_left = 0, s_right = 0;
  for (std::size_t i = 0; i < 200; ++i) s_left += l2(xs[i], t2)[0];
  for (std::size_t i = 200; i < 400; ++i) s_right += l1(xs[i], t1)[0];
  const double expected = 0.5 * (t2[0] + s_left / 200) + 0.5 * (t1[0] + s_right / 200);
  EXPECT_NEAR(semiparametric_one_step(xs, pre, est)[0], expected, 1e-12);
}

TEST(SemiparametricOneStep, AdaptiveForNormalAndLaplace) {
  const std::size_t n = 8000;
  for (const std::string name : {"normal", "laplace"}) {
    const auto g = models::family_by_name(name, 1.0);
    std::vector<double> z(500);
    for (std::size_t r = 0; r < z.size(); ++r) {
      numerics::RngStream rng(42, r);
      const auto xs = location_sample(g, -1.0, n, rng);
      z[r] = root_n(n) * (semiparametric_one_step(xs, m_estimator(), kernel_score_estimator(), {}, 1.0)[0] + 1.0);
    }
    expect_variance_within(z, 1.0 / g.fisher_location, 0.20, name);
  }
}

// ---------------------------------------------------------------------------
// Declarative pipelines

namespace {

registry::ModelParams params(std::string errors, std::size_t covariates) {
  registry::ModelParams p;
  p.errors = std::move(errors);
  p.covariates = covariates;
  return p;
}

pipeline::PipelineConfig config(std::string prelim, std::string score, std::string splitting, bool disc = false) {
  pipeline::PipelineConfig c;
  c.preliminary = std::move(prelim);
  c.score = std::move(score);
  c.splitting = std::move(splitting);
  c.discretize = disc;
  return c;
}

}  // namespace

TEST(Pipeline, NormalOneStepIsTheSampleMean) {
  const auto entry = registry::make_model("location:normal");
  const auto p = pipeline::build_pipeline(entry, config("moments", "exact", "none"), entry.theta0);
  numerics::RngStream rng(70, 0);
  const auto xs = entry.model.sample(vec({0.4}), 501, rng);
  std::vector<double> y;
  for (const auto& x : xs) y.push_back(x.y);
  EXPECT_NEAR(p(xs)[0], numerics::mean(y), 1e-12);
  EXPECT_EQ(p.output_dim, 1u);
}

TEST(Pipeline, PreliminaryOnlyVariants) {
  const auto entry = registry::make_model("location:laplace");
  numerics::RngStream rng(71, 0);
  const auto xs = entry.model.sample(vec({0.0}), 101, rng);
  std::vector<double> y;
  for (const auto& x : xs) y.push_back(x.y);
  const double mean = numerics::mean(y), med = numerics::median(y);
  auto run = [&](const std::string& name) {
    return pipeline::build_pipeline(entry, config(name, "none", "none"), vec({0.25}))(xs)[0];
  };
  EXPECT_DOUBLE_EQ(run("mean"), mean);
  EXPECT_DOUBLE_EQ(run("median"), med);
  EXPECT_DOUBLE_EQ(run("mean-median"), 0.5 * mean + 0.5 * med);
  EXPECT_DOUBLE_EQ(run("constant"), 0.25);
  EXPECT_DOUBLE_EQ(run("moments"), med);
  const auto disc = pipeline::build_pipeline(entry, config("mean", "none", "none", true), entry.theta0)(xs)[0];
  EXPECT_DOUBLE_EQ(disc, discretize(vec({mean}), 101)[0]);
}

TEST(Pipeline, CoxTargetsTheRegressionCoefficient) {
  const auto entry = registry::make_model("cox");
  const auto p = pipeline::build_pipeline(entry, config("moments", "exact", "two-way", true), entry.theta0);
  EXPECT_EQ(p.output_dim, 1u);
  numerics::RngStream rng(72, 0);
  const auto xs = entry.model.sample(entry.theta0, 2000, rng);
  EXPECT_NEAR(p(xs)[0], 0.0, 0.15);
  EXPECT_DOUBLE_EQ(p.target(vec({0.3, 2.0}))[0], 0.3);
}

TEST(Pipeline, KernelVariants) {
  numerics::RngStream rng(73, 0);
  const auto loc = registry::make_model("location:logistic");
  const auto p = pipeline::build_pipeline(loc, config("moments", "kernel", "four-way", true), loc.theta0);
  EXPECT_NEAR(p(loc.model.sample(vec({1.0}), 1000, rng))[0], 1.0, 0.3);
  const auto lin = registry::make_model("linreg", params("laplace", 2));
  const auto q = pipeline::build_pipeline(lin, config("moments", "kernel", "four-way", true), lin.theta0);
  const Vector est = q(lin.model.sample(lin.theta0, 2000, rng));
  ASSERT_EQ(est.size(), 2);
  EXPECT_NEAR(est[0], 1.0, 0.15);
  EXPECT_NEAR(est[1], 1.0, 0.15);
  const auto ar = registry::make_model("ar1");
  for (const std::string split : {"two-way", "four-way"}) {
    const auto r = pipeline::build_pipeline(ar, config("moments", "kernel", split, true), ar.theta0);
    EXPECT_NEAR(r(ar.model.sample(ar.theta0, 2000, rng))[0], 0.5, 0.1) << split;
  }
}

TEST(Pipeline, RejectsInconsistentConfigs) {
  const auto loc = registry::make_model("location:normal");
  const auto cox = registry::make_model("cox");
  const auto exs = registry::make_model("expshift");
  auto build = [](const registry::ModelEntry& e, pipeline::PipelineConfig c) {
    return pipeline::build_pipeline(e, c, e.theta0);
  };
  EXPECT_THROW(build(loc, config("moments", "kernel", "none")), DomainError);
  EXPECT_THROW(build(loc, config("moments", "exact", "four-way")), DomainError);
  EXPECT_THROW(build(loc, config("moments", "none", "two-way")), DomainError);
  EXPECT_THROW(build(loc, config("bogus", "none", "none")), DomainError);
  EXPECT_THROW(build(loc, config("moments", "bogus", "none")), DomainError);
  EXPECT_THROW(build(loc, config("moments", "exact", "three-way")), DomainError);
  EXPECT_THROW(build(cox, config("moments", "kernel", "four-way")), DomainError);
  EXPECT_THROW(build(cox, config("median", "exact", "none")), DomainError);
  EXPECT_THROW(build(exs, config("mean", "exact", "none")), DomainError);
  auto bad_plan = config("moments", "kernel", "four-way");
  bad_plan.plan = {0.5, 0.4, 0.75};
  EXPECT_THROW(build(loc, bad_plan), DomainError);
  auto bad_mesh = config("moments", "exact", "none", true);
  bad_mesh.mesh_c = 0.0;
  EXPECT_THROW(build(loc, bad_mesh), DomainError);
  EXPECT_NO_THROW(build(exs, config("mean", "none", "none")));
}
