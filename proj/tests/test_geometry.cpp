#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "semieff/geometry.hpp"

using namespace semieff;
using namespace semieff::geometry;
using models::vec;

namespace {

Matrix mat2(double a, double b, double c, double d) { return (Matrix(2, 2) << a, b, c, d).finished(); }

Matrix random_spd(std::mt19937_64& gen, int k) {
  std::normal_distribution<double> nd;
  Matrix r(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) r(i, j) = nd(gen);
  return r * r.transpose() + 0.05 * Matrix::Identity(k, k);
}

// Fisher information of a bivariate normal in (mu1, mu2, s11, s12, s22):
// Sigma^{-1} for the means and 1/2 tr(S^{-1} dS_a S^{-1} dS_b) for the
// covariance entries; the two blocks are orthogonal.
Matrix bivariate_normal_fisher(const Matrix& sigma) {
  const Matrix inv = sigma.inverse();
  std::vector<Matrix> d{mat2(1, 0, 0, 0), mat2(0, 1, 1, 0), mat2(0, 0, 0, 1)};
  Matrix f = Matrix::Zero(5, 5);
  f.topLeftCorner(2, 2) = inv;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) f(2 + a, 2 + b) = 0.5 * (inv * d[a] * inv * d[b]).trace();
  return f;
}

const models::CovariateLaw kCoxLaw = models::normal_covariate_with_moments(1.0, 2.0);

}  // namespace

TEST(Partition, SpecExamples) {
  EXPECT_NEAR(partition(mat2(2, 1, 1, 1), 1).i11_2(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(partition(mat2(1, 0, 0, 2), 1).i11_2(0, 0), 1.0, 0);
  const auto p = partition(Matrix::Identity(3, 3), 2);
  EXPECT_TRUE(p.i11_2.isApprox(Matrix::Identity(2, 2)));
  EXPECT_THROW(partition(mat2(1, 2, 2, 1), 1), SingularMatrixError);
  EXPECT_THROW(partition(Matrix::Identity(2, 2), 2), DomainError);
  EXPECT_THROW(partition(Matrix::Identity(2, 2), 0), DomainError);
}

TEST(Partition, BlockInverseIdentityOnRandomSpd) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + trial % 5;
    const int m = 1 + trial % (k - 1);
    const Matrix a = random_spd(gen, k);
    const auto p = partition(a, static_cast<std::size_t>(m));
    EXPECT_LT((p.i21 - p.i12.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(numerics::is_spd(p.i11_2));
    EXPECT_LT((p.block_inverse() * a - Matrix::Identity(k, k)).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
    EXPECT_GE(numerics::min_eigenvalue(information_loss(p)), -1e-9 * information_loss(p).norm() - 1e-12);
    EXPECT_GE(information_loss_ratio(p), 1.0 - 1e-12);
  }
}

TEST(EfficientScore, CoxClosedForm) {
  const auto model = models::cox_parametric_model(kCoxLaw);
  for (const Vector& theta : {vec({0.0, 1.0}), vec({0.3, 2.0})}) {
    const auto p = partition(model.fisher(theta), 1);
    const auto [s1, s2] = split_score(model, 1);
    const auto eff = efficient_score(s1, s2, p);
    for (double y : {0.1, 0.7, 2.5}) {
      for (double z : {-1.0, 0.5, 2.0}) {
        models::Obs x;
        x.y = y;
        x.z[0] = z;
        const double closed = (z - 1.0) * (1.0 - std::exp(z * theta[0]) * theta[1] * y);
        EXPECT_NEAR(eff(x, theta)[0], closed, 1e-12);
      }
    }
  }
}

TEST(EfficientScore, OrthogonalCaseIsTheScore) {
  const auto model = models::normal_model();
  const Vector theta = vec({0.5, 2.0});
  const auto p = partition(model.fisher(theta), 1);
  const auto [s1, s2] = split_score(model, 1);
  const auto eff = efficient_score(s1, s2, p);
  models::Obs x{1.7, {}};
  EXPECT_EQ(eff(x, theta)[0], s1(x, theta)[0]);
}

TEST(EfficientScore, CoxMonteCarloIdentities) {
  const auto model = models::cox_parametric_model(kCoxLaw);
  const Vector theta = vec({0.0, 1.0});
  const auto p = partition(model.fisher(theta), 1);
  const auto [s1, s2] = split_score(model, 1);
  const auto eff = efficient_score(s1, s2, p);
  numerics::RngStream rng(8, 0);
  const auto xs = model.sample(theta, 100000, rng);
  const auto orth = cross_moments(eff, s2, xs, theta);
  EXPECT_NEAR(orth.second(0, 0), 0.0, 3 * orth.second_se(0, 0));
  const auto self = cross_moments(eff, eff, xs, theta);
  EXPECT_NEAR(self.second(0, 0), 1.0, 3 * self.second_se(0, 0));  // Var Z
  EXPECT_NEAR(self.mean[0], 0.0, 3 * self.mean_se[0]);

  // E (l~_1 - I11^{-1} l_1) l_1^T = 0.
  const auto full = influence_full(s1, s2, p);
  const auto restricted = influence_restricted(s1, p);
  ObsFn diff = [&](const models::Obs& x, const Vector& t) { return Vector(full(x, t) - restricted(x, t)); };
  const auto proj = cross_moments(diff, s1, xs, theta);
  EXPECT_NEAR(proj.second(0, 0), 0.0, 3 * proj.second_se(0, 0));
}

TEST(Influence, CoxRestrictedAndFullBounds) {
  const auto model = models::cox_parametric_model(kCoxLaw);
  const Vector theta = vec({0.0, 1.0});
  const auto p = partition(model.fisher(theta), 1);
  const auto [s1, s2] = split_score(model, 1);
  const auto restricted = influence_restricted(s1, p);
  const auto full = influence_full(s1, s2, p);
  EXPECT_NEAR(restricted.bound(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(full.bound(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(information_loss(p)(0, 0), 0.5, 1e-14);
  EXPECT_EQ(to_string(restricted.label), "restricted");
  EXPECT_EQ(to_string(full.label), "full");

  models::Obs x;
  x.y = 0.4;
  x.z[0] = 1.3;
  EXPECT_NEAR(restricted(x, theta)[0], 0.5 * 1.3 * (1 - 0.4), 1e-15);

  for (const Vector& t : {vec({0.0, 1.0}), vec({0.4, 3.0})}) {
    const auto info = efficient_influence(model, 1, t);
    const auto pp = partition(model.fisher(t), 1);
    const auto ff = influence_full(s1, s2, pp);
    EXPECT_NEAR(info.bound(0, 0), ff.bound(0, 0), 1e-12);
    EXPECT_NEAR(info(x, t)[0], ff(x, t)[0], 1e-12);
  }

  numerics::RngStream rng(9, 0);
  const auto xs = model.sample(theta, 100000, rng);
  for (const auto* inf : {&restricted, &full}) {
    const auto mom = cross_moments(inf->eval, inf->eval, xs, theta);
    EXPECT_NEAR(mom.mean[0], 0.0, 3 * mom.mean_se[0]);
    EXPECT_NEAR(mom.second(0, 0), inf->bound(0, 0), 3 * mom.second_se(0, 0));
  }
}

TEST(Influence, CenteredCovariateMeansNoLoss) {
  const auto model = models::cox_parametric_model(models::normal_covariate_with_moments(0.0, 1.5));
  const auto p = partition(model.fisher(vec({0.2, 1.3})), 1);
  EXPECT_NEAR(information_loss(p)(0, 0), 0.0, 1e-14);
  EXPECT_NEAR(information_loss_ratio(p), 1.0, 1e-14);
}

TEST(Influence, NormalMeanWithKnownSigma) {
  const auto model = models::normal_model();
  const Vector theta = vec({0.3, 1.0});
  const auto p = partition(model.fisher(theta), 1);
  const auto [s1, s2] = split_score(model, 1);
  const auto r = influence_restricted(s1, p);
  EXPECT_NEAR(r(models::Obs{2.0, {}}, theta)[0], 1.7, 1e-15);
  const auto loc = models::location_model(models::logistic_family());
  const auto scalar = efficient_influence(loc, 1, vec({0.0}));
  EXPECT_NEAR(scalar(models::Obs{1.0, {}}, vec({0.0}))[0], 3.0 * std::tanh(0.5), 1e-14);
}

TEST(Influence, BivariateNormalMeanUnaffectedByCovarianceNuisance) {
  Matrix sigma = mat2(1.0, 0.4, 0.4, 2.0);
  const auto p = partition(bivariate_normal_fisher(sigma), 2);
  EXPECT_LT(information_loss(p).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(numerics::inverse_spd(p.i11_2).isApprox(sigma, 1e-12));
}

TEST(CorrelationBound, Examples) {
  EXPECT_EQ(correlation_bound(0.0), 1.0);
  EXPECT_NEAR(correlation_bound(0.6), 0.4096, 1e-15);
  EXPECT_THROW(correlation_bound(1.0), DomainError);
  EXPECT_THROW(correlation_bound(-1.5), DomainError);
}

TEST(CorrelationBound, SampleCorrelationAttainsIt) {
  // The bound is the (rho, rho) entry of the inverse information of the
  // bivariate normal in (mu1, mu2, s1, s2, rho) with unit variances.
  const double rho = 0.6;
  const int n = 2000, reps = 2000;
  std::vector<double> z(reps);
  for (int r = 0; r < reps; ++r) {
    numerics::RngStream rng(10, static_cast<std::uint64_t>(r));
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = rho * x[i] + std::sqrt(1 - rho * rho) * rng.normal();
    }
    const double c = numerics::covariance(x, y) / std::sqrt(numerics::variance(x) * numerics::variance(y));
    z[r] = std::sqrt(static_cast<double>(n)) * (c - rho);
  }
  EXPECT_NEAR(numerics::variance(z), correlation_bound(rho), 0.15 * correlation_bound(rho));
}

TEST(OptimalDirection, Examples) {
  const Vector e1 = Vector::Unit(2, 0);
  EXPECT_TRUE(optimal_direction_b(Matrix::Identity(2, 2), Matrix::Identity(2, 2), e1).isApprox(e1));
  Matrix qdot(1, 2);
  qdot << 1, 0;
  const Matrix info = mat2(2, 1, 1, 1);
  const Vector b = optimal_direction_b(info, qdot, Vector::Ones(1));
  EXPECT_NEAR(b[0], 1.0, 1e-14);
  EXPECT_NEAR(b[1], -1.0, 1e-14);
  const double best = direction_value(info, qdot, Vector::Ones(1), b);
  EXPECT_NEAR(best, 1.0, 1e-14);
  std::mt19937_64 gen(2);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 1000; ++i) {
    const Vector other = vec({nd(gen), nd(gen)});
    EXPECT_LE(direction_value(info, qdot, Vector::Ones(1), other), best + 1e-12);
  }
  EXPECT_THROW(optimal_direction_b(info, qdot, Vector::Zero(1)), DomainError);
  EXPECT_THROW(optimal_direction_b(mat2(1, 1, 1, 1), qdot, Vector::Ones(1)), SingularMatrixError);
}

TEST(SymmetricLocation, InfluenceAndBound) {
  const auto normal = semiparametric_influence_symmetric_location(models::normal_family());
  EXPECT_NEAR(normal(models::Obs{2.5, {}}, vec({1.0}))[0], 1.5, 1e-15);
  EXPECT_EQ(normal.bound(0, 0), 1.0);
  const auto laplace = semiparametric_influence_symmetric_location(models::laplace_family());
  EXPECT_EQ(laplace(models::Obs{2.5, {}}, vec({1.0}))[0], 1.0);
  EXPECT_EQ(laplace(models::Obs{-2.5, {}}, vec({1.0}))[0], -1.0);
  EXPECT_EQ(laplace.bound(0, 0), 1.0);
  const auto logistic = semiparametric_influence_symmetric_location(models::logistic_family());
  for (double t : {0.1, 0.8, 3.0}) {
    EXPECT_EQ(logistic(models::Obs{-t, {}}, vec({0.0}))[0], -logistic(models::Obs{t, {}}, vec({0.0}))[0]);
  }
  EXPECT_THROW(semiparametric_influence_symmetric_location(models::gumbel_family()), DomainError);
}

TEST(LinearRegression, AdaptiveInfluenceCovarianceIdentity) {
  const auto law = models::normal_covariates(vec({0.5, -0.3}), vec({1.0, 2.0}));
  const auto g = models::laplace_family();
  const auto inf = semiparametric_influence_regression(g, law);
  const auto model = models::linear_regression_model(g, law);
  const Vector theta = vec({1.0, 2.0});
  numerics::RngStream rng(11, 0);
  const auto xs = model.sample(theta, 100000, rng);
  const auto mom = cross_moments(inf.eval, inf.eval, xs, theta);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(mom.mean[i], 0.0, 3 * mom.mean_se[i]);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(mom.second(i, j), inf.bound(i, j), 3 * mom.second_se(i, j));
  }
}

TEST(BoundReport, JsonShape) {
  const auto model = models::cox_parametric_model(kCoxLaw);
  const auto report = bound_report(model, vec({0.0, 1.0}), 1).to_json();
  EXPECT_EQ(report["model"], "cox");
  EXPECT_DOUBLE_EQ(report["restricted_bound"][0][0].get<double>(), 0.5);
  EXPECT_NEAR(report["full_bound"][0][0].get<double>(), 1.0, 1e-14);
  EXPECT_NEAR(report["loss"][0][0].get<double>(), 0.5, 1e-14);
  EXPECT_EQ(report["theta"].size(), 2u);
}
