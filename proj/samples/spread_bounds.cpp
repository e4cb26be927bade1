// Tabulates the spread lower bound K^{-1}(u) for several score laws with
// E S^2 = 1 and checks that each is dominated by the normal score bound.

#include <cstdio>
#include <vector>

#include "semieff/spread.hpp"

using namespace semieff;

int main() {
  const auto normal = spread::spread_bound_from_score(spread::normal_score(1.0), 1e-9);
  const auto logistic = spread::spread_bound_from_score(spread::logistic_score(1.0 / std::sqrt(3.0)), 1e-9);
  const auto vz = spread::van_zwet_bound(1.0);
  const auto trig = spread::trigonometric_bound(1.0);

  std::printf("%6s %12s %12s %12s %12s\n", "u", "normal", "logistic", "vanzwet", "trig");
  for (double u : {0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99}) {
    std::printf("%6.2f %12.6f %12.6f %12.6f %12.6f\n", u, normal(u), logistic(u), vz(u), trig(u));
  }

  std::vector<double> grid;
  for (int i = 1; i <= 99; ++i) grid.push_back(0.01 * i);
  const std::pair<const char*, const spread::SpreadBound*> others[] = {
      {"logistic", &logistic}, {"vanzwet", &vz}, {"trig", &trig}};
  for (const auto& [name, b] : others) {
    const auto cmp = spread::is_more_spread(normal.k_inverse, b->k_inverse, grid);
    std::printf("normal bound more spread than %s: %s\n", name, cmp.more_spread ? "yes" : "no");
  }
  return 0;
}
