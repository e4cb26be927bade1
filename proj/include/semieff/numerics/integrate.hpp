#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature.
//
// The interval with the largest error estimate is bisected until the summed
// estimate drops below abs_tol. Integrable endpoint singularities are handled
// without special casing: the error concentrates in the interval touching the
// singular endpoint, so that interval keeps getting split toward it. The
// 15-point rule never evaluates the integrand at an interval endpoint.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include "semieff/errors.hpp"

namespace semieff::numerics {

struct QuadratureResult {
  double value;
  double error;
  std::size_t intervals;
};

namespace detail {

struct GkSegment {
  double a, b, value, error;
  bool operator<(const GkSegment& other) const { return error < other.error; }
};

template <class F>
GkSegment gauss_kronrod15(F& f, double a, double b) {
  static constexpr std::array<double, 8> xgk{
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr std::array<double, 8> wgk{
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> wg{
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * wgk[7];
  double gauss = fc * wg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * xgk[j];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += wgk[j] * pair;
    if (j % 2 == 1) gauss += wg[j / 2] * pair;
  }
  kronrod *= half;
  gauss *= half;
  double err = std::abs(kronrod - gauss);
  if (!std::isfinite(kronrod)) err = std::numeric_limits<double>::infinity();
  return {a, b, kronrod, err};
}

}  // namespace detail

/// Adaptive quadrature with a full result record. Throws NumericError when the
/// subdivision budget is exhausted before reaching abs_tol.
template <class F>
QuadratureResult integrate_detailed(F&& f, double a, double b, double abs_tol, std::size_t max_intervals = 4000) {
  if (!(a < b)) {
    if (a == b) return {0.0, 0.0, 0};
    throw DomainError("integrate: requires a < b");
  }
  if (!(abs_tol > 0.0)) throw DomainError("integrate: abs_tol must be positive");

  std::priority_queue<detail::GkSegment> heap;
  const auto first = detail::gauss_kronrod15(f, a, b);
  heap.push(first);
  double total = first.value;
  double total_err = first.error;

  while (total_err > abs_tol) {
    if (heap.size() >= max_intervals) {
      throw NumericError("integrate: subdivision budget exhausted", total, total_err);
    }
    const auto worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      throw NumericError("integrate: interval cannot be subdivided further", total, total_err);
    }
    heap.pop();
    const auto left = detail::gauss_kronrod15(f, worst.a, mid);
    const auto right = detail::gauss_kronrod15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    // Running sums drift; resum occasionally.
    if (heap.size() % 64 == 0) {
      auto copy = heap;
      total = 0.0;
      total_err = 0.0;
      while (!copy.empty()) {
        total += copy.top().value;
        total_err += copy.top().error;
        copy.pop();
      }
    }
  }
  if (!std::isfinite(total)) throw NumericError("integrate: non-finite result", total, total_err);
  return {total, total_err, heap.size()};
}

template <class F>
double integrate(F&& f, double a, double b, double abs_tol) {
  return integrate_detailed(std::forward<F>(f), a, b, abs_tol).value;
}

}  // namespace semieff::numerics
