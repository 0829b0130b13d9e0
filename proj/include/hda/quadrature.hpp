#pragma once

#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace hda {

struct QuadratureSettings {
  double relative_tolerance = 1e-8;
  double absolute_floor = 1e-12;
  unsigned max_depth = 20;
};

/// Adaptive 15-point Gauss-Kronrod integral of f over [a, b].
template <class F>
double integrate(F&& f, double a, double b, const QuadratureSettings& settings = {}) {
  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, settings.max_depth, settings.relative_tolerance, &error, &l1);
  if (error > settings.absolute_floor && error > 10.0 * settings.relative_tolerance * l1) {
    // Retry with a deeper subdivision budget before accepting the result.
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, settings.max_depth + 10, settings.relative_tolerance, &error, &l1);
  }
  return value;
}

/// int_lower^inf e^{-g} h(g) dg, computed as e^{-lower} int_0^1 e^{-g(u)} h(lower + g(u)) g'(u) du
/// with g(u) = u / (1 - u).
template <class H>
double integrate_exponential_tail(H&& h, double lower, const QuadratureSettings& settings = {}) {
  auto mapped = [&](double u) {
    if (u >= 1.0) return 0.0;
    const double one_minus = 1.0 - u;
    const double g = u / one_minus;
    const double weight = std::exp(-g);
    if (weight == 0.0) return 0.0;
    return weight * h(lower + g) / (one_minus * one_minus);
  };
  return std::exp(-lower) * integrate(mapped, 0.0, 1.0, settings);
}

}  // namespace hda
