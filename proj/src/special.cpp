#include "hda/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hda/types.hpp"

namespace hda {
namespace {

constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kSeriesCutoff = 5.0;
// Above this 1/x the divergent asymptotic series in x is accurate to
// machine precision and avoids cancellation in the derivative formulas.
constexpr double kAsymptoticCutoff = 40.0;

// -Ei(-z) = E1(z) = -gamma - ln z - sum_{k>=1} (-z)^k / (k k!)
double e1_series(double z) {
  double sum = 0.0;
  double term = 1.0;  // (-z)^k / k!
  for (int k = 1; k < 200; ++k) {
    term *= -z / k;
    const double add = term / k;
    sum += add;
    if (std::abs(add) < 1e-17 * std::abs(sum)) break;
  }
  return -kEulerGamma - std::log(z) - sum;
}

// e^z E1(z) by the modified Lentz algorithm, valid for z > 1.
double scaled_e1_continued_fraction(double z) {
  constexpr double tiny = 1e-300;
  double b = z + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h;
}

// sum_{k>=first} (-1)^k k! * weight(k) * x^(k - first), truncated at the
// smallest term.
template <class Weight>
double asymptotic_series(double x, int first, Weight weight) {
  double factorial = 1.0;
  for (int k = 2; k <= first; ++k) factorial *= k;
  double power = 1.0;
  double sum = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (int k = first; k < 200; ++k) {
    if (k > first) {
      factorial *= k;
      power *= x;
    }
    const double term = factorial * weight(k) * power;
    if (term > previous) break;
    sum += (k % 2 == 0 ? term : -term);
    if (term < 1e-18 * std::abs(sum)) break;
    previous = term;
  }
  return sum;
}

}  // namespace

double scaled_exp_integral_e1(double z) {
  if (!(z > 0.0)) throw ValidationError("scaled_exp_integral_e1: argument must be positive");
  if (z <= kSeriesCutoff) return std::exp(z) * e1_series(z);
  return scaled_e1_continued_fraction(z);
}

double exp_integral_ei(double x) {
  if (!(x < 0.0)) throw ValidationError("exp_integral_ei: only x < 0 is supported");
  const double z = -x;
  if (z <= kSeriesCutoff) return -e1_series(z);
  if (z > 745.0) return -0.0;
  return -scaled_e1_continued_fraction(z) * std::exp(-z);
}

double psi(double x) {
  if (!(x >= 0.0)) throw ValidationError("psi: argument must be nonnegative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double z = 1.0 / x;
  if (z > kAsymptoticCutoff) {
    return asymptotic_series(x, 0, [](int) { return 1.0; });
  }
  return z * scaled_exp_integral_e1(z);
}

double psi_derivative(double x) {
  if (!(x > 0.0)) throw ValidationError("psi_derivative: argument must be positive");
  const double z = 1.0 / x;
  if (z > kAsymptoticCutoff) {
    return asymptotic_series(x, 1, [](int k) { return static_cast<double>(k); });
  }
  // Psi = z S(z), S = e^z E1(z), dS/dz = S - 1/z.
  const double s = scaled_exp_integral_e1(z);
  return -z * z * ((1.0 + z) * s - 1.0);
}

double psi_curvature_integral(double x) {
  if (!(x >= 0.0)) throw ValidationError("psi_curvature_integral: argument must be nonnegative");
  if (x == 0.0) return 2.0;
  const double z = 1.0 / x;
  if (z > kAsymptoticCutoff) {
    return 0.5 * asymptotic_series(x, 2, [](int k) { return static_cast<double>(k) * (k - 1); });
  }
  const double s = scaled_exp_integral_e1(z);
  return 0.5 * z * z * z * ((z * z + 4.0 * z + 2.0) * s - (z + 3.0));
}

PsiTable::PsiTable(std::size_t points, double x_min, double x_max) {
  if (points < 3 || !(x_min > 0.0) || !(x_max > x_min)) {
    throw ValidationError("PsiTable: need >= 3 points on a positive increasing range");
  }
  log_min_ = std::log(x_min);
  log_step_ = (std::log(x_max) - log_min_) / static_cast<double>(points - 1);
  x_.resize(points);
  y_.resize(points);
  for (std::size_t i = 0; i < points; ++i) {
    x_[i] = std::exp(log_min_ + log_step_ * static_cast<double>(i));
    y_[i] = psi(x_[i]);
  }
  // Fritsch-Carlson slopes in u = ln x.
  std::vector<double> secant(points - 1);
  for (std::size_t i = 0; i + 1 < points; ++i) secant[i] = (y_[i + 1] - y_[i]) / log_step_;
  slope_.assign(points, 0.0);
  slope_.front() = secant.front();
  slope_.back() = secant.back();
  for (std::size_t i = 1; i + 1 < points; ++i) {
    if (secant[i - 1] * secant[i] <= 0.0) continue;
    slope_[i] = 2.0 / (1.0 / secant[i - 1] + 1.0 / secant[i]);
  }
}

double PsiTable::operator()(double x) const {
  if (!(x > x_.front()) || !(x < x_.back())) return psi(x);
  const double u = (std::log(x) - log_min_) / log_step_;
  const auto i = std::min(static_cast<std::size_t>(u), x_.size() - 2);
  const double t = u - static_cast<double>(i);
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  return h00 * y_[i] + h10 * log_step_ * slope_[i] + h01 * y_[i + 1] +
         h11 * log_step_ * slope_[i + 1];
}

const PsiTable& PsiTable::shared() {
  static const PsiTable table;
  return table;
}

}  // namespace hda
