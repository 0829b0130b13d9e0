#pragma once

#include <vector>

namespace hda {

/// Exponential integral Ei(x) on the negative axis.
///
/// Uses the convergent power series for |x| <= 5 and a Lentz continued
/// fraction for E1 beyond. Absolute accuracy is better than 1e-10.
/// Throws ValidationError for x >= 0.
double exp_integral_ei(double x);

/// e^z E1(z) for z > 0, i.e. -e^z Ei(-z) without overflow for large z.
double scaled_exp_integral_e1(double z);

/// Fading-averaged normalized MMSE, Psi(x) = int_0^inf e^{-g} / (1 + g x) dg.
///
/// Evaluated through Psi(x) = (1/x) e^{1/x} E1(1/x); Psi(0) = 1.
double psi(double x);

/// dPsi/dx = -int_0^inf g e^{-g} / (1 + g x)^2 dg, always negative.
double psi_derivative(double x);

/// int_0^inf g^2 e^{-g} / (1 + g x)^3 dg, so that Psi''(x) = 2 * this.
double psi_curvature_integral(double x);

/// Log-uniform lookup table for Psi with monotone (Fritsch-Carlson) cubic
/// interpolation. Arguments outside the grid fall back to the closed form.
class PsiTable {
 public:
  static constexpr std::size_t kDefaultPoints = 4096;
  static constexpr double kDefaultMin = 1e-4;
  static constexpr double kDefaultMax = 1e4;

  PsiTable(std::size_t points = kDefaultPoints, double x_min = kDefaultMin,
           double x_max = kDefaultMax);

  double operator()(double x) const;

  const std::vector<double>& abscissae() const { return x_; }
  const std::vector<double>& values() const { return y_; }

  /// Process-wide default table, built on first use.
  static const PsiTable& shared();

 private:
  double log_min_;
  double log_step_;
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> slope_;  // dPsi/d(ln x) at the nodes
};

enum class PsiMethod { closed_form, table };

inline double psi(double x, PsiMethod method) {
  return method == PsiMethod::table ? PsiTable::shared()(x) : psi(x);
}

}  // namespace hda
