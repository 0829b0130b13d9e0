#include "hda/single_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hda {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

double objective(const VectorBudget& budget, double variance, double rate, double alpha) {
  if (rate > 0.0 && alpha <= 0.0) return kInfinity;
  return expected_distortion_approx(budget.at(rate, alpha), budget.link(), variance).total;
}

void validate_budget(const VectorBudget& budget) {
  validate_point(budget.at(0.0, 0.0), budget.link());
}

}  // namespace

void SingleOptConfig::validate() const {
  if (!(tolerance > 0.0)) throw ValidationError("SingleOptConfig: tolerance must be positive");
  if (!(step > 0.0)) throw ValidationError("SingleOptConfig: step must be positive");
  if (!(gradient_tolerance > 0.0)) {
    throw ValidationError("SingleOptConfig: gradient_tolerance must be positive");
  }
  if (max_outer_iters < 1 || max_inner_iters < 1) {
    throw ValidationError("SingleOptConfig: iteration caps must be >= 1");
  }
  if (!(rate_ceiling > 0.0)) throw ValidationError("SingleOptConfig: rate ceiling must be positive");
  if (!(initial_alpha >= 0.0 && initial_alpha <= 1.0)) {
    throw ValidationError("SingleOptConfig: initial alpha must lie in [0, 1]");
  }
  if (!(initial_rate >= 0.0 && initial_rate <= rate_ceiling)) {
    throw ValidationError("SingleOptConfig: initial rate must lie in [0, R_th]");
  }
}

double optimal_rate_closed_form(double alpha, const VectorBudget& budget, double rate_ceiling) {
  validate_budget(budget);
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValidationError("optimal_rate_closed_form: alpha must lie in [0, 1]");
  }
  if (alpha == 0.0) return 0.0;
  const double samples = static_cast<double>(budget.samples);
  const double digital_uses = budget.channel_uses - samples;
  const double analog_snr = (1.0 - alpha) * budget.power / (samples * budget.noise_power);
  const double argument = 2.0 * kEcsqLoss * budget.power * alpha /
                          (budget.noise_power * samples) * psi(analog_snr);
  if (argument <= 1.0) return 0.0;
  const double rate = digital_uses / (budget.channel_uses + digital_uses) * std::log2(argument);
  return std::min(rate, rate_ceiling);
}

double power_gradient(double alpha, double rate, const VectorBudget& budget, double variance) {
  validate_budget(budget);
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ValidationError("power_gradient: alpha must lie in (0, 1]");
  }
  if (!(rate > 0.0)) throw ValidationError("power_gradient: rate must be positive");
  const auto state = derive_link(budget.at(rate, alpha), budget.link());
  const double samples = static_cast<double>(budget.samples);
  const double analog_gain = budget.power / (samples * budget.noise_power);
  const double digital_gain = budget.power / (state.digital_uses * budget.noise_power);
  const double error_variance = quantizer_error_variance(rate, variance);
  // The analog SNR falls as alpha grows, so the MMSE term rises.
  const double slope = state.analog_snr > 0.0 ? psi_derivative(state.analog_snr) : -1.0;
  const double analog_part = -analog_gain * error_variance * slope;
  const double digital_part = -std::expm1(state.channel_rate * std::log(2.0)) * digital_gain *
                              variance / (state.digital_snr * state.digital_snr);
  return analog_part + digital_part;
}

double optimize_power(double rate, const VectorBudget& budget, double variance,
                      const SingleOptConfig& cfg, double start) {
  validate_budget(budget);
  if (!(rate >= 0.0)) throw ValidationError("optimize_power: rate must be >= 0");
  if (rate == 0.0) return 0.0;

  double alpha = (start > 0.0 && start <= 1.0) ? start : cfg.initial_alpha;
  if (!(alpha > 0.0)) alpha = 0.5;
  double value = objective(budget, variance, rate, alpha);
  double gradient = power_gradient(alpha, rate, budget, variance);
  const double grad_tol = cfg.gradient_tolerance * variance;
  double trial_step = cfg.step;

  for (int j = 0; j < cfg.max_inner_iters; ++j) {
    const double projected = (alpha >= 1.0 && gradient < 0.0) ? 0.0 : gradient;
    if (std::abs(projected) <= grad_tol) return alpha;

    double step = trial_step;
    double candidate = alpha;
    double candidate_value = value;
    bool accepted = false;
    while (step > 1e-300) {
      candidate = std::clamp(alpha - step * gradient, 0.0, 1.0);
      candidate_value = objective(budget, variance, rate, candidate);
      // Armijo condition along the projected path.
      if (candidate_value <= value + 1e-4 * gradient * (candidate - alpha)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || candidate == alpha) return alpha;  // numerically stationary

    const double candidate_gradient = power_gradient(candidate, rate, budget, variance);
    // Secant (Barzilai-Borwein) estimate of the inverse curvature seeds the
    // next trial step; fall back to the configured step.
    const double s = candidate - alpha;
    const double y = candidate_gradient - gradient;
    trial_step = (s * y > 0.0) ? s / y : cfg.step;

    alpha = candidate;
    value = candidate_value;
    gradient = candidate_gradient;
  }
  throw ConvergenceError("optimize_power: exceeded " + std::to_string(cfg.max_inner_iters) +
                         " iterations");
}

SingleOptResult bcd_joint_allocate(const VectorBudget& budget, double variance,
                                   const SingleOptConfig& cfg) {
  cfg.validate();
  validate_budget(budget);
  if (!(variance > 0.0)) throw ValidationError("bcd_joint_allocate: variance must be positive");

  SingleOptResult result;
  double rate = cfg.initial_rate;
  double alpha = cfg.initial_alpha;
  if (rate > 0.0 && alpha > 0.0) result.trace.push_back(objective(budget, variance, rate, alpha));

  double previous = kInfinity;
  for (int t = 1; t <= cfg.max_outer_iters; ++t) {
    result.iterations = t;
    rate = optimal_rate_closed_form(alpha, budget, cfg.rate_ceiling);
    if (rate == 0.0) {
      alpha = 0.0;
    } else {
      alpha = optimize_power(rate, budget, variance, cfg, alpha);
    }
    const double value = objective(budget, variance, rate, alpha);
    result.trace.push_back(value);
    if (std::abs(previous - value) <= cfg.tolerance * variance) {
      result.converged = true;
      break;
    }
    previous = value;
  }
  result.rate = rate;
  result.alpha = alpha;
  result.expected_distortion = result.trace.back();

  if (cfg.analog_fallback && rate > 0.0) {
    // The low-outage objective overstates the hybrid distortion, so the two
    // candidates are compared on the exact model.
    const double analog = objective(budget, variance, 0.0, 0.0);
    const double hybrid_exact =
        expected_distortion_exact(budget.at(rate, alpha), budget.link(), variance).total;
    if (analog < hybrid_exact) {
      result.rate = 0.0;
      result.alpha = 0.0;
      result.expected_distortion = analog;
      result.trace.push_back(analog);
      result.used_analog_fallback = true;
    }
  }
  return result;
}

GridOptimum mesh_grid_oracle(const VectorBudget& budget, double variance,
                             const std::vector<double>& grid_rate,
                             const std::vector<double>& grid_alpha, bool exact) {
  validate_budget(budget);
  if (grid_rate.empty() || grid_alpha.empty()) {
    throw ValidationError("mesh_grid_oracle: grids must be nonempty");
  }
  GridOptimum best{0.0, 0.0, kInfinity};
  for (double r : grid_rate) {
    for (double a : grid_alpha) {
      if (r > 0.0 && a <= 0.0) continue;
      const auto point = budget.at(r, a);
      const double value = exact ? expected_distortion_exact(point, budget.link(), variance).total
                                 : expected_distortion_approx(point, budget.link(), variance).total;
      if (value < best.expected_distortion) best = {r, a, value};
    }
  }
  if (!std::isfinite(best.expected_distortion)) {
    throw InfeasibleError("mesh_grid_oracle: no feasible grid point");
  }
  return best;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {lo};
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  grid.back() = hi;
  return grid;
}

}  // namespace hda
