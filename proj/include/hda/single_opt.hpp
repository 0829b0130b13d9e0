#pragma once

#include <vector>

#include "hda/model.hpp"
#include "hda/types.hpp"

namespace hda {

struct SingleOptConfig {
  double tolerance = 1e-8;         // on |ED(t) - ED(t-1)|, scaled by sigma^2
  double step = 0.1;               // initial gradient step, halved on backtracking
  double gradient_tolerance = 1e-9;  // projected-gradient stop, scaled by sigma^2
  int max_outer_iters = 200;
  int max_inner_iters = 10000;
  double rate_ceiling = kDefaultRateCeiling;
  double initial_rate = 1.0;
  double initial_alpha = 0.5;
  // After the alternating descent settles, compare against the R = 0
  // pure-analog design and keep whichever has the lower exact distortion.
  bool analog_fallback = true;

  void validate() const;
};

struct SingleOptResult {
  double rate = 0.0;
  double alpha = 0.0;
  double expected_distortion = 0.0;
  std::vector<double> trace;
  bool converged = false;
  int iterations = 0;
  bool used_analog_fallback = false;
};

/// Per-vector resource budget handed to the single-vector optimizer.
struct VectorBudget {
  double power = 0.0;
  double channel_uses = 0.0;
  std::size_t samples = 1;
  double noise_power = 1.0;

  LinkSetup link() const { return {samples, noise_power}; }
  OperatingPoint at(double rate, double alpha) const { return {rate, alpha, power, channel_uses}; }
};

/// Minimizer over R of the low-outage objective for fixed alpha and budget:
/// min([ K_d/(K + K_d) log2((pi e/3) (P alpha)/(sigma_w^2 L) Psi(gamma_a)) ]^+, R_th).
/// Returns 0 when alpha = 0 or when the log argument is at most 1.
double optimal_rate_closed_form(double alpha, const VectorBudget& budget, double rate_ceiling);

/// d ED_approx / d alpha at fixed R and budget (requires 0 < alpha < 1 or
/// alpha = 1, and R > 0).
double power_gradient(double alpha, double rate, const VectorBudget& budget, double variance);

/// Projected gradient descent with backtracking on alpha for fixed R.
/// Returns 0 for R = 0. `start` overrides cfg.initial_alpha when in (0, 1].
double optimize_power(double rate, const VectorBudget& budget, double variance,
                      const SingleOptConfig& cfg, double start = -1.0);

/// Alternating (block coordinate) descent over (R, alpha) for one vector.
SingleOptResult bcd_joint_allocate(const VectorBudget& budget, double variance,
                                   const SingleOptConfig& cfg = {});

struct GridOptimum {
  double rate = 0.0;
  double alpha = 0.0;
  double expected_distortion = 0.0;
};

/// Exhaustive search over grid_rate x grid_alpha using the exact (or the
/// approximate) expected distortion. Infeasible points (R > 0, alpha = 0)
/// are skipped.
GridOptimum mesh_grid_oracle(const VectorBudget& budget, double variance,
                             const std::vector<double>& grid_rate,
                             const std::vector<double>& grid_alpha, bool exact = true);

/// n evenly spaced values from lo to hi inclusive.
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

}  // namespace hda
