#pragma once

#include <vector>

#include "hda/single_opt.hpp"
#include "hda/types.hpp"

namespace hda {

struct MultiOptConfig {
  double tolerance = 1e-6;        // outer ED tolerance, scaled by the total variance
  double initial_penalty = 1.0;   // e~
  double penalty_decay = 0.1;     // C, in (0, 1)
  double penalty_floor = 1e-10;   // keep shrinking e until it is at most this
  int max_penalty_rounds = 60;
  int max_inner_iters = 20000;
  double inner_gradient_tolerance = 1e-11;
  int max_rounds = 50;            // intra/inter alternation cap
  SingleOptConfig single;

  void validate() const;
};

/// Fixed per-vector (R, alpha) pair used while resources move between vectors.
struct RateSplit {
  double rate = 0.0;
  double alpha = 0.0;
};

/// Approximate total expected distortion for fractional per-vector
/// resources (the slack problem objective).
double slack_objective(const std::vector<double>& power, const std::vector<double>& channel_uses,
                       const std::vector<RateSplit>& splits, const SourceSpec& source,
                       const ChannelSpec& channel);

/// Gradient of slack_objective with respect to (P_1..P_m) and (K_1..K_m).
struct SlackGradient {
  std::vector<double> power;
  std::vector<double> channel_uses;
};

SlackGradient slack_gradient(const std::vector<double>& power,
                             const std::vector<double>& channel_uses,
                             const std::vector<RateSplit>& splits, const SourceSpec& source,
                             const ChannelSpec& channel);

/// Log-barrier penalty function ED - e * sum_u ln(-g_u) over the 2m + 2
/// constraints sum K <= K, sum P <= P, K_i > L, P_i > 0. Throws
/// InfeasibleError when the point is not strictly interior.
double penalty_objective(const std::vector<double>& power, const std::vector<double>& channel_uses,
                         double penalty, const std::vector<RateSplit>& splits,
                         const SourceSpec& source, const ChannelSpec& channel);

/// Gradient of penalty_objective with respect to (P_1..P_m) and (K_1..K_m).
SlackGradient penalty_gradient(const std::vector<double>& power,
                               const std::vector<double>& channel_uses, double penalty,
                               const std::vector<RateSplit>& splits, const SourceSpec& source,
                               const ChannelSpec& channel);

struct SlackSolution {
  std::vector<double> power;
  std::vector<double> channel_uses;
  double expected_distortion = 0.0;
  double kkt_residual = 0.0;  // projected gradient norm in budget-normalized units
  std::vector<double> penalties;
  std::vector<double> trace;  // ED after each penalty round
  int inner_iterations = 0;
};

/// Interior-point (sequential barrier) solution of the relaxed resource
/// problem for fixed per-vector (R, alpha), started from the equal split.
SlackSolution solve_slack_barrier(const SourceSpec& source, const ChannelSpec& channel,
                                  const std::vector<RateSplit>& splits,
                                  const MultiOptConfig& cfg = {});

/// First-order KKT residual of the relaxed problem at (power, channel_uses).
double slack_kkt_residual(const std::vector<double>& power,
                          const std::vector<double>& channel_uses,
                          const std::vector<RateSplit>& splits, const SourceSpec& source,
                          const ChannelSpec& channel);

/// 2 ln^2 2 * 2^x x^2 (2^x - 1) - [(2^x - 1) - 2^x x ln 2]^2.
double upsilon(double x);

/// Determinant of the (P_i, K_i) Hessian of the approximate per-vector
/// distortion with (R_i, alpha_i) held fixed. Zero for R = 0, where the
/// distortion does not depend on K_i.
double convexity_certificate(const OperatingPoint& point, const LinkSetup& link, double variance);

/// Floors fractional bandwidths (lifting any K_i <= L to L + 1), then spends
/// the residual one channel use at a time on the candidate in
/// {1} U {n : K_n < K_{n-1}} that lowers total ED the most.
std::vector<long> round_and_greedy(const std::vector<double>& fractional_uses,
                                   const std::vector<double>& power,
                                   const std::vector<RateSplit>& splits, const SourceSpec& source,
                                   const ChannelSpec& channel);

struct MultiOptResult {
  std::vector<double> power;
  std::vector<long> channel_uses;
  std::vector<RateSplit> splits;
  std::vector<double> vector_distortion;
  double expected_distortion = 0.0;
  std::vector<double> trace;        // total ED after each alternation round
  std::vector<double> inter_trace;  // total ED after each inter-component stage
  bool converged = false;
  int rounds = 0;

  Allocation allocation() const;
};

/// Alternates inter-component resource allocation (barrier + rounding +
/// greedy) with per-vector BCD until the total ED settles.
MultiOptResult two_stage_optimize(const SourceSpec& source, const ChannelSpec& channel,
                                  const MultiOptConfig& cfg = {});

/// Equal split of power and channel uses with a common (R, alpha); leftover
/// channel uses go to the lowest indices.
Allocation equal_resource_allocation(const SourceSpec& source, const ChannelSpec& channel,
                                     RateSplit split);

}  // namespace hda
