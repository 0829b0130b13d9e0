#include "hda/multi_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace hda {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();
constexpr double kLn2 = 0.69314718055994530942;

void check_sizes(std::size_t m, const std::vector<double>& power,
                 const std::vector<double>& channel_uses, const std::vector<RateSplit>& splits) {
  if (power.size() != m || channel_uses.size() != m || splits.size() != m) {
    throw ValidationError("resource vectors must have one entry per source vector");
  }
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Per-vector approximate ED with fractional channel uses.
double vector_objective(double power, double channel_uses, const RateSplit& split,
                        const LinkSetup& link, double variance) {
  return expected_distortion_approx({split.rate, split.alpha, power, channel_uses}, link, variance)
      .total;
}

struct Slacks {
  double bandwidth = 0.0;  // K - sum K_i
  double power = 0.0;      // P - sum P_i
  bool interior = false;
};

Slacks slacks(const std::vector<double>& power, const std::vector<double>& channel_uses,
              const SourceSpec& source, const ChannelSpec& channel) {
  Slacks s;
  s.bandwidth = static_cast<double>(channel.total_channel_uses()) - sum(channel_uses);
  s.power = channel.power_budget() - sum(power);
  s.interior = s.bandwidth > 0.0 && s.power > 0.0;
  const double samples = static_cast<double>(source.samples());
  for (std::size_t i = 0; i < power.size(); ++i) {
    s.interior = s.interior && power[i] > 0.0 && channel_uses[i] > samples;
  }
  return s;
}

// Barrier objective in budget-normalized coordinates x = (P_i / P, K_i / K).
class BarrierProblem {
 public:
  BarrierProblem(const SourceSpec& source, const ChannelSpec& channel,
                 const std::vector<RateSplit>& splits)
      : source_(source), channel_(channel), splits_(splits), m_(source.count()) {}

  std::size_t dimension() const { return 2 * m_; }

  void unpack(const std::vector<double>& x, std::vector<double>& power,
              std::vector<double>& uses) const {
    power.resize(m_);
    uses.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      power[i] = x[i] * channel_.power_budget();
      uses[i] = x[m_ + i] * static_cast<double>(channel_.total_channel_uses());
    }
  }

  double value(const std::vector<double>& x, double penalty) const {
    std::vector<double> p, k;
    unpack(x, p, k);
    if (!slacks(p, k, source_, channel_).interior) return kInfinity;
    return penalty_objective(p, k, penalty, splits_, source_, channel_);
  }

  std::vector<double> gradient(const std::vector<double>& x, double penalty) const {
    std::vector<double> p, k;
    unpack(x, p, k);
    const auto g = penalty_gradient(p, k, penalty, splits_, source_, channel_);
    const double big_p = channel_.power_budget();
    const double big_k = static_cast<double>(channel_.total_channel_uses());
    std::vector<double> out(2 * m_);
    for (std::size_t i = 0; i < m_; ++i) {
      out[i] = g.power[i] * big_p;
      out[m_ + i] = g.channel_uses[i] * big_k;
    }
    return out;
  }

 private:
  const SourceSpec& source_;
  const ChannelSpec& channel_;
  const std::vector<RateSplit>& splits_;
  std::size_t m_;
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Gradient descent with Armijo backtracking; the trial step is the
// Barzilai-Borwein estimate from the previous iteration.
int minimize_barrier(const BarrierProblem& problem, double penalty, std::vector<double>& x,
                     const MultiOptConfig& cfg, double scale) {
  double value = problem.value(x, penalty);
  auto gradient = problem.gradient(x, penalty);
  double trial_step = 1e-3;
  std::vector<double> candidate(x.size());
  int stalled = 0;
  for (int it = 0; it < cfg.max_inner_iters; ++it) {
    const double norm2 = dot(gradient, gradient);
    if (std::sqrt(norm2) <= cfg.inner_gradient_tolerance * scale) return it;

    double step = trial_step;
    double candidate_value = kInfinity;
    bool accepted = false;
    for (int bt = 0; bt < 200; ++bt) {
      for (std::size_t i = 0; i < x.size(); ++i) candidate[i] = x[i] - step * gradient[i];
      candidate_value = problem.value(candidate, penalty);
      if (candidate_value <= value - 1e-4 * step * norm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return it;

    const auto candidate_gradient = problem.gradient(candidate, penalty);
    double ss = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double s = candidate[i] - x[i];
      const double y = candidate_gradient[i] - gradient[i];
      ss += s * s;
      sy += s * y;
    }
    trial_step = sy > 0.0 ? ss / sy : 2.0 * step;

    const double decrease = value - candidate_value;
    x = candidate;
    gradient = candidate_gradient;
    value = candidate_value;
    stalled = decrease <= 1e-16 * std::max(1.0, std::abs(value)) ? stalled + 1 : 0;
    if (stalled >= 20) return it;
  }
  return cfg.max_inner_iters;
}

}  // namespace

void MultiOptConfig::validate() const {
  if (!(tolerance > 0.0)) throw ValidationError("MultiOptConfig: tolerance must be positive");
  if (!(initial_penalty > 0.0)) {
    throw ValidationError("MultiOptConfig: initial penalty factor must be positive");
  }
  if (!(penalty_decay > 0.0 && penalty_decay < 1.0)) {
    throw ValidationError("MultiOptConfig: penalty decay C must lie in (0, 1)");
  }
  if (!(penalty_floor > 0.0)) throw ValidationError("MultiOptConfig: penalty floor must be > 0");
  if (max_penalty_rounds < 1 || max_inner_iters < 1 || max_rounds < 1) {
    throw ValidationError("MultiOptConfig: iteration caps must be >= 1");
  }
  single.validate();
}

double slack_objective(const std::vector<double>& power, const std::vector<double>& channel_uses,
                       const std::vector<RateSplit>& splits, const SourceSpec& source,
                       const ChannelSpec& channel) {
  check_sizes(source.count(), power, channel_uses, splits);
  const LinkSetup link{source.samples(), channel.noise_power()};
  double total = 0.0;
  for (std::size_t i = 0; i < source.count(); ++i) {
    total += vector_objective(power[i], channel_uses[i], splits[i], link, source.variance(i));
  }
  return total;
}

SlackGradient slack_gradient(const std::vector<double>& power,
                             const std::vector<double>& channel_uses,
                             const std::vector<RateSplit>& splits, const SourceSpec& source,
                             const ChannelSpec& channel) {
  check_sizes(source.count(), power, channel_uses, splits);
  const double samples = static_cast<double>(source.samples());
  const double noise = channel.noise_power();
  SlackGradient g;
  g.power.resize(source.count());
  g.channel_uses.resize(source.count());
  for (std::size_t i = 0; i < source.count(); ++i) {
    const RateSplit& split = splits[i];
    const double variance = source.variance(i);
    const double analog_gain = (1.0 - split.alpha) / (samples * noise);
    const double analog_snr = analog_gain * power[i];
    const double slope = analog_snr > 0.0 ? psi_derivative(analog_snr) : -1.0;
    const double error_variance = quantizer_error_variance(split.rate, variance);
    g.power[i] = error_variance * slope * analog_gain;
    g.channel_uses[i] = 0.0;
    if (split.rate > 0.0) {
      if (!(split.alpha > 0.0)) throw InfeasibleError("positive rate with zero digital power");
      const double digital_uses = channel_uses[i] - samples;
      const double t = samples * split.rate / digital_uses;
      const double two_t = std::exp2(t);
      const double scale = noise / (split.alpha * power[i]);
      const double tau = scale * digital_uses * (two_t - 1.0);
      g.power[i] += -tau * variance / power[i];
      g.channel_uses[i] = variance * scale * (two_t - 1.0 - t * kLn2 * two_t);
    }
  }
  return g;
}

double penalty_objective(const std::vector<double>& power, const std::vector<double>& channel_uses,
                         double penalty, const std::vector<RateSplit>& splits,
                         const SourceSpec& source, const ChannelSpec& channel) {
  check_sizes(source.count(), power, channel_uses, splits);
  if (!(penalty >= 0.0)) throw ValidationError("penalty_objective: penalty must be >= 0");
  const auto s = slacks(power, channel_uses, source, channel);
  if (!s.interior) throw InfeasibleError("penalty_objective: point violates a constraint");
  const double samples = static_cast<double>(source.samples());
  double barrier = std::log(s.bandwidth) + std::log(s.power);
  for (std::size_t i = 0; i < power.size(); ++i) {
    barrier += std::log(channel_uses[i] - samples) + std::log(power[i]);
  }
  return slack_objective(power, channel_uses, splits, source, channel) - penalty * barrier;
}

SlackGradient penalty_gradient(const std::vector<double>& power,
                               const std::vector<double>& channel_uses, double penalty,
                               const std::vector<RateSplit>& splits, const SourceSpec& source,
                               const ChannelSpec& channel) {
  check_sizes(source.count(), power, channel_uses, splits);
  if (!(penalty >= 0.0)) throw ValidationError("penalty_gradient: penalty must be >= 0");
  const auto s = slacks(power, channel_uses, source, channel);
  if (!s.interior) throw InfeasibleError("penalty_gradient: point violates a constraint");
  const double samples = static_cast<double>(source.samples());
  auto g = slack_gradient(power, channel_uses, splits, source, channel);
  for (std::size_t i = 0; i < power.size(); ++i) {
    g.power[i] += penalty / s.power - penalty / power[i];
    g.channel_uses[i] += penalty / s.bandwidth - penalty / (channel_uses[i] - samples);
  }
  return g;
}

double slack_kkt_residual(const std::vector<double>& power,
                          const std::vector<double>& channel_uses,
                          const std::vector<RateSplit>& splits, const SourceSpec& source,
                          const ChannelSpec& channel) {
  const auto g = slack_gradient(power, channel_uses, splits, source, channel);
  const double big_p = channel.power_budget();
  const double big_k = static_cast<double>(channel.total_channel_uses());
  const double samples = static_cast<double>(source.samples());
  constexpr double kActive = 1e-6;

  // One block per budget: normalized gradient, normalized distance to the
  // lower bound, and normalized budget slack.
  auto block = [&](const std::vector<double>& grad, const std::vector<double>& values,
                   double budget, double lower) {
    const std::size_t m = grad.size();
    std::vector<double> scaled(m);
    std::vector<bool> at_bound(m);
    for (std::size_t i = 0; i < m; ++i) {
      scaled[i] = grad[i] * budget;
      at_bound[i] = (values[i] - lower) / budget <= kActive;
    }
    const double budget_slack = 1.0 - sum(values) / budget;
    double multiplier = 0.0;
    if (budget_slack <= kActive) {
      double acc = 0.0;
      int free = 0;
      for (std::size_t i = 0; i < m; ++i) {
        if (!at_bound[i]) {
          acc += scaled[i];
          ++free;
        }
      }
      if (free > 0) multiplier = std::max(0.0, -acc / free);
    }
    double norm2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double r = scaled[i] + multiplier;
      if (at_bound[i]) r = std::min(r, 0.0);
      norm2 += r * r;
    }
    return norm2;
  };

  const double norm2 = block(g.power, power, big_p, 0.0) +
                       block(g.channel_uses, channel_uses, big_k, samples);
  return std::sqrt(norm2) / source.total_variance();
}

SlackSolution solve_slack_barrier(const SourceSpec& source, const ChannelSpec& channel,
                                  const std::vector<RateSplit>& splits,
                                  const MultiOptConfig& cfg) {
  cfg.validate();
  channel.check_bandwidth_expansion(source);
  const std::size_t m = source.count();
  if (splits.size() != m) throw ValidationError("solve_slack_barrier: one split per vector");
  for (const auto& s : splits) {
    if (s.rate > 0.0 && s.alpha <= 0.0) {
      throw InfeasibleError("solve_slack_barrier: positive rate with zero digital power");
    }
  }

  SlackSolution solution;
  const double big_p = channel.power_budget();
  const double big_k = static_cast<double>(channel.total_channel_uses());
  if (m == 1) {
    solution.power = {big_p};
    solution.channel_uses = {big_k};
    solution.expected_distortion =
        slack_objective(solution.power, solution.channel_uses, splits, source, channel);
    solution.trace = {solution.expected_distortion};
    return solution;
  }

  BarrierProblem problem(source, channel, splits);
  // Equal split, pulled slightly inside so the budget constraints are strict.
  std::vector<double> x(2 * m);
  const double shrink = 1.0 - 1e-3;
  for (std::size_t i = 0; i < m; ++i) {
    x[i] = shrink / static_cast<double>(m);
    x[m + i] = shrink / static_cast<double>(m);
  }
  std::vector<double> p, k;
  problem.unpack(x, p, k);
  if (!slacks(p, k, source, channel).interior) {
    throw InfeasibleError("solve_slack_barrier: equal split is not strictly feasible");
  }

  const double scale = source.total_variance();
  double penalty = cfg.initial_penalty * scale;
  double previous = slack_objective(p, k, splits, source, channel);
  for (int j = 1; j <= cfg.max_penalty_rounds; ++j) {
    penalty *= cfg.penalty_decay;
    solution.inner_iterations += minimize_barrier(problem, penalty, x, cfg, scale);
    problem.unpack(x, p, k);
    const double ed = slack_objective(p, k, splits, source, channel);
    solution.penalties.push_back(penalty);
    solution.trace.push_back(ed);
    const bool settled = std::abs(ed - previous) <= cfg.tolerance * scale;
    previous = ed;
    if (settled && penalty <= cfg.penalty_floor * scale) break;
  }
  solution.power = p;
  solution.channel_uses = k;
  solution.expected_distortion = previous;
  solution.kkt_residual = slack_kkt_residual(p, k, splits, source, channel);
  return solution;
}

double upsilon(double x) {
  const double two_x = std::exp2(x);
  const double bracket = (two_x - 1.0) - two_x * x * kLn2;
  return 2.0 * kLn2 * kLn2 * two_x * x * x * (two_x - 1.0) - bracket * bracket;
}

double convexity_certificate(const OperatingPoint& point, const LinkSetup& link, double variance) {
  validate_point(point, link);
  if (point.rate == 0.0) return 0.0;
  if (!(point.alpha > 0.0)) throw InfeasibleError("convexity_certificate: alpha must be > 0");
  const auto state = derive_link(point, link);
  const double samples = static_cast<double>(link.samples);
  const double noise = link.noise_power;
  const double t = state.channel_rate;
  const double p = point.power;
  const double a = point.alpha;
  const double var2 = variance * variance;
  const double digital = noise * noise / (p * p * p * p * a * a) * var2 * upsilon(t);
  const double coupling = 2.0 * kEcsqLoss * kLn2 * kLn2 / (p * a) / state.digital_uses *
                          (1.0 - a) * (1.0 - a) / (samples * samples * noise) * std::exp2(t) * t *
                          t * std::exp2(-2.0 * point.rate) * var2 *
                          psi_curvature_integral(state.analog_snr);
  return digital + coupling;
}

std::vector<long> round_and_greedy(const std::vector<double>& fractional_uses,
                                   const std::vector<double>& power,
                                   const std::vector<RateSplit>& splits, const SourceSpec& source,
                                   const ChannelSpec& channel) {
  const std::size_t m = source.count();
  check_sizes(m, power, fractional_uses, splits);
  const long samples = static_cast<long>(source.samples());
  const LinkSetup link{source.samples(), channel.noise_power()};

  std::vector<long> uses(m);
  for (std::size_t i = 0; i < m; ++i) {
    uses[i] = std::max(static_cast<long>(std::floor(fractional_uses[i])), samples + 1);
  }
  auto total_ed = [&](const std::vector<long>& k) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      total += vector_objective(power[i], static_cast<double>(k[i]), splits[i], link,
                                source.variance(i));
    }
    return total;
  };
  long residual = channel.total_channel_uses() - std::accumulate(uses.begin(), uses.end(), 0L);

  // Lifting to L + 1 can overshoot the budget; give back uses where it
  // costs least.
  while (residual < 0) {
    double best = kInfinity;
    std::size_t pick = m;
    for (std::size_t n = m; n-- > 0;) {
      if (uses[n] <= samples + 1) continue;
      auto trial = uses;
      --trial[n];
      const double value = total_ed(trial);
      if (value < best - 1e-12) {
        best = value;
        pick = n;
      }
    }
    if (pick == m) throw InfeasibleError("round_and_greedy: cannot satisfy bandwidth budget");
    --uses[pick];
    ++residual;
  }

  while (residual > 0) {
    --residual;
    double best = kInfinity;
    std::size_t pick = 0;
    for (std::size_t n = 0; n < m; ++n) {
      if (n > 0 && !(uses[n] < uses[n - 1])) continue;
      auto trial = uses;
      ++trial[n];
      const double value = total_ed(trial);
      if (value < best - 1e-12) {
        best = value;
        pick = n;
      }
    }
    ++uses[pick];
  }
  return uses;
}

Allocation MultiOptResult::allocation() const {
  Allocation a;
  for (std::size_t i = 0; i < power.size(); ++i) {
    a.entries.push_back({splits[i].rate, splits[i].alpha, power[i], channel_uses[i]});
  }
  return a;
}

MultiOptResult two_stage_optimize(const SourceSpec& source, const ChannelSpec& channel,
                                  const MultiOptConfig& cfg) {
  cfg.validate();
  channel.check_bandwidth_expansion(source);
  const std::size_t m = source.count();
  const double scale = source.total_variance();
  MultiOptResult result;

  auto intra = [&](const std::vector<double>& power, const std::vector<long>& uses,
                   std::vector<RateSplit>& splits, std::vector<double>& per_vector) {
    splits.resize(m);
    per_vector.resize(m);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const VectorBudget budget{power[i], static_cast<double>(uses[i]), source.samples(),
                                channel.noise_power()};
      const auto r = bcd_joint_allocate(budget, source.variance(i), cfg.single);
      splits[i] = {r.rate, r.alpha};
      per_vector[i] = r.expected_distortion;
      total += r.expected_distortion;
    }
    return total;
  };

  if (m == 1) {
    result.power = {channel.power_budget()};
    result.channel_uses = {channel.total_channel_uses()};
    result.expected_distortion =
        intra(result.power, result.channel_uses, result.splits, result.vector_distortion);
    result.trace = {result.expected_distortion};
    result.converged = true;
    result.rounds = 1;
    return result;
  }

  std::vector<RateSplit> splits(m, RateSplit{cfg.single.initial_rate, cfg.single.initial_alpha});
  if (cfg.single.initial_rate > 0.0 && cfg.single.initial_alpha <= 0.0) {
    splits.assign(m, RateSplit{0.0, 0.0});
  }
  double previous = kInfinity;
  for (int round = 1; round <= cfg.max_rounds; ++round) {
    const auto slack = solve_slack_barrier(source, channel, splits, cfg);
    const auto uses = round_and_greedy(slack.channel_uses, slack.power, splits, source, channel);
    std::vector<double> inter_vec;
    double inter_total = 0.0;
    {
      const LinkSetup link{source.samples(), channel.noise_power()};
      for (std::size_t i = 0; i < m; ++i) {
        inter_total += vector_objective(slack.power[i], static_cast<double>(uses[i]), splits[i],
                                        link, source.variance(i));
      }
    }
    std::vector<RateSplit> next_splits;
    std::vector<double> per_vector;
    const double total = intra(slack.power, uses, next_splits, per_vector);
    result.rounds = round;
    if (total > previous) {
      // Restarting the barrier from the equal split can land on a worse
      // integer point; keep the best allocation found so far.
      result.converged = true;
      break;
    }
    result.inter_trace.push_back(inter_total);
    result.trace.push_back(total);
    result.power = slack.power;
    result.channel_uses = uses;
    result.splits = next_splits;
    result.vector_distortion = per_vector;
    result.expected_distortion = total;
    splits = next_splits;
    if (previous - total <= cfg.tolerance * scale) {
      result.converged = true;
      break;
    }
    previous = total;
  }
  return result;
}

Allocation equal_resource_allocation(const SourceSpec& source, const ChannelSpec& channel,
                                     RateSplit split) {
  channel.check_bandwidth_expansion(source);
  const long m = static_cast<long>(source.count());
  const long base = channel.total_channel_uses() / m;
  const long extra = channel.total_channel_uses() % m;
  Allocation a;
  for (long i = 0; i < m; ++i) {
    a.entries.push_back({split.rate, split.alpha, channel.power_budget() / static_cast<double>(m),
                         base + (i < extra ? 1 : 0)});
  }
  return a;
}

}  // namespace hda
