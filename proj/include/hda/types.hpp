#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hda {

/// Raised when an argument violates a documented precondition or a
/// domain type invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operating point that cannot carry data, e.g. a positive rate with no
/// digital power, or a start point outside the feasible region.
class InfeasibleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative solver exhausted its iteration budget.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Multivariate Gaussian source with diagonal covariance: `count` vectors of
/// `samples` complex samples each, ordered by descending variance.
class SourceSpec {
 public:
  SourceSpec(std::size_t samples, std::vector<double> variances);

  std::size_t count() const { return variances_.size(); }
  std::size_t samples() const { return samples_; }
  const std::vector<double>& variances() const { return variances_; }
  double variance(std::size_t i) const { return variances_.at(i); }
  double total_variance() const;

 private:
  std::size_t samples_;
  std::vector<double> variances_;
};

/// Quasi-static Rayleigh channel budget. Power is the total energy spent on
/// one block of `total_channel_uses` complex channel uses; the fading power
/// gain is Exp(1).
class ChannelSpec {
 public:
  ChannelSpec(long total_channel_uses, double power_budget, double noise_power);

  /// Builds a channel whose average SNR per channel use equals `snr_db`.
  static ChannelSpec from_snr_db(long total_channel_uses, double snr_db, double noise_power = 1.0);

  long total_channel_uses() const { return total_channel_uses_; }
  double power_budget() const { return power_budget_; }
  double noise_power() const { return noise_power_; }
  double snr() const;

  /// Same budgets, noise power chosen so that the average SNR is `snr_db`.
  ChannelSpec with_snr_db(double snr_db) const;

  /// Checks that every vector of `source` can get more than L channel uses.
  void check_bandwidth_expansion(const SourceSpec& source) const;

 private:
  long total_channel_uses_;
  double power_budget_;
  double noise_power_;
};

/// Per-vector link constants shared by the analytic evaluators.
struct LinkSetup {
  std::size_t samples = 1;   // L, also the analog channel uses
  double noise_power = 1.0;  // sigma_w^2 per channel use
};

/// Decision tuple of one vector. Channel uses are kept real-valued so the
/// same evaluators serve the relaxed (slack) resource problem.
struct OperatingPoint {
  double rate = 0.0;          // R, bits per complex sample
  double alpha = 0.0;         // digital share of the vector power
  double power = 0.0;         // P_i, energy per block
  double channel_uses = 0.0;  // K_i
};

/// Quantities derived from an operating point.
struct LinkState {
  double digital_uses = 0.0;  // K_i - L
  double analog_uses = 0.0;   // L
  double channel_rate = 0.0;  // L R / (K_i - L), bits per channel use
  double digital_snr = 0.0;
  double analog_snr = 0.0;
};

LinkState derive_link(const OperatingPoint& point, const LinkSetup& link);

/// Throws ValidationError unless K_i > L, P_i > 0, alpha in [0,1], R >= 0.
void validate_point(const OperatingPoint& point, const LinkSetup& link);

struct AllocationEntry {
  double rate = 0.0;
  double alpha = 0.0;
  double power = 0.0;
  long channel_uses = 0;

  OperatingPoint point() const {
    return {rate, alpha, power, static_cast<double>(channel_uses)};
  }
};

/// Integer-bandwidth allocation for every vector of a source.
struct Allocation {
  std::vector<AllocationEntry> entries;

  long total_channel_uses() const;
  double total_power() const;

  /// Checks the budget constraints and per-entry bounds.
  void validate(const SourceSpec& source, const ChannelSpec& channel, double rate_ceiling) const;
};

/// One vector's share of the expected distortion.
struct DistortionTerms {
  double outage_term = 0.0;
  double mmse_term = 0.0;
  double outage_probability = 0.0;
  double total = 0.0;
};

struct DistortionReport {
  std::vector<DistortionTerms> vectors;
  std::vector<double> sdr_db;
  double total = 0.0;
};

}  // namespace hda
