#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hda/ecsq.hpp"
#include "hda/rng.hpp"
#include "hda/types.hpp"

namespace hda {

enum class QuantizerMode { ideal, fp_ecsq };

QuantizerMode parse_quantizer_mode(const std::string& name);
const char* to_string(QuantizerMode mode);

struct TrialRecord {
  double gain = 0.0;  // g = |h|^2
  bool outage = false;
  double distortion = 0.0;  // mean |S - S_hat|^2 over the L samples
  std::vector<double> squared_errors;  // filled only on request
};

struct MonteCarloReport {
  long n_trials = 0;
  double mean_distortion = 0.0;
  double distortion_se = 0.0;
  double distortion_ci = 0.0;  // 95% half-width
  double outage_rate = 0.0;
  double outage_se = 0.0;
  double outage_ci = 0.0;
  double sdr_db = 0.0;
};

/// Everything one vector transmission needs, prepared once per allocation.
class HdaLink {
 public:
  HdaLink(const OperatingPoint& point, double variance, const LinkSetup& link,
          QuantizerMode mode = QuantizerMode::ideal);

  TrialRecord trial(Rng& rng, bool keep_samples = false) const;

  const OperatingPoint& point() const { return point_; }
  double variance() const { return variance_; }
  /// Quantization error variance per complex sample used by the analog
  /// encoder (the ECSQ design value in fp-ecsq mode).
  double error_variance() const { return error_variance_; }
  /// Source bits per complex sample actually sent: R in ideal mode, the
  /// Huffman rate of the (I, Q) cell pairs in fp-ecsq mode.
  double coded_rate() const { return coded_rate_; }
  /// R_t used for the outage decision, derived from coded_rate().
  double channel_rate() const { return channel_rate_; }
  const std::optional<EcsqCodebook>& codebook() const { return codebook_; }

 private:
  OperatingPoint point_;
  double variance_;
  LinkSetup link_;
  QuantizerMode mode_;
  LinkState state_;
  double error_variance_ = 0.0;
  double coded_rate_ = 0.0;
  double channel_rate_ = 0.0;
  double outage_gain_ = 0.0;  // outage iff g < outage_gain_
  std::optional<EcsqCodebook> codebook_;
};

/// One transmission of an L-sample vector over a block-fading channel.
TrialRecord simulate_hda_trial(const OperatingPoint& point, double variance, const LinkSetup& link,
                               Rng& rng, QuantizerMode mode = QuantizerMode::ideal);

/// Trial t draws from Rng(seed, t), so results do not depend on the thread
/// count; the reduction runs in trial order.
MonteCarloReport run_monte_carlo(const HdaLink& link, long n_trials, std::uint64_t seed,
                                 unsigned threads = 0);

MonteCarloReport run_monte_carlo(const OperatingPoint& point, double variance,
                                 const LinkSetup& link, long n_trials, QuantizerMode mode,
                                 std::uint64_t seed, unsigned threads = 0);

/// All-analog transmission with per-use power eta * P on the L analog uses
/// (the remaining (eta - 1) L uses stay silent).
MonteCarloReport baseline_pure_analog(double variance, std::size_t samples, double eta,
                                      double power_per_use, double noise_power, long n_trials,
                                      std::uint64_t seed);

/// Digital-only transmission (alpha = 1) of block energy P_i over K_i uses.
MonteCarloReport baseline_pure_digital(double variance, std::size_t samples, double channel_uses,
                                       double power, double noise_power, double rate,
                                       long n_trials, std::uint64_t seed,
                                       QuantizerMode mode = QuantizerMode::ideal);

}  // namespace hda
