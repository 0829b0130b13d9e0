#include "hda/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <thread>

#include "hda/model.hpp"

namespace hda {

QuantizerMode parse_quantizer_mode(const std::string& name) {
  if (name == "ideal" || name == "ideal-quantizer") return QuantizerMode::ideal;
  if (name == "fp-ecsq") return QuantizerMode::fp_ecsq;
  throw ValidationError("unknown quantizer mode '" + name + "' (expected ideal-quantizer or fp-ecsq)");
}

const char* to_string(QuantizerMode mode) {
  return mode == QuantizerMode::ideal ? "ideal-quantizer" : "fp-ecsq";
}

HdaLink::HdaLink(const OperatingPoint& point, double variance, const LinkSetup& link,
                 QuantizerMode mode)
    : point_(point), variance_(variance), link_(link), mode_(mode) {
  validate_point(point, link);
  if (!(variance > 0.0)) throw ValidationError("HdaLink: variance must be positive");
  if (point.rate > 0.0 && point.alpha <= 0.0) {
    throw InfeasibleError("HdaLink: positive rate with zero digital power");
  }
  state_ = derive_link(point, link);
  error_variance_ = quantizer_error_variance(point.rate, variance);
  channel_rate_ = state_.channel_rate;
  coded_rate_ = point.rate;
  if (mode == QuantizerMode::fp_ecsq && point.rate > 0.0) {
    // I and Q are quantized separately at R/2 bits of entropy each with
    // variance sigma^2/2; the (I, Q) cell pair is Huffman coded as one symbol.
    EcsqDesignConfig cfg;
    cfg.match_entropy = true;
    codebook_ = design_ecsq(0.5 * variance, 0.5 * point.rate, cfg);
    std::vector<double> pair_probabilities;
    for (double pi : codebook_->probabilities) {
      for (double pq : codebook_->probabilities) pair_probabilities.push_back(pi * pq);
    }
    coded_rate_ = build_huffman(pair_probabilities).expected_length(pair_probabilities);
    error_variance_ = 2.0 * codebook_->expected_distortion;
    channel_rate_ = static_cast<double>(link.samples) * coded_rate_ / state_.digital_uses;
  }
  if (point.rate > 0.0) {
    // log2(1 + g gamma_d) < R_t  <=>  g < (2^{R_t} - 1) / gamma_d
    outage_gain_ = std::expm1(channel_rate_ * std::log(2.0)) / state_.digital_snr;
  }
}

TrialRecord HdaLink::trial(Rng& rng, bool keep_samples) const {
  const std::size_t n = link_.samples;
  TrialRecord rec;
  rec.gain = rng.exponential();
  const double phase = 2.0 * M_PI * rng.uniform();
  const std::complex<double> h = std::polar(std::sqrt(rec.gain), phase);
  rec.outage = rec.gain < outage_gain_;
  if (keep_samples) rec.squared_errors.reserve(n);

  double total = 0.0;
  if (rec.outage) {
    // Nothing decodable: S_hat = 0.
    for (std::size_t k = 0; k < n; ++k) {
      const double err = std::norm(rng.complex_normal(variance_));
      total += err;
      if (keep_samples) rec.squared_errors.push_back(err);
    }
    rec.distortion = total / static_cast<double>(n);
    return rec;
  }

  const double analog_power = (1.0 - point_.alpha) * point_.power / static_cast<double>(n);
  const double gain_scale =
      analog_power > 0.0 ? std::sqrt(analog_power / error_variance_) : 0.0;
  const double estimator_scale =
      std::sqrt(error_variance_ * analog_power) / (rec.gain * analog_power + link_.noise_power);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> e;
    if (point_.rate == 0.0 || mode_ == QuantizerMode::ideal || !codebook_) {
      e = rng.complex_normal(error_variance_);
    } else {
      const auto s = rng.complex_normal(variance_);
      const double re = codebook_->levels[codebook_->cell_of(s.real())];
      const double im = codebook_->levels[codebook_->cell_of(s.imag())];
      e = s - std::complex<double>(re, im);
    }
    std::complex<double> e_hat = 0.0;
    if (analog_power > 0.0) {
      const auto y = h * (gain_scale * e) + rng.complex_normal(link_.noise_power);
      e_hat = estimator_scale * std::conj(h) * y;
    }
    const double err = std::norm(e - e_hat);
    total += err;
    if (keep_samples) rec.squared_errors.push_back(err);
  }
  rec.distortion = total / static_cast<double>(n);
  return rec;
}

TrialRecord simulate_hda_trial(const OperatingPoint& point, double variance, const LinkSetup& link,
                               Rng& rng, QuantizerMode mode) {
  return HdaLink(point, variance, link, mode).trial(rng, true);
}

MonteCarloReport run_monte_carlo(const HdaLink& link, long n_trials, std::uint64_t seed,
                                 unsigned threads) {
  if (n_trials < 1) throw ValidationError("run_monte_carlo: need at least one trial");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<long>(threads, n_trials));

  std::vector<double> distortion(static_cast<std::size_t>(n_trials));
  std::vector<unsigned char> outage(static_cast<std::size_t>(n_trials));
  auto work = [&](long begin, long end) {
    for (long t = begin; t < end; ++t) {
      Rng rng(seed, static_cast<std::uint64_t>(t));
      const auto rec = link.trial(rng);
      distortion[static_cast<std::size_t>(t)] = rec.distortion;
      outage[static_cast<std::size_t>(t)] = rec.outage ? 1 : 0;
    }
  };
  if (threads == 1) {
    work(0, n_trials);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (n_trials + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const long begin = w * chunk;
      const long end = std::min(n_trials, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  // Welford, in trial order.
  double mean = 0.0;
  double m2 = 0.0;
  long outages = 0;
  for (long t = 0; t < n_trials; ++t) {
    const double d = distortion[static_cast<std::size_t>(t)];
    const double delta = d - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (d - mean);
    outages += outage[static_cast<std::size_t>(t)];
  }
  const double n = static_cast<double>(n_trials);
  MonteCarloReport report;
  report.n_trials = n_trials;
  report.mean_distortion = mean;
  report.distortion_se = n_trials > 1 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0;
  report.distortion_ci = 1.96 * report.distortion_se;
  report.outage_rate = static_cast<double>(outages) / n;
  report.outage_se = std::sqrt(report.outage_rate * (1.0 - report.outage_rate) / n);
  report.outage_ci = 1.96 * report.outage_se;
  report.sdr_db = mean > 0.0 ? sdr_db(link.variance(), mean) : INFINITY;
  return report;
}

MonteCarloReport run_monte_carlo(const OperatingPoint& point, double variance,
                                 const LinkSetup& link, long n_trials, QuantizerMode mode,
                                 std::uint64_t seed, unsigned threads) {
  return run_monte_carlo(HdaLink(point, variance, link, mode), n_trials, seed, threads);
}

MonteCarloReport baseline_pure_analog(double variance, std::size_t samples, double eta,
                                      double power_per_use, double noise_power, long n_trials,
                                      std::uint64_t seed) {
  if (!(eta >= 1.0)) throw ValidationError("baseline_pure_analog: eta must be >= 1");
  if (!(power_per_use > 0.0)) throw ValidationError("baseline_pure_analog: power must be > 0");
  const double uses = eta * static_cast<double>(samples);
  // Block energy eta * P * L, all on the L analog uses; eta = 1 has no
  // digital uses, so pad K by a sliver to satisfy K > L.
  const OperatingPoint point{0.0, 0.0, power_per_use * uses,
                             eta > 1.0 ? uses : uses * (1.0 + 1e-12)};
  return run_monte_carlo(point, variance, {samples, noise_power}, n_trials, QuantizerMode::ideal,
                         seed);
}

MonteCarloReport baseline_pure_digital(double variance, std::size_t samples, double channel_uses,
                                       double power, double noise_power, double rate,
                                       long n_trials, std::uint64_t seed, QuantizerMode mode) {
  if (!(rate > 0.0)) throw ValidationError("baseline_pure_digital: rate must be positive");
  const OperatingPoint point{rate, 1.0, power, channel_uses};
  return run_monte_carlo(point, variance, {samples, noise_power}, n_trials, mode, seed);
}

}  // namespace hda
