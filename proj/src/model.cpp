#include "hda/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hda/quadrature.hpp"

namespace hda {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

SourceSpec::SourceSpec(std::size_t samples, std::vector<double> variances)
    : samples_(samples), variances_(std::move(variances)) {
  if (samples_ < 1) throw ValidationError("SourceSpec: L must be at least 1");
  if (variances_.empty()) throw ValidationError("SourceSpec: need at least one vector");
  for (std::size_t i = 0; i < variances_.size(); ++i) {
    if (!(variances_[i] > 0.0) || !std::isfinite(variances_[i])) {
      throw ValidationError("SourceSpec: variance " + std::to_string(i) + " must be positive");
    }
    if (i > 0 && variances_[i] > variances_[i - 1]) {
      throw ValidationError("SourceSpec: variances must be sorted in descending order");
    }
  }
}

double SourceSpec::total_variance() const {
  return std::accumulate(variances_.begin(), variances_.end(), 0.0);
}

ChannelSpec::ChannelSpec(long total_channel_uses, double power_budget, double noise_power)
    : total_channel_uses_(total_channel_uses),
      power_budget_(power_budget),
      noise_power_(noise_power) {
  if (total_channel_uses_ < 1) throw ValidationError("ChannelSpec: K must be positive");
  if (!(power_budget_ > 0.0) || !std::isfinite(power_budget_)) {
    throw ValidationError("ChannelSpec: power budget must be positive");
  }
  if (!(noise_power_ > 0.0) || !std::isfinite(noise_power_)) {
    throw ValidationError("ChannelSpec: noise power must be positive");
  }
}

ChannelSpec ChannelSpec::from_snr_db(long total_channel_uses, double snr_db, double noise_power) {
  const double power = db_to_linear(snr_db) * static_cast<double>(total_channel_uses) * noise_power;
  return ChannelSpec(total_channel_uses, power, noise_power);
}

double ChannelSpec::snr() const {
  return power_budget_ / (static_cast<double>(total_channel_uses_) * noise_power_);
}

ChannelSpec ChannelSpec::with_snr_db(double snr_db) const {
  const double noise =
      power_budget_ / (static_cast<double>(total_channel_uses_) * db_to_linear(snr_db));
  return ChannelSpec(total_channel_uses_, power_budget_, noise);
}

void ChannelSpec::check_bandwidth_expansion(const SourceSpec& source) const {
  const long needed = static_cast<long>(source.count() * source.samples());
  if (total_channel_uses_ <= needed) {
    throw InfeasibleError("ChannelSpec: K = " + std::to_string(total_channel_uses_) +
                          " must exceed m*L = " + std::to_string(needed));
  }
}

LinkState derive_link(const OperatingPoint& point, const LinkSetup& link) {
  const double samples = static_cast<double>(link.samples);
  LinkState state;
  state.analog_uses = samples;
  state.digital_uses = point.channel_uses - samples;
  state.channel_rate = point.rate > 0.0 ? samples * point.rate / state.digital_uses : 0.0;
  state.digital_snr = point.alpha * point.power / (state.digital_uses * link.noise_power);
  state.analog_snr = (1.0 - point.alpha) * point.power / (samples * link.noise_power);
  return state;
}

void validate_point(const OperatingPoint& point, const LinkSetup& link) {
  if (link.samples < 1) throw ValidationError("L must be at least 1");
  if (!(link.noise_power > 0.0)) throw ValidationError("noise power must be positive");
  if (!(point.channel_uses > static_cast<double>(link.samples))) {
    throw ValidationError("channel uses must exceed L (bandwidth expansion)");
  }
  if (!(point.power > 0.0)) throw ValidationError("vector power must be positive");
  if (!(point.alpha >= 0.0 && point.alpha <= 1.0)) {
    throw ValidationError("power fraction alpha must lie in [0, 1]");
  }
  if (!(point.rate >= 0.0) || !std::isfinite(point.rate)) {
    throw ValidationError("rate must be nonnegative");
  }
}

long Allocation::total_channel_uses() const {
  long sum = 0;
  for (const auto& e : entries) sum += e.channel_uses;
  return sum;
}

double Allocation::total_power() const {
  double sum = 0.0;
  for (const auto& e : entries) sum += e.power;
  return sum;
}

void Allocation::validate(const SourceSpec& source, const ChannelSpec& channel,
                          double rate_ceiling) const {
  if (entries.size() != source.count()) {
    throw ValidationError("Allocation: one entry per source vector required");
  }
  const LinkSetup link{source.samples(), channel.noise_power()};
  for (const auto& e : entries) {
    validate_point(e.point(), link);
    if (e.rate > rate_ceiling + 1e-12) throw ValidationError("Allocation: rate above ceiling");
  }
  if (total_channel_uses() > channel.total_channel_uses()) {
    throw ValidationError("Allocation: bandwidth budget exceeded");
  }
  if (total_power() > channel.power_budget() * (1.0 + 1e-12)) {
    throw ValidationError("Allocation: power budget exceeded");
  }
}

// ---------------------------------------------------------------------------
// Analytic model
// ---------------------------------------------------------------------------

double quantizer_error_variance(double rate, double variance) {
  if (!(rate >= 0.0)) throw ValidationError("quantizer_error_variance: rate must be >= 0");
  if (!(variance > 0.0)) throw ValidationError("quantizer_error_variance: variance must be > 0");
  if (rate == 0.0) return variance;
  return kEcsqLoss * std::exp2(-2.0 * rate) * variance;
}

double outage_probability(double channel_rate, double digital_snr) {
  if (!(channel_rate >= 0.0)) throw ValidationError("outage_probability: R_t must be >= 0");
  if (!(digital_snr >= 0.0)) throw ValidationError("outage_probability: SNR must be >= 0");
  if (channel_rate == 0.0) return 0.0;
  if (digital_snr == 0.0) return 1.0;
  return -std::expm1(-std::expm1(channel_rate * std::log(2.0)) / digital_snr);
}

namespace {

void require_digital_power(const OperatingPoint& point) {
  if (point.rate > 0.0 && point.alpha <= 0.0) {
    throw InfeasibleError("positive rate with zero digital power");
  }
}

// tau = (2^{R_t} - 1) / gamma_d
double outage_threshold(const LinkState& state) {
  return std::expm1(state.channel_rate * std::log(2.0)) / state.digital_snr;
}

}  // namespace

DistortionTerms expected_distortion_approx(const OperatingPoint& point, const LinkSetup& link,
                                           double variance, PsiMethod method) {
  validate_point(point, link);
  require_digital_power(point);
  const LinkState state = derive_link(point, link);
  DistortionTerms terms;
  if (point.rate == 0.0) {
    terms.mmse_term = variance * psi(state.analog_snr, method);
  } else {
    const double tau = outage_threshold(state);
    terms.outage_probability = -std::expm1(-tau);
    terms.outage_term = tau * variance;
    terms.mmse_term = quantizer_error_variance(point.rate, variance) * psi(state.analog_snr, method);
  }
  terms.total = terms.outage_term + terms.mmse_term;
  return terms;
}

DistortionTerms expected_distortion_exact(const OperatingPoint& point, const LinkSetup& link,
                                          double variance) {
  validate_point(point, link);
  require_digital_power(point);
  const LinkState state = derive_link(point, link);
  const double error_variance = quantizer_error_variance(point.rate, variance);
  DistortionTerms terms;
  if (point.rate == 0.0) {
    terms.mmse_term = variance * psi(state.analog_snr);
    terms.total = terms.mmse_term;
    return terms;
  }
  const double tau = outage_threshold(state);
  terms.outage_probability = -std::expm1(-tau);
  terms.outage_term = terms.outage_probability * variance;
  const double gamma_a = state.analog_snr;
  double tail = 0.0;
  if (gamma_a == 0.0) {
    tail = std::exp(-tau);
  } else if (std::isfinite(tau)) {
    tail = integrate_exponential_tail([gamma_a](double g) { return 1.0 / (1.0 + g * gamma_a); },
                                      tau);
  }
  terms.mmse_term = error_variance * tail;
  terms.total = terms.outage_term + terms.mmse_term;
  return terms;
}

DistortionReport evaluate_allocation(const Allocation& allocation, const SourceSpec& source,
                                     const ChannelSpec& channel, bool exact) {
  if (allocation.entries.size() != source.count()) {
    throw ValidationError("evaluate_allocation: one entry per source vector required");
  }
  const LinkSetup link{source.samples(), channel.noise_power()};
  DistortionReport report;
  for (std::size_t i = 0; i < source.count(); ++i) {
    const auto point = allocation.entries[i].point();
    const double var = source.variance(i);
    auto terms = exact ? expected_distortion_exact(point, link, var)
                       : expected_distortion_approx(point, link, var);
    report.total += terms.total;
    report.sdr_db.push_back(sdr_db(var, terms.total));
    report.vectors.push_back(terms);
  }
  return report;
}

double opta_distortion(double snr, double eta) {
  if (!(snr > 0.0)) throw ValidationError("opta_distortion: SNR must be positive");
  if (!(eta >= 1.0)) throw ValidationError("opta_distortion: eta must be >= 1");
  // With t = 1 + snr * s the bound becomes E[(1 + snr g)^{-eta}], g ~ Exp(1).
  return integrate_exponential_tail(
      [snr, eta](double g) { return std::pow(1.0 + snr * g, -eta); }, 0.0);
}

double sdr_db(double variance, double distortion) {
  if (!(variance > 0.0)) throw ValidationError("sdr_db: variance must be positive");
  if (!(distortion > 0.0)) throw ValidationError("sdr_db: distortion must be positive");
  return 10.0 * std::log10(variance / distortion);
}

}  // namespace hda
