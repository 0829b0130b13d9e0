#pragma once

#include <cmath>

#include "hda/special.hpp"
#include "hda/types.hpp"

namespace hda {

/// Default rate ceiling R_th in bits per complex sample.
inline constexpr double kDefaultRateCeiling = 6.0;

/// pi * e / 6, the high-resolution ECSQ loss factor.
inline constexpr double kEcsqLoss = 1.423289037112261;

/// Quantization error variance of an ECSQ at rate R for a source of
/// variance `variance`: (pi e / 6) 2^{-2R} sigma^2 for R > 0, and the source
/// variance itself at R = 0 (no digital description).
double quantizer_error_variance(double rate, double variance);

/// Information outage probability 1 - exp(-(2^{R_t} - 1) / gamma_d) under
/// Exp(1) fading.
double outage_probability(double channel_rate, double digital_snr);

/// Low-outage objective: tau sigma^2 + sigma_e^2 Psi(gamma_a), with
/// tau = (2^{R_t} - 1) / gamma_d. Throws InfeasibleError when R > 0 and
/// alpha = 0.
DistortionTerms expected_distortion_approx(const OperatingPoint& point, const LinkSetup& link,
                                           double variance,
                                           PsiMethod method = PsiMethod::closed_form);

/// Expected distortion without the low-outage approximation:
/// (1 - e^{-tau}) sigma^2 + sigma_e^2 int_tau^inf e^{-g} / (1 + g gamma_a) dg.
DistortionTerms expected_distortion_exact(const OperatingPoint& point, const LinkSetup& link,
                                          double variance);

/// Aggregates per-vector exact (or approximate) distortion for an allocation.
DistortionReport evaluate_allocation(const Allocation& allocation, const SourceSpec& source,
                                     const ChannelSpec& channel, bool exact = true);

/// Distortion lower bound (fraction of the source variance) on the
/// quasi-static Rayleigh channel at average SNR `snr` and bandwidth ratio
/// `eta`: (e^{1/g}/g) int_1^inf e^{-t/g} t^{-eta} dt.
double opta_distortion(double snr, double eta);

/// 10 log10(variance / distortion). Throws ValidationError for D <= 0.
double sdr_db(double variance, double distortion);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace hda
