#include <catch_amalgamated.hpp>

#include <cmath>

#include <boost/math/special_functions/expint.hpp>

#include "hda/model.hpp"
#include "hda/simulator.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using hda::LinkSetup;
using hda::OperatingPoint;

TEST_CASE("outage rate follows the information outage law", "[sim]") {
  // L = K_d = 10 gives R_t = R; alpha P / (K_d sigma_w^2) = 10.
  const OperatingPoint p{1.0, 0.5, 200.0, 20.0};
  const LinkSetup link{10, 1.0};
  const auto r = hda::run_monte_carlo(p, 1.0, link, 100000, hda::QuantizerMode::ideal, 9);
  const double expected = hda::outage_probability(1.0, 10.0);
  CHECK_THAT(expected, WithinAbs(0.0952, 1e-4));
  CHECK(std::abs(r.outage_rate - expected) <= 3.0 * std::sqrt(expected * (1 - expected) / 1e5));
  CHECK_THAT(r.outage_ci, WithinRel(1.96 * r.outage_se, 1e-15));
}

TEST_CASE("pure analog matches the psi law", "[sim]") {
  const OperatingPoint p{0.0, 0.0, 300.0, 30.0};
  const LinkSetup link{10, 1.0};
  const auto r = hda::run_monte_carlo(p, 2.0, link, 100000, hda::QuantizerMode::ideal, 4);
  const double expected = 2.0 * hda::psi(30.0);
  CHECK(std::abs(r.mean_distortion - expected) <= 3.0 * r.distortion_se);
  CHECK(r.outage_rate == 0.0);
}

TEST_CASE("conditional MMSE law in gain bins", "[sim]") {
  const OperatingPoint p{1.0, 0.5, 400.0, 20.0};
  const LinkSetup link{10, 1.0};
  const hda::HdaLink hl(p, 1.0, link);
  const double analog_snr = hda::derive_link(p, link).analog_snr;
  const double se2 = hl.error_variance();
  // Narrow bins around a few gains; within a bin the law is nearly flat.
  struct Bin {
    double lo, hi, sum = 0.0, sum2 = 0.0, gsum = 0.0;
    long n = 0;
  };
  std::vector<Bin> bins{{0.4, 0.45}, {1.0, 1.05}, {2.0, 2.1}};
  for (long t = 0; t < 200000; ++t) {
    hda::Rng rng(31, static_cast<std::uint64_t>(t));
    const auto rec = hl.trial(rng);
    if (rec.outage) continue;
    for (auto& b : bins) {
      if (rec.gain >= b.lo && rec.gain < b.hi) {
        b.sum += rec.distortion;
        b.sum2 += rec.distortion * rec.distortion;
        b.gsum += rec.gain;
        ++b.n;
      }
    }
  }
  for (const auto& b : bins) {
    REQUIRE(b.n > 500);
    const double mean = b.sum / b.n;
    const double se = std::sqrt((b.sum2 / b.n - mean * mean) / b.n);
    const double g = b.gsum / b.n;
    // Bin-width bias is far below the standard error at these widths.
    INFO("bin [" << b.lo << ", " << b.hi << ")");
    CHECK(std::abs(mean - se2 / (1.0 + g * analog_snr)) <= 3.0 * se);
  }
}

TEST_CASE("single trials", "[sim]") {
  const LinkSetup link{16, 1.0};
  SECTION("alpha = 1 leaves the quantization error") {
    const OperatingPoint p{1.0, 1.0, 1e9, 32.0};
    hda::Rng rng(1);
    const auto rec = hda::simulate_hda_trial(p, 1.0, link, rng);
    REQUIRE_FALSE(rec.outage);
    REQUIRE(rec.squared_errors.size() == 16);
    double mean = 0.0;
    for (double e : rec.squared_errors) mean += e / 16.0;
    CHECK_THAT(rec.distortion, WithinRel(mean, 1e-12));
  }
  SECTION("noiseless limit") {
    const OperatingPoint p{1.0, 0.5, 1e12, 32.0};
    for (std::uint64_t s = 0; s < 20; ++s) {
      hda::Rng rng(s);
      const auto rec = hda::simulate_hda_trial(p, 1.0, link, rng);
      if (rec.outage || rec.gain < 1e-3) continue;
      CHECK(rec.distortion < 1e-6);
    }
  }
  SECTION("samples are only kept on request") {
    const hda::HdaLink hl({1.0, 0.5, 100.0, 32.0}, 1.0, link);
    hda::Rng rng(2);
    CHECK(hl.trial(rng).squared_errors.empty());
  }
  SECTION("bad inputs") {
    hda::Rng rng(3);
    CHECK_THROWS_AS(hda::simulate_hda_trial({1.0, 0.0, 100.0, 32.0}, 1.0, link, rng),
                    hda::InfeasibleError);
    CHECK_THROWS_AS(hda::simulate_hda_trial({1.0, 0.5, 100.0, 16.0}, 1.0, link, rng),
                    hda::ValidationError);
    CHECK_THROWS_AS(hda::run_monte_carlo({1.0, 0.5, 100.0, 32.0}, 1.0, link, 0,
                                         hda::QuantizerMode::ideal, 1),
                    hda::ValidationError);
  }
}

TEST_CASE("reports are reproducible and thread independent", "[sim]") {
  const OperatingPoint p{1.5, 0.6, 640.0, 48.0};
  const LinkSetup link{16, 1.0};
  const auto a = hda::run_monte_carlo(p, 1.0, link, 5000, hda::QuantizerMode::ideal, 42, 1);
  const auto b = hda::run_monte_carlo(p, 1.0, link, 5000, hda::QuantizerMode::ideal, 42, 7);
  const auto c = hda::run_monte_carlo(p, 1.0, link, 5000, hda::QuantizerMode::ideal, 43, 1);
  CHECK(a.mean_distortion == b.mean_distortion);
  CHECK(a.distortion_se == b.distortion_se);
  CHECK(a.outage_rate == b.outage_rate);
  CHECK(a.mean_distortion != c.mean_distortion);
}

TEST_CASE("confidence intervals shrink as 1/sqrt(n)", "[sim]") {
  const OperatingPoint p{1.5, 0.6, 640.0, 48.0};
  const LinkSetup link{16, 1.0};
  const auto small = hda::run_monte_carlo(p, 1.0, link, 4000, hda::QuantizerMode::ideal, 5);
  const auto large = hda::run_monte_carlo(p, 1.0, link, 64000, hda::QuantizerMode::ideal, 5);
  CHECK_THAT(small.distortion_ci / large.distortion_ci, WithinRel(4.0, 0.15));
}

TEST_CASE("fp-ecsq mode matches its codebook-based prediction", "[sim]") {
  const LinkSetup link{16, 1.0};
  const OperatingPoint p{2.0, 0.6, hda::db_to_linear(15.0) * 48.0, 48.0};
  const hda::HdaLink hl(p, 1.0, link, hda::QuantizerMode::fp_ecsq);
  REQUIRE(hl.codebook().has_value());
  // The pair code costs at most one bit per pair above the cell entropy.
  CHECK(hl.coded_rate() >= 2.0 * hl.codebook()->measured_entropy - 1e-12);
  CHECK(hl.coded_rate() < 2.0 * hl.codebook()->measured_entropy + 1.0);
  CHECK_THAT(hl.error_variance(), WithinRel(2.0 * hl.codebook()->expected_distortion, 1e-15));

  const auto s = hda::derive_link(p, link);
  const double tau = std::expm1(hl.channel_rate() * std::log(2.0)) / s.digital_snr;
  const double a = s.analog_snr;
  const double tail = std::exp(1.0 / a) / a * boost::math::expint(1, (1.0 + tau * a) / a);
  const double predicted = -std::expm1(-tau) + hl.error_variance() * tail;
  const auto r = hda::run_monte_carlo(hl, 100000, 12);
  CHECK(std::abs(r.mean_distortion - predicted) <= 3.0 * r.distortion_se);
}

TEST_CASE("baselines", "[sim]") {
  SECTION("pure analog with power scaling") {
    const auto one = hda::baseline_pure_analog(1.0, 8, 1.0, 10.0, 1.0, 100000, 3);
    const auto two = hda::baseline_pure_analog(1.0, 8, 2.0, 10.0, 1.0, 100000, 3);
    CHECK(std::abs(one.mean_distortion - hda::psi(10.0)) <= 3.0 * one.distortion_se);
    CHECK(std::abs(two.mean_distortion - hda::psi(20.0)) <= 3.0 * two.distortion_se);
    CHECK(two.mean_distortion < one.mean_distortion);
    CHECK_THROWS_AS(hda::baseline_pure_analog(1.0, 8, 0.5, 10.0, 1.0, 10, 3),
                    hda::ValidationError);
  }
  SECTION("pure digital") {
    const double power = hda::db_to_linear(10.0) * 32.0;
    const auto r = hda::baseline_pure_digital(1.0, 16, 32.0, power, 1.0, 1.0, 100000, 8);
    const double pout = hda::outage_probability(1.0, power / 16.0);
    const double expected = pout + (1.0 - pout) * hda::quantizer_error_variance(1.0, 1.0);
    CHECK(std::abs(r.mean_distortion - expected) <= 3.0 * r.distortion_se);
  }
  SECTION("cliff and floor") {
    const auto high = hda::baseline_pure_digital(1.0, 16, 32.0, 1e12, 1.0, 2.0, 20000, 8);
    CHECK_THAT(high.sdr_db,
               WithinAbs(10.0 * std::log10(1.0 / hda::quantizer_error_variance(2.0, 1.0)), 0.05));
    const auto low = hda::baseline_pure_digital(1.0, 16, 32.0, 1e-6, 1.0, 2.0, 20000, 8);
    CHECK(low.outage_rate == 1.0);
    CHECK_THAT(low.sdr_db, WithinAbs(0.0, 0.05));
    CHECK_THROWS_AS(hda::baseline_pure_digital(1.0, 16, 32.0, 10.0, 1.0, 0.0, 10, 8),
                    hda::ValidationError);
  }
}

TEST_CASE("quantizer mode names", "[sim]") {
  CHECK(hda::parse_quantizer_mode("ideal") == hda::QuantizerMode::ideal);
  CHECK(hda::parse_quantizer_mode("ideal-quantizer") == hda::QuantizerMode::ideal);
  CHECK(hda::parse_quantizer_mode("fp-ecsq") == hda::QuantizerMode::fp_ecsq);
  CHECK(std::string(hda::to_string(hda::QuantizerMode::fp_ecsq)) == "fp-ecsq");
  CHECK_THROWS_AS(hda::parse_quantizer_mode("lloyd"), hda::ValidationError);
}
