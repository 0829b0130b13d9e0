#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "hda/model.hpp"
#include "hda/multi_opt.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using hda::ChannelSpec;
using hda::RateSplit;
using hda::SourceSpec;

namespace {

double approx_total(const std::vector<double>& power, const std::vector<double>& uses,
                    const std::vector<RateSplit>& splits, const SourceSpec& source,
                    const ChannelSpec& channel) {
  const hda::LinkSetup link{source.samples(), channel.noise_power()};
  double total = 0.0;
  for (std::size_t i = 0; i < source.count(); ++i) {
    const hda::OperatingPoint p{splits[i].rate, splits[i].alpha, power[i], uses[i]};
    total += hda::expected_distortion_approx(p, link, source.variance(i)).total;
  }
  return total;
}

const std::vector<RateSplit> kSplits4{{2.0, 0.6}, {1.5, 0.5}, {1.0, 0.4}, {0.0, 0.0}};

}  // namespace

TEST_CASE("slack objective sums the per-vector approximate ED", "[multi]") {
  const SourceSpec src(8, {2.0, 1.0, 0.5, 0.1});
  const auto ch = ChannelSpec::from_snr_db(64, 10.0);
  const std::vector<double> p{300.0, 200.0, 100.0, 40.0};
  const std::vector<double> k{20.0, 16.0, 14.0, 12.0};
  CHECK_THAT(hda::slack_objective(p, k, kSplits4, src, ch),
             WithinRel(approx_total(p, k, kSplits4, src, ch), 1e-14));
}

TEST_CASE("slack gradient matches central differences", "[multi]") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t samples = 4 + static_cast<std::size_t>(u(gen) * 30);
    const SourceSpec src(samples, {1.5, 0.8, 0.3});
    const long big_k = static_cast<long>(3 * samples * (2.0 + u(gen)));
    const auto ch = ChannelSpec::from_snr_db(big_k, 5.0 + 20.0 * u(gen));
    std::vector<double> p(3), k(3);
    std::vector<RateSplit> splits(3);
    for (std::size_t i = 0; i < 3; ++i) {
      p[i] = ch.power_budget() / 3.0 * (0.3 + 0.6 * u(gen));
      k[i] = samples + (big_k / 3.0 - samples) * (0.2 + 0.7 * u(gen));
      splits[i] = {0.2 + 2.5 * u(gen), 0.05 + 0.9 * u(gen)};
    }
    const auto g = hda::slack_gradient(p, k, splits, src, ch);
    for (std::size_t i = 0; i < 3; ++i) {
      auto pp = p, pm = p, kp = k, km = k;
      const double hp = 1e-6 * p[i], hk = 1e-6 * (k[i] - samples);
      pp[i] += hp;
      pm[i] -= hp;
      kp[i] += hk;
      km[i] -= hk;
      const double fdp = (hda::slack_objective(pp, k, splits, src, ch) -
                          hda::slack_objective(pm, k, splits, src, ch)) /
                         (2.0 * hp);
      const double fdk = (hda::slack_objective(p, kp, splits, src, ch) -
                          hda::slack_objective(p, km, splits, src, ch)) /
                         (2.0 * hk);
      INFO("trial " << trial << " vector " << i);
      CHECK_THAT(g.power[i], WithinRel(fdp, 1e-6));
      CHECK_THAT(g.channel_uses[i], WithinRel(fdk, 1e-6));
    }
  }
}

TEST_CASE("penalty function", "[multi]") {
  const SourceSpec src(10, {1.0, 0.5});
  const ChannelSpec ch(60, 600.0, 1.0);
  const std::vector<RateSplit> splits{{1.5, 0.6}, {1.0, 0.5}};
  const std::vector<double> p{300.0, 300.0}, k{30.0, 30.0};

  SECTION("six barrier terms at the equal split") {
    // sum K = 60 = K sits on the boundary, so move inside.
    const std::vector<double> pi{290.0, 280.0}, ki{29.0, 28.0};
    const double e = 0.01;
    const double barrier = std::log(60.0 - 57.0) + std::log(600.0 - 570.0) +
                           std::log(29.0 - 10.0) + std::log(28.0 - 10.0) + std::log(290.0) +
                           std::log(280.0);
    const double ed = approx_total(pi, ki, splits, src, ch);
    CHECK_THAT(hda::penalty_objective(pi, ki, e, splits, src, ch),
               WithinRel(ed - e * barrier, 1e-13));
  }
  SECTION("vanishing penalty leaves the objective") {
    const std::vector<double> pi{290.0, 280.0}, ki{29.0, 28.0};
    CHECK(hda::penalty_objective(pi, ki, 0.0, splits, src, ch) ==
          hda::slack_objective(pi, ki, splits, src, ch));
    CHECK_THAT(hda::penalty_objective(pi, ki, 1e-12, splits, src, ch),
               WithinRel(hda::slack_objective(pi, ki, splits, src, ch), 1e-9));
  }
  SECTION("grows without bound near a boundary") {
    // R = 0 on vector 0, so only the barrier reacts as K_0 -> L.
    const std::vector<RateSplit> s{{0.0, 0.0}, {1.0, 0.5}};
    auto at_gap = [&](double gap) {
      return hda::penalty_objective({290.0, 280.0}, {10.0 + gap, 28.0}, 0.1, s, src, ch);
    };
    double previous = at_gap(1.0);
    for (double gap : {1e-2, 1e-4, 1e-8, 1e-12}) {
      const double v = at_gap(gap);
      CHECK(v > previous);
      previous = v;
    }
    // The bandwidth slack moves from 21 to 22 along the way.
    CHECK_THAT(previous - at_gap(1.0),
               WithinRel(-0.1 * (std::log(1e-12) + std::log(22.0 / 21.0)), 1e-4));
  }
  SECTION("boundary points are rejected") {
    CHECK_THROWS_AS(hda::penalty_objective(p, k, 0.1, splits, src, ch), hda::InfeasibleError);
    CHECK_THROWS_AS(hda::penalty_objective({290.0, 0.0}, {29.0, 28.0}, 0.1, splits, src, ch),
                    hda::InfeasibleError);
    CHECK_THROWS_AS(hda::penalty_objective({290.0, 280.0}, {29.0, 28.0}, -1.0, splits, src, ch),
                    hda::ValidationError);
  }
}

TEST_CASE("penalty gradient matches central differences", "[multi]") {
  const SourceSpec src(10, {2.0, 1.0, 0.5, 0.1});
  const auto ch = ChannelSpec::from_snr_db(90, 12.0);
  const std::vector<double> p{300.0, 250.0, 200.0, 100.0};
  const std::vector<double> k{24.0, 21.0, 19.0, 16.0};
  const double e = 0.01;
  const auto g = hda::penalty_gradient(p, k, e, kSplits4, src, ch);
  for (std::size_t i = 0; i < 4; ++i) {
    auto along = [&](bool power, double d) {
      auto q = power ? p : k;
      q[i] += d;
      return power ? hda::penalty_objective(q, k, e, kSplits4, src, ch)
                   : hda::penalty_objective(p, q, e, kSplits4, src, ch);
    };
    auto fd = [&](bool power, double h) {
      return (-along(power, 2 * h) + 8 * along(power, h) - 8 * along(power, -h) +
              along(power, -2 * h)) /
             (12 * h);
    };
    INFO("vector " << i);
    CHECK_THAT(g.power[i], WithinRel(fd(true, 1e-3 * p[i]), 1e-6));
    CHECK_THAT(g.channel_uses[i], WithinRel(fd(false, 1e-3 * (k[i] - 10.0)), 1e-6));
  }
  CHECK_THROWS_AS(hda::penalty_gradient(p, {30.0, 30.0, 30.0, 30.0}, e, kSplits4, src, ch),
                  hda::InfeasibleError);
}

TEST_CASE("barrier solution of the slack problem", "[multi]") {
  SECTION("single vector takes everything") {
    const SourceSpec src(10, {1.0});
    const ChannelSpec ch(25, 250.0, 1.0);
    const auto s = hda::solve_slack_barrier(src, ch, {{1.0, 0.5}});
    CHECK(s.power[0] == 250.0);
    CHECK(s.channel_uses[0] == 25.0);
  }
  SECTION("identical variances split evenly") {
    const SourceSpec src(10, {1.0, 1.0});
    const auto ch = ChannelSpec::from_snr_db(60, 12.0);
    const auto s = hda::solve_slack_barrier(src, ch, {{1.5, 0.6}, {1.5, 0.6}});
    CHECK_THAT(s.power[0], WithinRel(ch.power_budget() / 2.0, 1e-3));
    CHECK_THAT(s.power[1], WithinRel(ch.power_budget() / 2.0, 1e-3));
    CHECK_THAT(s.channel_uses[0], WithinRel(30.0, 1e-3));
    CHECK_THAT(s.channel_uses[1], WithinRel(30.0, 1e-3));
  }
  SECTION("reference profile") {
    const SourceSpec src(10, {2.0, 1.0, 0.5, 0.1});
    const auto ch = ChannelSpec::from_snr_db(80, 10.0);
    const auto s = hda::solve_slack_barrier(src, ch, kSplits4);
    const double sum_k = std::accumulate(s.channel_uses.begin(), s.channel_uses.end(), 0.0);
    const double sum_p = std::accumulate(s.power.begin(), s.power.end(), 0.0);
    CHECK(sum_k < 80.0);
    CHECK(sum_p < ch.power_budget());
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(s.channel_uses[i] > 10.0);
      CHECK(s.power[i] > 0.0);
    }
    CHECK(s.kkt_residual <= 1e-4);
    CHECK(hda::slack_kkt_residual(s.power, s.channel_uses, kSplits4, src, ch) <= 1e-4);
    CHECK(s.power[0] > s.power[1]);
    CHECK(s.power[1] > s.power[2]);
    for (std::size_t t = 1; t < s.trace.size(); ++t) CHECK(s.trace[t] <= s.trace[t - 1] + 1e-12);

    const std::vector<double> equal_p(4, ch.power_budget() / 4.0), equal_k(4, 20.0);
    CHECK(s.expected_distortion <= hda::slack_objective(equal_p, equal_k, kSplits4, src, ch));
  }
  SECTION("infeasible start") {
    const SourceSpec src(10, {1.0, 1.0});
    const auto ch = ChannelSpec::from_snr_db(20, 10.0);
    CHECK_THROWS(hda::solve_slack_barrier(src, ch, {{1.0, 0.5}, {1.0, 0.5}}));
  }
}

TEST_CASE("barrier solution beats random feasible points", "[multi]") {
  const SourceSpec src(10, {2.0, 1.0, 0.5, 0.1});
  const auto ch = ChannelSpec::from_snr_db(80, 10.0);
  const auto s = hda::solve_slack_barrier(src, ch, kSplits4);
  std::mt19937_64 gen(23);
  std::gamma_distribution<double> weight(1.0, 1.0);
  std::uniform_real_distribution<double> fill(0.0, 1.0);
  for (int n = 0; n < 1000; ++n) {
    std::vector<double> p(4), k(4), wp(4), wk(4);
    double sp = 0.0, sk = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      wp[i] = weight(gen);
      wk[i] = weight(gen);
      sp += wp[i];
      sk += wk[i];
    }
    const double pf = fill(gen), kf = fill(gen);
    for (std::size_t i = 0; i < 4; ++i) {
      p[i] = ch.power_budget() * pf * wp[i] / sp + 1e-9;
      k[i] = 10.0 + 1e-9 + (80.0 - 40.0) * kf * wk[i] / sk;
    }
    REQUIRE(s.expected_distortion <= hda::slack_objective(p, k, kSplits4, src, ch) + 1e-12);
  }
}

TEST_CASE("upsilon", "[multi]") {
  CHECK(hda::upsilon(0.0) == 0.0);
  double previous = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double x = 10.0 * i / 1000.0;
    const double v = hda::upsilon(x);
    REQUIRE(v >= 0.0);
    REQUIRE(v >= previous);
    previous = v;
  }
}

TEST_CASE("convexity certificate equals the Hessian determinant", "[multi]") {
  std::mt19937_64 gen(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 1000; ++n) {
    const hda::LinkSetup link{4 + static_cast<std::size_t>(u(gen) * 60),
                              std::pow(10.0, -1.0 + 2.0 * u(gen))};
    const double samples = static_cast<double>(link.samples);
    hda::OperatingPoint p{0.1 + 4.0 * u(gen), 0.02 + 0.96 * u(gen), 0.0,
                          samples * (1.1 + 3.0 * u(gen))};
    p.power = std::pow(10.0, 2.5 * u(gen)) * p.channel_uses * link.noise_power;
    const double variance = 0.1 + 2.0 * u(gen);
    const double det = hda::convexity_certificate(p, link, variance);
    REQUIRE(det >= -1e-9);
    if (n % 50 != 0) continue;
    auto f = [&](double power, double uses) {
      hda::OperatingPoint q = p;
      q.power = power;
      q.channel_uses = uses;
      return hda::expected_distortion_approx(q, link, variance).total;
    };
    const double hp = 1e-4 * p.power, hk = 1e-4 * (p.channel_uses - samples);
    const double P = p.power, K = p.channel_uses;
    const double fpp = (f(P + hp, K) - 2.0 * f(P, K) + f(P - hp, K)) / (hp * hp);
    const double fkk = (f(P, K + hk) - 2.0 * f(P, K) + f(P, K - hk)) / (hk * hk);
    const double fpk =
        (f(P + hp, K + hk) - f(P + hp, K - hk) - f(P - hp, K + hk) + f(P - hp, K - hk)) /
        (4.0 * hp * hk);
    INFO("point " << n);
    CHECK_THAT(det, WithinRel(fpp * fkk - fpk * fpk, 1e-3));
  }
  CHECK(hda::convexity_certificate({0.0, 0.0, 100.0, 20.0}, {10, 1.0}, 1.0) == 0.0);
}

TEST_CASE("rounding and greedy bandwidth reallocation", "[multi]") {
  SECTION("integral input is unchanged") {
    const SourceSpec src(10, {2.0, 1.0});
    const ChannelSpec ch(50, 500.0, 1.0);
    const auto k = hda::round_and_greedy({27.0, 23.0}, {250.0, 250.0}, {{1.5, 0.6}, {1.0, 0.5}},
                                         src, ch);
    CHECK(k == std::vector<long>{27, 23});
  }
  SECTION("one residual use goes to the better candidate") {
    const SourceSpec src(4, {1.0, 0.8});
    const ChannelSpec ch(20, 200.0, 1.0);
    const std::vector<double> p{100.0, 100.0};
    const std::vector<RateSplit> splits{{1.5, 0.6}, {1.5, 0.6}};
    const auto k = hda::round_and_greedy({10.6, 9.4}, p, splits, src, ch);
    const double first = approx_total(p, {11.0, 9.0}, splits, src, ch);
    const double second = approx_total(p, {10.0, 10.0}, splits, src, ch);
    const std::vector<long> expected = first <= second ? std::vector<long>{11, 9}
                                                       : std::vector<long>{10, 10};
    CHECK(k == expected);
  }
  SECTION("equal variances keep the order with ties to the lowest index") {
    const SourceSpec src(10, {1.0, 1.0, 1.0});
    const ChannelSpec ch(62, 600.0, 1.0);
    const std::vector<double> p{200.0, 200.0, 200.0};
    const std::vector<RateSplit> splits(3, RateSplit{1.0, 0.5});
    const auto k = hda::round_and_greedy({20.5, 20.5, 20.5}, p, splits, src, ch);
    CHECK(k == std::vector<long>{21, 21, 20});
  }
  SECTION("floors at L are lifted") {
    const SourceSpec src(10, {1.0, 0.5});
    const ChannelSpec ch(30, 300.0, 1.0);
    const auto k = hda::round_and_greedy({19.5, 10.5}, {150.0, 150.0}, {{1.0, 0.5}, {0.0, 0.0}},
                                         src, ch);
    CHECK(k[1] >= 11);
    CHECK(k[0] + k[1] == 30);
  }
}

TEST_CASE("two-stage optimization", "[multi]") {
  SECTION("single vector matches BCD") {
    const SourceSpec src(20, {1.0});
    const auto ch = ChannelSpec::from_snr_db(40, 15.0);
    const auto r = hda::two_stage_optimize(src, ch);
    hda::VectorBudget b{ch.power_budget(), 40.0, 20, ch.noise_power()};
    const auto bcd = hda::bcd_joint_allocate(b, 1.0);
    CHECK(r.splits[0].rate == bcd.rate);
    CHECK(r.splits[0].alpha == bcd.alpha);
    CHECK(r.expected_distortion == bcd.expected_distortion);
  }
  SECTION("reference profile") {
    const SourceSpec src(10, {2.0, 1.0, 0.5, 0.1});
    const auto ch = ChannelSpec::from_snr_db(80, 10.0);
    for (bool fallback : {true, false}) {
      hda::MultiOptConfig cfg;
      cfg.single.analog_fallback = fallback;
      const auto r = hda::two_stage_optimize(src, ch, cfg);
      INFO("fallback " << fallback);
      long sum_k = 0;
      double sum_p = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        sum_k += r.channel_uses[i];
        sum_p += r.power[i];
        if (i > 0) CHECK(r.channel_uses[i - 1] >= r.channel_uses[i]);
      }
      CHECK(sum_k == 80);
      CHECK(sum_p <= ch.power_budget() + 1e-9);
      CHECK(r.splits[3].rate == 0.0);
      CHECK(r.splits[3].alpha == 0.0);
      for (std::size_t t = 1; t < r.trace.size(); ++t) CHECK(r.trace[t] <= r.trace[t - 1] + 1e-12);
      CHECK_NOTHROW(r.allocation().validate(src, ch, cfg.single.rate_ceiling));
      for (RateSplit s : {RateSplit{1.5, 0.4}, RateSplit{2.0, 0.6}}) {
        const auto era = hda::equal_resource_allocation(src, ch, s);
        CHECK(r.expected_distortion < hda::evaluate_allocation(era, src, ch, false).total);
      }
    }
  }
}

TEST_CASE("equal resource allocation", "[multi]") {
  const SourceSpec src(10, {2.0, 1.0, 0.5});
  const ChannelSpec ch(101, 300.0, 1.0);
  const auto a = hda::equal_resource_allocation(src, ch, {1.5, 0.4});
  REQUIRE(a.entries.size() == 3);
  CHECK(a.entries[0].channel_uses == 34);
  CHECK(a.entries[1].channel_uses == 34);
  CHECK(a.entries[2].channel_uses == 33);
  CHECK(a.total_channel_uses() == 101);
  CHECK_THAT(a.total_power(), WithinRel(300.0, 1e-14));
  for (const auto& e : a.entries) {
    CHECK(e.rate == 1.5);
    CHECK(e.alpha == 0.4);
  }
}
