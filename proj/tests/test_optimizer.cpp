#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fhopt/optimizer.hpp"
#include "oracles.hpp"

using namespace fhopt;

namespace {

// Threshold from the defining linear equation
// (r + alpha)(1 + E/4) = sqrt(alpha) (r + 1)(1 + E), solved by bisection.
long double threshold_by_bisection(int b, long double range) {
  const long double e = oracle::distortion(b, range);
  const long double alpha = (long double)b / (b + 1);
  auto g = [&](long double r) {
    return (r + alpha) * (1 + e / 4) - std::sqrt(alpha) * (r + 1) * (1 + e);
  };
  return oracle::bisect(g, 0.0L, 10.0L, 300);
}

// Rate on the constraint curve for b bits at relaxed M = 1/s, from the oracle.
long double curve_rate(const SystemConfig& c, long double s, int b) {
  const auto sc = oracle::from(c);
  const long double cap = sc.capacity / b;
  return oracle::rate(sc, cap * s, 1.0L / s, b);
}

SystemConfig with_snr(double db) {
  SystemConfig c;
  c.max_power = reference_snr_to_power(c, db);
  return c;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
  return g;
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("threshold f(b) examples") {
  const double f1 = threshold_f(1, 1.0);
  CHECK(f1 > 1.0);
  CHECK(f1 == doctest::Approx(1.003).epsilon(1e-3));
  for (int b = 2; b <= 12; ++b) CHECK(threshold_f(b, 1.0) < 1.0);
  CHECK(threshold_f(2, 1.0) == doctest::Approx(0.95).epsilon(0.01));
  for (int b : {20, 30}) {
    const double alpha = double(b) / (b + 1);
    CHECK(threshold_f(b, 1.0) == doctest::Approx(std::sqrt(alpha)).epsilon(1e-9));
    CHECK(threshold_f(b, 1.0) < 1.0);
  }
}

TEST_CASE("threshold f(b) matches bisection and long double") {
  for (int b = 1; b <= 24; ++b) {
    const long double root = threshold_by_bisection(b, 1.0L);
    CHECK(threshold_f(b, 1.0) == doctest::Approx(double(root)).epsilon(1e-11));
    CHECK(threshold_f(b, 1.0) == doctest::Approx(double(threshold_f(b, 1.0L))).epsilon(1e-12));
  }
}

TEST_CASE("property: threshold numerator and denominator positive") {
  for (int b = 1; b <= 64; ++b) {
    const auto t = threshold_terms(b, 1.0L);
    CHECK(t.numerator > 0);
    CHECK(t.denominator > 0);
  }
}

TEST_CASE("bandwidth condition") {
  SystemConfig c = with_snr(30);
  DesignPoint d{1e6, 100, 2};
  CHECK(bandwidth_condition(c, d));  // interference far above noise

  // I/N_0 = 0.5 with b = 2
  c = SystemConfig{};
  d = {200e6, 100, 2};
  c.max_power = 0.5 * c.noise_variance * d.bandwidth / (c.users * c.edge_gain());
  CHECK(link_budget(c, d.bandwidth, 2).interference / c.noise_variance ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK_FALSE(bandwidth_condition(c, d));

  // exactly at the threshold
  const double f2 = threshold_f(2, c.quant_range);
  c.max_power = f2 * c.noise_variance * d.bandwidth / (c.users * c.edge_gain());
  for (int i = 0; i < 64; ++i) {
    const double ratio = link_budget(c, d.bandwidth, 2).interference / c.noise_variance;
    if (ratio == f2) break;
    c.max_power = std::nextafter(c.max_power, ratio > f2 ? 0.0 : INFINITY);
  }
  REQUIRE(link_budget(c, d.bandwidth, 2).interference / c.noise_variance == f2);
  CHECK_FALSE(bandwidth_condition(c, d));
  c.max_power = std::nextafter(c.max_power, INFINITY);
  c.max_power = std::nextafter(c.max_power, INFINITY);
  CHECK(bandwidth_condition(c, d));
}

TEST_CASE("lemma 1") {
  SystemConfig c;
  const auto d = lemma1_optimum(c, 200e6);
  CHECK(d.antennas == 2500);
  CHECK(d.bits == 1);
  CHECK(d.bandwidth == 200e6);

  SUBCASE("exhaustive oracle") {
    const auto sc = oracle::from(c);
    int best_b = 0;
    long double best = -1;
    for (int b = 1; b <= 12; ++b) {
      const long double m = std::floor(sc.capacity / (200e6L * b));
      const long double r = oracle::rate(sc, 200e6L, m, b);
      if (r > best) best = r, best_b = b;
    }
    CHECK(best_b == 1);
    CHECK(fixed_bandwidth_optimum(c, 200e6).bits == 1);
  }
  SUBCASE("no antenna fits") {
    c.fronthaul_capacity = 1e8;
    try {
      lemma1_optimum(c, 200e6);
      FAIL("expected infeasible");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Infeasible);
    }
  }
  SUBCASE("theta below one") {
    c.pilot_excess = 0.5;
    try {
      lemma1_optimum(c, 200e6);
      FAIL("expected theta error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ThetaTooSmall);
    }
    CHECK_NOTHROW(fixed_bandwidth_optimum(c, 200e6));
  }
}

TEST_CASE("property: lemma 1 dominance") {
  for (double theta : {1.0, 2.0, 4.0}) {
    for (double db : {0.0, 15.0, 30.0}) {
      SystemConfig c = with_snr(db);
      c.pilot_excess = theta;
      for (double bw : log_grid(1e7, 2e9, 25)) {
        const auto one = lemma1_optimum(c, bw);
        const double r1 = achievable_rate(c, one).rate_bps;
        for (int b = 2; b <= 12; ++b) {
          const int m = int(std::floor(c.fronthaul_capacity / (bw * b)));
          if (m < 1) break;
          CHECK(r1 >= achievable_rate(c, DesignPoint{bw, m, b}).rate_bps);
        }
      }
    }
  }
}

TEST_CASE("lemma 2") {
  const SystemConfig high = with_snr(30);  // I/N_0 = 8 at 2.5 GHz
  const auto d = lemma2_optimum(high, 200);
  REQUIRE(d.has_value());
  CHECK(d->bits == 1);
  CHECK(d->bandwidth == doctest::Approx(2.5e9).epsilon(1e-15));

  // exhaustive over b on the constraint curve where the condition holds
  const auto exhaustive_bits = [](const SystemConfig& c) {
    const auto sc = oracle::from(c);
    int best_b = 0;
    long double best = -1;
    for (int b = 1; b <= 12; ++b) {
      const long double r = oracle::rate(sc, sc.capacity / (200.0L * b), 200, b);
      if (r > best) best = r, best_b = b;
    }
    return best_b;
  };
  CHECK(exhaustive_bits(high) == 1);
  CHECK(exhaustive_bits(with_snr(20)) == 1);

  // At 15 dB, I/N_0 = 0.25 < f(1) at 2.5 GHz: no answer. The condition is only
  // sufficient, and here the exhaustive search indeed prefers b = 2.
  CHECK_FALSE(lemma2_optimum(SystemConfig{}, 200).has_value());
  CHECK(exhaustive_bits(SystemConfig{}) == 2);

  CHECK_FALSE(lemma2_optimum(with_snr(-30), 200).has_value());
  CHECK_THROWS_AS(lemma2_optimum(high, 0), Error);
}

TEST_CASE("theorem 1") {
  CHECK(theorem1_applies(with_snr(30)));
  CHECK(theorem1_applies(with_snr(25)));
  // I/N_0 ~ 0.77 at the 15 dB optimum, below f(1)
  CHECK_FALSE(theorem1_applies(with_snr(15)));
  SystemConfig low = with_snr(30);
  low.pilot_excess = 0.5;
  CHECK_FALSE(theorem1_applies(low));

  SUBCASE("brute force over (b, s) agrees with b = 1") {
    const SystemConfig c = with_snr(30);
    REQUIRE(theorem1_applies(c));
    int best_b = 0;
    long double best = -1;
    for (int b = 1; b <= 12; ++b) {
      for (double s : log_grid(b / c.fronthaul_capacity * 10, 1.0, 400)) {
        const long double r = curve_rate(c, s, b);
        if (r > best) best = r, best_b = b;
      }
    }
    CHECK(best_b == 1);
  }
}

TEST_CASE("rate of s") {
  SystemConfig c;
  SUBCASE("vanishes at the lower end") {
    const double lo = 1.0 / c.fronthaul_capacity;
    const double peak = maximize_over_s(c, 1).rate;
    CHECK(rate_of_s(c, lo * (1 + 1e-9), 1) < 1e-6 * peak);
  }
  SUBCASE("integer 1/s matches the link-rate path") {
    for (int b : {1, 2, 3, 7}) {
      for (int m : {1, 2, 10, 381, 606, 5000}) {
        const double s = 1.0 / m;
        const DesignPoint d{c.fronthaul_capacity / b * s, m, b};
        CHECK(rate_of_s(c, s, b) == doctest::Approx(achievable_rate(c, d).rate_bps).epsilon(1e-10));
        CHECK(d.fronthaul_load() == doctest::Approx(c.fronthaul_capacity).epsilon(1e-15));
      }
    }
  }
  SUBCASE("oracle on random points, several theta") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unit(0, 1);
    for (int i = 0; i < 200; ++i) {
      SystemConfig t = with_snr(-5 + 35 * unit(rng));
      t.pilot_excess = 1 + 7 * unit(rng);
      const int b = 1 + int(unit(rng) * 6);
      const double s = std::pow(10.0, -8 * unit(rng));
      if (s <= b / t.fronthaul_capacity) continue;
      CHECK(rate_of_s(t, s, b) == doctest::Approx(double(curve_rate(t, s, b))).epsilon(1e-10));
    }
  }
  SUBCASE("theta = 1 drops tau") {
    CHECK(search_state(c, 1e-3, 1).tau == 0.0);
    c.pilot_excess = 2;
    CHECK(search_state(c, 1e-3, 1).tau > 0.0);
  }
  SUBCASE("domain") {
    CHECK_THROWS_AS(rate_of_s(c, 0.0, 1), Error);
    CHECK_THROWS_AS(rate_of_s(c, 1.0 / c.fronthaul_capacity, 1), Error);
    CHECK_THROWS_AS(rate_of_s(c, 1.5, 1), Error);
    CHECK_NOTHROW(rate_of_s(c, 1.0, 1));
    try {
      rate_of_s(c, 2.0, 1);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DomainError);
    }
  }
  SUBCASE("M times B_w stays on the curve") {
    for (double s : log_grid(1e-11, 1.0, 50)) {
      const auto st = search_state(c, s, 1);
      CHECK(st.relaxed_antennas() * st.relaxed_bandwidth() ==
            doctest::Approx(c.fronthaul_capacity).epsilon(1e-14));
    }
  }
}

TEST_CASE("derivative matches central differences") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0, 1);
  int checked = 0;
  while (checked < 100) {
    SystemConfig c = with_snr(-5 + 35 * unit(rng));
    c.pilot_excess = 1 + 7 * unit(rng);
    const int b = 1 + int(unit(rng) * 4);
    const auto [lo, hi] = s_domain(c, b);
    const double s = lo * std::pow(hi / lo, 0.05 + 0.9 * unit(rng));
    const BasicSystemConfig<long double> cl{c.users, c.fronthaul_capacity, c.block_length, c.taps,
                                            c.pilot_excess, c.noise_variance, c.quant_range,
                                            c.cell_radius_km, c.pathloss_intercept_db,
                                            c.pathloss_slope, c.max_power};
    const long double h = 1e-5L * s;
    const long double fd = (rate_of_s(cl, (long double)s + h, b) - rate_of_s(cl, (long double)s - h, b)) / (2 * h);
    const double analytic = rate_of_s_derivative(c, s, b);
    const double scale = std::max(std::abs(double(fd)), rate_of_s(c, s, b) / s * 1e-3);
    CHECK(std::abs(analytic - double(fd)) <= 1e-6 * scale);
    ++checked;
  }
}

TEST_CASE("maximize over s") {
  SystemConfig c;
  SUBCASE("stationary interior optimum") {
    const auto st = maximize_over_s(c, 1);
    const auto [lo, hi] = s_domain(c, 1);
    CHECK(st.s > lo);
    CHECK(st.s < hi);
    CHECK(rate_of_s_derivative(c, st.s - 1e-9, 1) > 0);
    CHECK(rate_of_s_derivative(c, st.s + 1e-9, 1) < 0);
    // a dense scan never beats it
    for (double s : log_grid(lo * 2, 1.0, 2000)) CHECK(rate_of_s(c, s, 1) <= st.rate * (1 + 1e-12));
  }
  SUBCASE("boundary optimum when the derivative stays positive") {
    SystemConfig small = with_snr(30);
    small.fronthaul_capacity = 1e5;
    REQUIRE(rate_of_s_derivative(small, 1.0, 1) > 0);
    CHECK(maximize_over_s(small, 1).s == 1.0);
  }
  SUBCASE("theta raises s*") {
    double previous = 0;
    for (double theta : {1.0, 2.0, 4.0, 8.0}) {
      c.pilot_excess = theta;
      const double s = maximize_over_s(c, 1).s;
      CHECK(s > previous);
      previous = s;
    }
  }
}

TEST_CASE("property: single derivative sign change and concavity up to s*") {
  for (int b = 1; b <= 4; ++b) {
    for (double theta : {1.0, 2.0, 4.0}) {
      SystemConfig c;
      c.pilot_excess = theta;
      const auto [lo, hi] = s_domain(c, b);
      int changes = 0;
      double previous = rate_of_s_derivative(c, lo * 1.001, b);
      for (double s : log_grid(lo * 1.001, hi, 4000)) {
        const double d = rate_of_s_derivative(c, s, b);
        if ((d > 0) != (previous > 0)) ++changes;
        previous = d;
      }
      CHECK(changes == 1);

      const double star = maximize_over_s(c, b).s;
      const int n = 1000;
      double worst = -INFINITY, peak = 0;
      std::vector<double> r(n);
      for (int i = 0; i < n; ++i) {
        r[i] = rate_of_s(c, lo + (star - lo) * (i + 1) / n, b);
        peak = std::max(peak, std::abs(r[i]));
      }
      for (int i = 1; i + 1 < n; ++i) worst = std::max(worst, r[i + 1] - 2 * r[i] + r[i - 1]);
      CHECK(worst <= 1e-9 * peak);
    }
  }
}

TEST_CASE("pade bandwidth condition") {
  SystemConfig c = with_snr(30);
  c.pilot_excess = 8;
  CHECK(pade_bandwidth_condition(c, DesignPoint{1e6, 2000, 1}));

  // M -> infinity reduces it to I > N_0
  SystemConfig d;
  const double bw_edge = d.users * d.received_power() / d.noise_variance;  // I = N_0 here
  CHECK(pade_bandwidth_condition(d, DesignPoint{bw_edge * 0.99, 2'000'000'000, 1}));
  CHECK_FALSE(pade_bandwidth_condition(d, DesignPoint{bw_edge * 1.01, 2'000'000'000, 1}));

  SUBCASE("true implies a positive derivative") {
    int hits = 0;
    for (double db : {0.0, 15.0, 30.0}) {
      for (double theta : {1.0, 2.0, 4.0}) {
        SystemConfig t = with_snr(db);
        t.pilot_excess = theta;
        for (int b : {1, 2, 3}) {
          for (double m : log_grid(1, 1e5, 80)) {
            const int mi = int(std::round(m));
            const DesignPoint p{t.fronthaul_capacity / (double(mi) * b), mi, b};
            if (pade_bandwidth_condition(t, p)) {
              ++hits;
              CHECK(rate_of_s_derivative(t, 1.0 / mi, b) > 0);
            }
          }
        }
      }
    }
    CHECK(hits > 0);
  }
}

TEST_CASE("antenna condition") {
  SystemConfig c;
  CHECK(antenna_condition(c, DesignPoint{200e6, 1, 1}));
  // the admissible M grows with B_w
  double previous = 0;
  for (double bw : log_grid(1e6, 1e10, 30)) {
    int lo = 1, hi = 2'000'000'000;
    if (!antenna_condition(c, DesignPoint{bw, 1, 1})) continue;
    while (hi - lo > 1) {
      const int mid = lo + (hi - lo) / 2;
      (antenna_condition(c, DesignPoint{bw, mid, 1}) ? lo : hi) = mid;
    }
    CHECK(lo >= previous);
    previous = lo;
  }
  SUBCASE("true implies a negative derivative") {
    int hits = 0;
    for (double db : {0.0, 15.0, 30.0}) {
      for (double theta : {1.0, 2.0, 4.0}) {
        SystemConfig t = with_snr(db);
        t.pilot_excess = theta;
        for (int b : {1, 2, 3}) {
          for (double m : log_grid(1, 1e5, 80)) {
            const int mi = int(std::round(m));
            const DesignPoint p{t.fronthaul_capacity / (double(mi) * b), mi, b};
            if (antenna_condition(t, p)) {
              ++hits;
              CHECK(rate_of_s_derivative(t, 1.0 / mi, b) < 0);
            }
          }
        }
      }
    }
    CHECK(hits > 0);
  }
}

TEST_CASE("optimize_full") {
  SystemConfig c;
  const auto res = optimize_full(c);
  CHECK(res.best.bits == 1);
  CHECK_FALSE(res.theorem1);
  CHECK(res.searched_bits.size() == 12);
  CHECK(res.best.antennas > 1);
  CHECK(optimize_full(with_snr(30)).theorem1);
  CHECK(optimize_full(with_snr(30)).searched_bits.size() == 1);
  CHECK(res.best.fronthaul_load() <= c.fronthaul_capacity * (1 + 1e-12));
  CHECK(res.best.fronthaul_load() >= c.fronthaul_capacity * (1 - res.best.bits * res.best.bandwidth / c.fronthaul_capacity) * (1 - 1e-12));
  CHECK(res.binding);
  CHECK_FALSE(res.trace.empty());

  SUBCASE("unique interior maximum along the curve") {
    const int m_star = res.best.antennas;
    for (int m = 1; m <= 5000; ++m) {
      if (m == m_star) continue;
      const DesignPoint d{c.fronthaul_capacity / m, m, 1};
      CHECK(achievable_rate(c, d).rate_bps < res.rate.rate_bps);
    }
  }
  SUBCASE("lattice oracle") {
    const auto sc = oracle::from(c);
    for (int b = 1; b <= 12; ++b) {
      for (double s : log_grid(1e-9, 1.0, 200)) {
        const long double m = std::max(1.0L, std::round(1.0L / s));
        const long double r = oracle::rate(sc, sc.capacity / (m * b), m, b);
        CHECK(double(r) <= res.rate.rate_bps * (1 + 1e-12));
      }
    }
  }
  SUBCASE("exhaustive b without theorem 1") {
    SystemConfig t = c;
    t.pilot_excess = 0.5;
    const auto r = optimize_full(t);
    CHECK_FALSE(r.theorem1);
    CHECK(r.searched_bits.size() == 12);
    CHECK(r.best.bits == 1);
  }
  SUBCASE("more fronthaul, more rate") {
    SystemConfig t = c;
    t.fronthaul_capacity *= 2;
    CHECK(optimize_full(t).rate.rate_bps > res.rate.rate_bps);
  }
  SUBCASE("infeasible capacity") {
    SystemConfig t = c;
    t.fronthaul_capacity = 0.5;
    try {
      optimize_full(t);
      FAIL("expected infeasible");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Infeasible);
    }
    t.fronthaul_capacity = 0;
    CHECK_THROWS_AS(optimize_full(t), Error);
  }
}

TEST_CASE("property: optimizer output on the constraint within one antenna") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int i = 0; i < 40; ++i) {
    SystemConfig c = with_snr(-5 + 35 * unit(rng));
    c.fronthaul_capacity = std::pow(10.0, 8 + 4 * unit(rng));
    c.pilot_excess = unit(rng) < 0.3 ? 0.7 : 1 + 3 * unit(rng);
    const auto r = optimize_full(c);
    const double load = r.best.fronthaul_load();
    CHECK(load <= c.fronthaul_capacity * (1 + 1e-12));
    CHECK(load >= (c.fronthaul_capacity - r.best.bits * r.best.bandwidth) * (1 - 1e-12));
  }
}

}
