#include <doctest.h>

#include <string>

#include "fhopt/config.hpp"

using namespace fhopt;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "test.cfg");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    return e.what();
  }
  FAIL("expected a config error for: " << text);
  return {};
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("empty file gives valid defaults") {
  const auto c = parse_config("");
  CHECK(c.system.users == 20);
  CHECK(c.system.fronthaul_capacity == 500e9);
  CHECK(c.system.block_length == 2000);
  CHECK(c.system.taps == 10);
  CHECK(c.system.pilot_excess == 1.0);
  CHECK(c.system.quant_range == 1.0);
  CHECK(reference_snr_db(c.system) == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(c.sweep.trials == 0);
  CHECK(c.sweep.max_bits == 12);
  CHECK_NOTHROW(c.validate());
  CHECK(parse_config("# only a comment\n\n   \n").system.users == 20);
}

TEST_CASE("rejections name the key and line") {
  const auto msg = config_error("N = 2000\nK = -1\n");
  CHECK(contains(msg, "'K'"));
  CHECK(contains(msg, "test.cfg:2"));
  CHECK(contains(config_error("bogus = 3"), "unknown key 'bogus'"));
  CHECK(contains(config_error("K = 2.5"), "integer"));
  CHECK(contains(config_error("theta = abc"), "'theta'"));
  CHECK(contains(config_error("K = 4\nK = 5"), "twice"));
  CHECK(contains(config_error("K"), "key = value"));
  CHECK(contains(config_error("K ="), "no value"));
  CHECK(contains(config_error("P_max = 1\nsnr_db = 3"), "mutually exclusive"));
  CHECK(contains(config_error("mode = fast"), "'mode'"));
  CHECK(contains(config_error("couple = theta"), "'couple'"));
  CHECK(contains(config_error("axis = q"), "unknown axis"));
  config_error("X_int = 0");
  config_error("N_0 = -1");
}

TEST_CASE("theta rounding") {
  const auto c = parse_config("theta = 1.5\nK = 4\nL = 3\n");
  CHECK(c.system.pilot_length() == 18);
  const auto d = parse_config("theta = 1.5");
  CHECK(d.system.pilot_length() == 300);
}

TEST_CASE("invariant violations") {
  CHECK(contains(config_error("N = 200"), "pilot length"));  // N_p = 200
  try {
    parse_config("C_f = 0");
    FAIL("expected infeasible");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Infeasible);
  }
  config_error("C_f = -5");
}

TEST_CASE("power keys") {
  const auto a = parse_config("snr_db = 0");
  CHECK(reference_snr_db(a.system) == doctest::Approx(0.0).epsilon(1e-12));
  const auto b = parse_config("P_max = 0.25");
  CHECK(b.system.max_power == 0.25);
  // snr follows N_0 when only the reference SNR is fixed
  const auto n = parse_config("N_0 = 1e-20");
  CHECK(reference_snr_db(n.system) == doctest::Approx(15.0).epsilon(1e-12));
  // a later file may switch between the two
  const auto c = parse_config("snr_db = 3", "second", b);
  CHECK(reference_snr_db(c.system) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_FALSE(c.max_power.has_value());
}

TEST_CASE("grid generators") {
  CHECK(parse_grid("1, 2,4") == std::vector<double>{1, 2, 4});
  CHECK(parse_grid("linspace(0, 1, 5)") == std::vector<double>{0, 0.25, 0.5, 0.75, 1});
  const auto lg = parse_grid("logspace(-2, 1, 4)");
  REQUIRE(lg.size() == 4);
  CHECK(lg[0] == doctest::Approx(0.01));
  CHECK(lg[3] == doctest::Approx(10.0));
  CHECK(parse_grid("range(1, 4)") == std::vector<double>{1, 2, 3, 4});
  CHECK(parse_grid("range(0, 1, 0.25)") == std::vector<double>{0, 0.25, 0.5, 0.75, 1});
  CHECK_THROWS_AS(parse_grid("range(0, 1, 0)"), Error);
  CHECK_THROWS_AS(parse_grid("cubes(1,2,3)"), Error);
  CHECK_THROWS_AS(parse_grid("linspace(1,2)"), Error);
  CHECK_THROWS_AS(parse_grid("1,,2"), Error);
}

TEST_CASE("sweep spec validation") {
  CHECK_NOTHROW(parse_config("axis = b\ngrid = range(1, 12)\nB_w = 2e8\ncouple = M"));
  CHECK(contains(config_error("axis = b\ngrid = 3, 2"), "strictly increasing"));
  CHECK(contains(config_error("axis = b\ngrid = 1, 1"), "strictly increasing"));
  CHECK(contains(config_error("axis = b"), "empty"));
  CHECK(contains(config_error("grid = 1,2"), "without 'axis'"));
  CHECK(contains(config_error("axis = b\ngrid = 1,2\nb = 2"), "must not also be set"));
  CHECK(contains(config_error("axis = snr_db\ngrid = 1,2\nP_max = 2"), "must not also be set"));
  CHECK(contains(config_error("axis = B_w\ngrid = 1e6\nM = 4\ncouple = M"), "coupled"));
  CHECK(contains(config_error("axis = M\ngrid = 1,2\ncouple = M"), "swept axis"));
  CHECK(contains(config_error("axis = s\ngrid = 0.1\nM = 3"), "derives"));
  CHECK(contains(config_error("axis = b\ngrid = 1.5, 2"), "integers"));
  CHECK(contains(config_error("series = theta"), "series_grid"));
  CHECK(contains(config_error("axis = theta\ngrid = 1,2\nseries = theta\nseries_grid = 1"), "repeats"));
}

TEST_CASE("echo round trip") {
  const std::string text =
      "K = 8\nC_f = 123456789.5\nL = 3\nsnr_db = 7.5\nX_int = 2.617\nM = 64\nb = 2\n"
      "axis = B_w\ngrid = logspace(6, 9, 7)\nseries = theta\nseries_grid = 1, 2\ntrials = 3\n"
      "seed = 18446744073709551615\nmode = uniform\nb_max = 6\nthreads = 2\nout = x.csv\n";
  const auto a = parse_config(text);
  const std::string echo = format_config(a);
  const auto b = parse_config(echo, "echo");
  CHECK(format_config(b) == echo);
  CHECK(b.system.users == 8);
  CHECK(b.system.fronthaul_capacity == a.system.fronthaul_capacity);
  CHECK(b.system.max_power == a.system.max_power);
  CHECK(b.system.taps == 3);
  CHECK(b.design.antennas == 64);
  CHECK(b.design.bits == 2);
  CHECK(b.sweep.grid == a.sweep.grid);
  CHECK(b.sweep.series_grid == a.sweep.series_grid);
  CHECK(b.sweep.seed == 18446744073709551615ull);
  CHECK(b.sweep.mode == mc::QuantizerMode::Uniform);
  CHECK(b.sweep.out == "x.csv");

  const auto p = parse_config("P_max = 0.5");
  CHECK(parse_config(format_config(p)).system.max_power == 0.5);
}

}
