#include "fhopt/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fhopt {

const char* to_string(Coupling coupling) {
  switch (coupling) {
    case Coupling::None: return "none";
    case Coupling::Antennas: return "M";
    case Coupling::Bandwidth: return "B_w";
  }
  return "none";
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

double to_double(const std::string& text) {
  const std::string t = trim(text);
  double value = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || end != t.data() + t.size() || !std::isfinite(value)) {
    fail("expected a finite number, got '" + t + "'");
  }
  return value;
}

template <typename Int>
Int to_integer(const std::string& text) {
  const std::string t = trim(text);
  Int value = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || end != t.data() + t.size()) {
    fail("expected an integer, got '" + t + "'");
  }
  return value;
}

std::vector<std::string> split_args(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) out.push_back(trim(item));
  return out;
}

std::string number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string join_grid(const std::vector<double>& grid) {
  std::string out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i) out += ',';
    out += number(grid[i]);
  }
  return out;
}

bool known_axis(const std::string& name) {
  return name == "b" || name == "B_w" || name == "M" || name == "s" || name == "theta" ||
         name == "snr_db";
}

bool known_series(const std::string& name) {
  return name == "b" || name == "theta" || name == "snr_db";
}

void require_increasing(const std::vector<double>& grid, const std::string& key) {
  if (grid.empty()) fail("'" + key + "' must not be empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) fail("'" + key + "' must be strictly increasing");
  }
}

using Setter = std::function<void(ScenarioConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  auto positive = [](double v) {
    if (!(v > 0)) fail("must be positive");
    return v;
  };
  auto positive_int = [](const std::string& t) {
    const int v = to_integer<int>(t);
    if (v < 1) fail("must be a positive integer");
    return v;
  };
  static const std::map<std::string, Setter> table = {
      {"K", [=](ScenarioConfig& c, const std::string& v) { c.system.users = positive_int(v); }},
      {"C_f",
       [](ScenarioConfig& c, const std::string& v) {
         const double cap = to_double(v);
         if (cap < 0) fail("must not be negative");
         c.system.fronthaul_capacity = cap;
       }},
      {"N", [=](ScenarioConfig& c, const std::string& v) { c.system.block_length = positive_int(v); }},
      {"L", [=](ScenarioConfig& c, const std::string& v) { c.system.taps = positive_int(v); }},
      {"theta",
       [=](ScenarioConfig& c, const std::string& v) { c.system.pilot_excess = positive(to_double(v)); }},
      {"N_0",
       [=](ScenarioConfig& c, const std::string& v) { c.system.noise_variance = positive(to_double(v)); }},
      {"P_max",
       [=](ScenarioConfig& c, const std::string& v) {
         c.max_power = positive(to_double(v));
         c.snr_db.reset();
       }},
      {"snr_db",
       [](ScenarioConfig& c, const std::string& v) {
         c.snr_db = to_double(v);
         c.max_power.reset();
       }},
      {"X_int",
       [=](ScenarioConfig& c, const std::string& v) { c.system.quant_range = positive(to_double(v)); }},
      {"cell_radius_km",
       [=](ScenarioConfig& c, const std::string& v) { c.system.cell_radius_km = positive(to_double(v)); }},
      {"pathloss_intercept_db",
       [](ScenarioConfig& c, const std::string& v) { c.system.pathloss_intercept_db = to_double(v); }},
      {"pathloss_slope",
       [=](ScenarioConfig& c, const std::string& v) { c.system.pathloss_slope = positive(to_double(v)); }},
      {"B_w",
       [=](ScenarioConfig& c, const std::string& v) { c.design.bandwidth = positive(to_double(v)); }},
      {"M", [=](ScenarioConfig& c, const std::string& v) { c.design.antennas = positive_int(v); }},
      {"b",
       [=](ScenarioConfig& c, const std::string& v) {
         c.design.bits = positive_int(v);
         if (c.design.bits > 52) fail("must be at most 52");
       }},
      {"axis",
       [](ScenarioConfig& c, const std::string& v) {
         if (!known_axis(v)) fail("unknown axis '" + v + "' (b, B_w, M, s, theta, snr_db)");
         c.sweep.axis = v;
       }},
      {"grid", [](ScenarioConfig& c, const std::string& v) { c.sweep.grid = parse_grid(v); }},
      {"series",
       [](ScenarioConfig& c, const std::string& v) {
         if (!known_series(v)) fail("unknown series '" + v + "' (b, theta, snr_db)");
         c.sweep.series = v;
       }},
      {"series_grid",
       [](ScenarioConfig& c, const std::string& v) { c.sweep.series_grid = parse_grid(v); }},
      {"couple",
       [](ScenarioConfig& c, const std::string& v) {
         if (v == "none") c.sweep.couple = Coupling::None;
         else if (v == "M") c.sweep.couple = Coupling::Antennas;
         else if (v == "B_w") c.sweep.couple = Coupling::Bandwidth;
         else fail("expected none, M or B_w");
       }},
      {"trials",
       [](ScenarioConfig& c, const std::string& v) {
         const int t = to_integer<int>(v);
         if (t < 0) fail("must not be negative");
         c.sweep.trials = t;
       }},
      {"seed",
       [](ScenarioConfig& c, const std::string& v) { c.sweep.seed = to_integer<std::uint64_t>(v); }},
      {"mode",
       [](ScenarioConfig& c, const std::string& v) {
         if (v != "pqn" && v != "uniform") fail("expected pqn or uniform");
         c.sweep.mode = mc::parse_quantizer_mode(v);
       }},
      {"b_max", [=](ScenarioConfig& c, const std::string& v) { c.sweep.max_bits = positive_int(v); }},
      {"out", [](ScenarioConfig& c, const std::string& v) { c.sweep.out = v; }},
      {"threads",
       [](ScenarioConfig& c, const std::string& v) { c.sweep.threads = to_integer<unsigned>(v); }},
  };
  return table;
}

}  // namespace

std::vector<double> parse_grid(const std::string& text) {
  const std::string t = trim(text);
  const auto open = t.find('(');
  if (open == std::string::npos) {
    std::vector<double> out;
    for (const auto& item : split_args(t)) out.push_back(to_double(item));
    return out;
  }
  if (t.back() != ')') fail("grid: missing ')'");
  const std::string fn = trim(t.substr(0, open));
  const auto args = split_args(t.substr(open + 1, t.size() - open - 2));

  std::vector<double> out;
  if (fn == "linspace" || fn == "logspace") {
    if (args.size() != 3) fail("grid: " + fn + "(a, b, n) takes three arguments");
    const double a = to_double(args[0]);
    const double b = to_double(args[1]);
    const long n = to_integer<long>(args[2]);
    if (n < 1 || n > 10'000'000) fail("grid: point count out of range");
    for (long i = 0; i < n; ++i) {
      const double x = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
      out.push_back(fn == "logspace" ? std::pow(10.0, x) : x);
    }
  } else if (fn == "range") {
    if (args.size() != 2 && args.size() != 3) fail("grid: range(a, b[, step])");
    const double a = to_double(args[0]);
    const double b = to_double(args[1]);
    const double step = args.size() == 3 ? to_double(args[2]) : 1.0;
    if (!(step > 0)) fail("grid: range step must be positive");
    const double count = std::floor((b - a) / step + 1e-9);
    if (count < 0 || count > 1e7) fail("grid: range is empty or too long");
    for (long i = 0; i <= static_cast<long>(count); ++i) out.push_back(a + step * static_cast<double>(i));
  } else {
    fail("grid: unknown generator '" + fn + "'");
  }
  return out;
}

void ScenarioConfig::apply_power() {
  system.max_power = max_power ? *max_power : reference_snr_to_power(system, snr_db.value_or(15.0));
}

void ScenarioConfig::validate() const {
  try {
    system.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Infeasible) throw;
    fail(e.what());
  }

  const auto& s = sweep;
  if (!s.grid.empty() && s.axis.empty()) fail("'grid' given without 'axis'");
  if (!s.series_grid.empty() && s.series.empty()) fail("'series_grid' given without 'series'");
  if (!s.series.empty() && s.series_grid.empty()) fail("'series' needs 'series_grid'");
  if (!s.axis.empty()) require_increasing(s.grid, "grid");
  if (!s.series.empty()) require_increasing(s.series_grid, "series_grid");
  if (!s.series.empty() && s.series == s.axis) fail("'series' repeats the swept axis");

  auto not_fixed = [&](const std::string& axis, const std::string& role) {
    if (axis.empty()) return;
    const bool fixed = axis == "snr_db" ? (is_assigned("snr_db") || is_assigned("P_max"))
                                        : is_assigned(axis);
    if (fixed) fail("'" + axis + "' is the " + role + " and must not also be set");
  };
  not_fixed(s.axis, "swept axis");
  not_fixed(s.series, "series axis");

  if (s.couple != Coupling::None) {
    const std::string follower = to_string(s.couple);
    if (s.axis == "s") fail("'couple' does not apply to an s sweep");
    if (s.axis == follower) fail("'couple' names the swept axis");
    if (is_assigned(follower)) fail("'" + follower + "' is coupled to the constraint and must not be set");
  }
  if (s.axis == "s" && (is_assigned("B_w") || is_assigned("M"))) {
    fail("an s sweep derives B_w and M; do not set them");
  }
  if (s.axis == "b" || s.series == "b") {
    const auto& g = s.axis == "b" ? s.grid : s.series_grid;
    for (double v : g) {
      if (v < 1 || v > 52 || v != std::floor(v)) fail("b values must be integers in [1, 52]");
    }
  }
  if (s.axis == "M") {
    for (double v : s.grid) {
      if (v < 1 || v != std::floor(v) || v > 2e9) fail("M values must be positive integers");
    }
  }
  if (s.axis == "theta" || s.series == "theta") {
    const auto& g = s.axis == "theta" ? s.grid : s.series_grid;
    if (g.front() <= 0) fail("theta values must be positive");
  }
  if (s.axis == "B_w" && s.grid.front() <= 0) fail("B_w values must be positive");
  if (s.axis == "s" && (s.grid.front() <= 0 || s.grid.back() > 1)) fail("s values must lie in (0, 1]");
}

ScenarioConfig parse_config(const std::string& text, const std::string& origin,
                            const ScenarioConfig& base) {
  ScenarioConfig config = base;
  std::set<std::string> seen;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) fail(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) fail(where + ": key '" + key + "' given twice");
    if (value.empty()) fail(where + ": key '" + key + "' has no value");
    try {
      it->second(config, value);
    } catch (const Error& e) {
      fail(where + ": key '" + key + "': " + e.what());
    }
    config.assigned.insert(key);
  }
  if (seen.count("P_max") && seen.count("snr_db")) {
    fail(origin + ": 'P_max' and 'snr_db' are mutually exclusive");
  }
  if (seen.count("P_max")) config.assigned.erase("snr_db");
  if (seen.count("snr_db")) config.assigned.erase("P_max");
  config.apply_power();
  config.validate();
  return config;
}

ScenarioConfig load_config(const std::string& path, const ScenarioConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path, base);
}

std::string format_config(const ScenarioConfig& c) {
  std::ostringstream out;
  const auto& sys = c.system;
  const auto& s = c.sweep;
  auto swept = [&](const std::string& key) { return s.axis == key || s.series == key; };
  out << "# effective configuration\n";
  out << "K = " << sys.users << "\n";
  out << "C_f = " << number(sys.fronthaul_capacity) << "\n";
  out << "N = " << sys.block_length << "\n";
  out << "L = " << sys.taps << "\n";
  if (!swept("theta")) out << "theta = " << number(sys.pilot_excess) << "\n";
  out << "N_0 = " << number(sys.noise_variance) << "\n";
  if (swept("snr_db")) {
    // set per grid point
  } else if (c.max_power) {
    out << "P_max = " << number(*c.max_power) << "\n";
  } else {
    out << "snr_db = " << number(c.snr_db.value_or(15.0)) << "\n";
  }
  out << "X_int = " << number(sys.quant_range) << "\n";
  out << "cell_radius_km = " << number(sys.cell_radius_km) << "\n";
  out << "pathloss_intercept_db = " << number(sys.pathloss_intercept_db) << "\n";
  out << "pathloss_slope = " << number(sys.pathloss_slope) << "\n";

  // Design keys are written only when assigned, so the echo keeps the
  // "axis not also fixed" rules of the original file.
  if (c.is_assigned("B_w")) out << "B_w = " << number(c.design.bandwidth) << "\n";
  if (c.is_assigned("M")) out << "M = " << c.design.antennas << "\n";
  if (c.is_assigned("b")) out << "b = " << c.design.bits << "\n";
  if (!s.axis.empty()) {
    out << "axis = " << s.axis << "\n";
    out << "grid = " << join_grid(s.grid) << "\n";
  }
  if (!s.series.empty()) {
    out << "series = " << s.series << "\n";
    out << "series_grid = " << join_grid(s.series_grid) << "\n";
  }
  out << "couple = " << to_string(s.couple) << "\n";
  out << "trials = " << s.trials << "\n";
  out << "seed = " << s.seed << "\n";
  out << "mode = " << mc::to_string(s.mode) << "\n";
  out << "b_max = " << s.max_bits << "\n";
  if (!s.out.empty()) out << "out = " << s.out << "\n";
  out << "threads = " << s.threads << "\n";
  return out.str();
}

}  // namespace fhopt
