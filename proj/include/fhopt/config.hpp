#pragma once

// Flat "key = value" scenario files. One assignment per line, '#' starts a
// comment, blank lines are ignored. Keys are listed in README.md.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fhopt/montecarlo.hpp"
#include "fhopt/sysmodel.hpp"

namespace fhopt {

enum class Coupling { None, Antennas, Bandwidth };

const char* to_string(Coupling coupling);

/// What a sweep varies and how the remaining design variables follow.
struct SweepSpec {
  std::string axis;                  // b, B_w, M, s, theta, snr_db; empty: single point
  std::vector<double> grid;
  std::string series;                // optional outer axis: b, theta or snr_db
  std::vector<double> series_grid;
  Coupling couple = Coupling::None;  // Antennas: M = floor(C_f/(B_w b)); Bandwidth: B_w = C_f/(M b)

  int trials = 0;                    // 0: closed form only
  std::uint64_t seed = 1;
  mc::QuantizerMode mode = mc::QuantizerMode::Pqn;
  int max_bits = 12;
  std::string out;
  unsigned threads = 0;              // 0: hardware concurrency
};

struct ScenarioConfig {
  SystemConfig system;
  DesignPoint design;
  SweepSpec sweep;

  // Exactly one of these drives max_power; snr_db = 15 when neither is given.
  std::optional<double> snr_db;
  std::optional<double> max_power;

  // Keys assigned explicitly, by this file or by the base it was parsed onto.
  std::set<std::string> assigned;

  bool is_assigned(const std::string& key) const { return assigned.count(key) != 0; }

  /// Recomputes system.max_power from snr_db / max_power.
  void apply_power();
  /// Cross-key checks: powers, N_p < N, sweep shape.
  void validate() const;
};

/// Parses `text` on top of `base`. `origin` names the source in messages.
/// Throws Error(ConfigError) naming the key and line; a non-positive C_f is
/// reported as Infeasible.
ScenarioConfig parse_config(const std::string& text, const std::string& origin = "<config>",
                            const ScenarioConfig& base = ScenarioConfig{});

ScenarioConfig load_config(const std::string& path, const ScenarioConfig& base = ScenarioConfig{});

/// Effective configuration in the same format; parse_config(format_config(c))
/// reproduces c.
std::string format_config(const ScenarioConfig& config);

/// "1,2,4", "linspace(a,b,n)", "logspace(a,b,n)" (powers of ten) or
/// "range(a,b[,step])" (inclusive of b, step 1 by default).
std::vector<double> parse_grid(const std::string& text);

}  // namespace fhopt
