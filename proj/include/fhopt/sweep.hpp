#pragma once

// Grid sweeps, figure presets and the optimization report used by the CLI.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fhopt/config.hpp"
#include "fhopt/linkrate.hpp"
#include "fhopt/optimizer.hpp"

namespace fhopt {

struct SweepRow {
  std::string series;       // series axis name, empty without one
  double series_value = 0;
  double axis_value = 0;
  double bandwidth = 0;
  double antennas = 0;      // 1/s on s rows, an integer otherwise
  int bits = 1;
  double s = 0;             // 1/M on non-s rows
  double load = 0;          // B_w M b
  RateBreakdown rate;       // relaxed R(s) on s rows
  double threshold = 0;     // f(b)
  bool bandwidth_condition = false;
  bool pade_condition = false;
  bool antenna_condition = false;
  std::optional<mc::McResult> mc;
};

inline constexpr const char* kCsvVersion = "# fhopt-sweep-csv v1";

/// Scenario at one grid point: series and axis values applied, coupled
/// variable filled in.
struct GridPoint {
  SystemConfig system;
  DesignPoint design;
  double s = 0;           // only for s sweeps
  bool relaxed = false;   // s sweep: M = 1/s need not be an integer
};

GridPoint grid_point(const ScenarioConfig& config, double series_value, double axis_value);

/// One row per (series value, grid value), series-major, in grid order.
/// Monte Carlo columns are filled when sweep.trials > 0 (integer rows only).
std::vector<SweepRow> run_sweep(const ScenarioConfig& config);

void write_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Scenario for fig2 ... fig8.
ScenarioConfig preset(const std::string& name);
const std::vector<std::string>& preset_names();

nlohmann::json rate_report(const ScenarioConfig& config);
nlohmann::json optimize_report(const ScenarioConfig& config);
/// Closed form next to the simulated rate for the configured design point.
nlohmann::json mc_validate_report(const ScenarioConfig& config);

}  // namespace fhopt
