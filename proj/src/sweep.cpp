#include "fhopt/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <thread>

namespace fhopt {

namespace {

std::string fmt(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

std::string point_label(const ScenarioConfig& config, double series_value, double axis_value) {
  std::string label = "grid point";
  if (!config.sweep.series.empty()) label += " " + config.sweep.series + "=" + fmt(series_value);
  if (!config.sweep.axis.empty()) label += " " + config.sweep.axis + "=" + fmt(axis_value);
  return label;
}

void apply(const std::string& name, double value, SystemConfig& system, DesignPoint& design) {
  if (name == "b") design.bits = static_cast<int>(value);
  else if (name == "B_w") design.bandwidth = value;
  else if (name == "M") design.antennas = static_cast<int>(value);
  else if (name == "theta") system.pilot_excess = value;
  else if (name == "snr_db") system.max_power = reference_snr_to_power(system, value);
}

SweepRow evaluate(const GridPoint& point) {
  const SystemConfig& sys = point.system;
  SweepRow row;
  row.bandwidth = point.design.bandwidth;
  row.bits = point.design.bits;
  row.threshold = threshold_f(row.bits, sys.quant_range);

  DesignPoint integral = point.design;
  if (point.relaxed) {
    const SearchState st = search_state(sys, point.s, row.bits);
    row.s = point.s;
    row.antennas = st.relaxed_antennas();
    row.rate.quality = estimation_quality(sys, DesignPoint{row.bandwidth, 1, row.bits});
    row.rate.sinqr = st.omega;
    row.rate.rate_bps = st.rate;
    row.rate.sum_rate_bps = sys.users * st.rate;
    // The sufficient conditions are evaluated at the nearest integer M.
    integral.antennas = static_cast<int>(std::max(1L, std::lround(row.antennas)));
  } else {
    row.antennas = point.design.antennas;
    row.s = 1.0 / point.design.antennas;
    row.rate = achievable_rate(sys, point.design);
  }
  row.load = row.bandwidth * row.antennas * row.bits;
  row.bandwidth_condition = bandwidth_condition(sys, integral);
  row.pade_condition = pade_bandwidth_condition(sys, integral);
  row.antenna_condition = antenna_condition(sys, integral);
  return row;
}

}  // namespace

GridPoint grid_point(const ScenarioConfig& config, double series_value, double axis_value) {
  const SweepSpec& spec = config.sweep;
  GridPoint point{config.system, config.design, 0.0, false};
  try {
    if (!spec.series.empty()) apply(spec.series, series_value, point.system, point.design);
    if (!spec.axis.empty()) apply(spec.axis, axis_value, point.system, point.design);
    point.system.validate();

    const double cap = point.system.fronthaul_capacity;
    DesignPoint& d = point.design;
    if (spec.axis == "s") {
      point.s = axis_value;
      point.relaxed = true;
      d.bandwidth = cap / d.bits * axis_value;
      d.antennas = 0;
      const auto [lo, hi] = s_domain(point.system, d.bits);
      if (!(axis_value > lo && axis_value <= hi)) {
        throw Error(ErrorCode::DomainError, "s outside (" + fmt(lo) + ", 1]");
      }
    } else if (spec.couple == Coupling::Antennas) {
      const double m = std::floor(cap / (d.bandwidth * d.bits));
      if (m < 1) throw Error(ErrorCode::Infeasible, "C_f / (B_w b) leaves no antenna");
      d.antennas = static_cast<int>(std::min(m, 2e9));
    } else if (spec.couple == Coupling::Bandwidth) {
      d.bandwidth = cap / (static_cast<double>(d.antennas) * d.bits);
    }
  } catch (const Error& e) {
    throw Error(e.code(), point_label(config, series_value, axis_value) + ": " + e.what());
  }
  return point;
}

std::vector<SweepRow> run_sweep(const ScenarioConfig& config) {
  const SweepSpec& spec = config.sweep;
  const std::vector<double> series = spec.series.empty() ? std::vector<double>{0.0} : spec.series_grid;
  const std::vector<double> axis = spec.axis.empty() ? std::vector<double>{0.0} : spec.grid;
  const bool constrained = spec.couple != Coupling::None || spec.axis == "s";

  struct Task {
    double series_value;
    double axis_value;
  };
  std::vector<Task> tasks;
  for (double sv : series) {
    for (double av : axis) tasks.push_back({sv, av});
  }

  std::vector<SweepRow> rows(tasks.size());
  auto point_row = [&](std::size_t i, unsigned mc_threads) {
    const Task& t = tasks[i];
    const GridPoint point = grid_point(config, t.series_value, t.axis_value);
    try {
      SweepRow row = evaluate(point);
      row.series = spec.series;
      row.series_value = t.series_value;
      row.axis_value = t.axis_value;
      if (constrained && row.load > point.system.fronthaul_capacity * (1.0 + 1e-12)) {
        throw Error(ErrorCode::Infeasible, "fronthaul load " + fmt(row.load) + " exceeds C_f");
      }
      if (spec.trials > 0 && !point.relaxed) {
        mc::McOptions options;
        options.mode = spec.mode;
        options.threads = mc_threads;
        const std::uint64_t seed = mc::splitmix64(spec.seed ^ mc::splitmix64(i + 1));
        row.mc = mc::empirical_rate(point.system, point.design, spec.trials, seed, options);
      }
      rows[i] = std::move(row);
    } catch (const Error& e) {
      throw Error(e.code(), point_label(config, t.series_value, t.axis_value) + ": " + e.what());
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned threads = spec.threads == 0 ? hw : spec.threads;
  if (spec.trials > 0 || threads <= 1 || tasks.size() < 2) {
    // Simulated sweeps parallelize inside each point.
    for (std::size_t i = 0; i < tasks.size(); ++i) point_row(i, threads);
    return rows;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(tasks.size());
  auto work = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        point_row(i, 1);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(threads, tasks.size()); ++w) pool.emplace_back(work);
  }
  // Report the first failing point in grid order, whatever finished first.
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

void write_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kCsvVersion << "\n";
  out << "series,series_value,axis_value,B_w_hz,M,b,s,fronthaul_load,c,gamma,rate_bps,"
         "sum_rate_bps,threshold_f,bandwidth_condition,pade_condition,antenna_condition,"
         "mc_rate_bps,mc_stderr_bps,mc_clip_rate\n";
  for (const auto& r : rows) {
    out << r.series << ',' << fmt(r.series_value) << ',' << fmt(r.axis_value) << ','
        << fmt(r.bandwidth) << ',' << fmt(r.antennas) << ',' << r.bits << ',' << fmt(r.s) << ','
        << fmt(r.load) << ',' << fmt(r.rate.quality) << ',' << fmt(r.rate.sinqr) << ','
        << fmt(r.rate.rate_bps) << ',' << fmt(r.rate.sum_rate_bps) << ',' << fmt(r.threshold)
        << ',' << r.bandwidth_condition << ',' << r.pade_condition << ',' << r.antenna_condition;
    if (r.mc) {
      out << ',' << fmt(r.mc->rate_bps) << ','
          << (std::isfinite(r.mc->rate_stderr_bps) ? fmt(r.mc->rate_stderr_bps) : std::string())
          << ',' << fmt(r.mc->clip_rate);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

const std::map<std::string, std::string>& preset_texts() {
  static const std::map<std::string, std::string> texts = {
      {"fig2",
       "# rate versus ADC resolution at fixed bandwidth, M filling the fronthaul\n"
       "B_w = 200e6\naxis = b\ngrid = range(1, 12)\ncouple = M\n"},
      {"fig3",
       "# threshold f(b) next to the fixed-bandwidth rates\n"
       "B_w = 200e6\naxis = b\ngrid = range(1, 12)\ncouple = M\n"},
      {"fig4",
       "# rate versus ADC resolution at fixed antenna count, B_w filling the fronthaul\n"
       "M = 200\naxis = b\ngrid = range(1, 12)\ncouple = B_w\n"},
      {"fig5",
       "# 1-bit rate along the constraint curve\n"
       "b = 1\naxis = M\ngrid = range(10, 2000)\ncouple = B_w\n"},
      {"fig6",
       "# fixed-bandwidth trade-off for several reference SNRs\n"
       "B_w = 200e6\naxis = b\ngrid = range(1, 12)\ncouple = M\n"
       "series = snr_db\nseries_grid = 0, 5, 10, 15, 20\n"},
      {"fig7",
       "# fixed-antenna trade-off for several reference SNRs\n"
       "M = 1000\naxis = b\ngrid = range(1, 12)\ncouple = B_w\n"
       "series = snr_db\nseries_grid = 0, 5, 10, 15, 20\n"},
      {"fig8",
       "# relaxed 1-bit rate over s for several pilot excess factors; a long\n"
       "# coherence block keeps the pilot overhead small next to the estimation gain\n"
       "N = 20000\nb = 1\naxis = s\ngrid = logspace(-4, -1, 601)\n"
       "series = theta\nseries_grid = 1, 2, 4, 8\n"},
  };
  return texts;
}

nlohmann::json design_json(const DesignPoint& d) {
  return {{"B_w_hz", d.bandwidth},
          {"M", d.antennas},
          {"b", d.bits},
          {"fronthaul_load", d.fronthaul_load()}};
}

nlohmann::json rate_json(const RateBreakdown& r) {
  return {{"c", r.quality}, {"gamma", r.sinqr}, {"rate_bps", r.rate_bps}, {"sum_rate_bps", r.sum_rate_bps}};
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, text] : preset_texts()) out.push_back(name);
    return out;
  }();
  return names;
}

ScenarioConfig preset(const std::string& name) {
  const auto it = preset_texts().find(name);
  if (it == preset_texts().end()) {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::ConfigError, "unknown preset '" + name + "' (" + known + ")");
  }
  return parse_config(it->second, "preset " + name);
}

nlohmann::json rate_report(const ScenarioConfig& config) {
  const SystemConfig& sys = config.system;
  const DesignPoint& d = config.design;
  const RateBreakdown r = achievable_rate(sys, d);
  const LinkBudget budget = link_budget(sys, d.bandwidth, d.bits);
  nlohmann::json out;
  out["design"] = design_json(d);
  out["within_constraint"] = d.fronthaul_load() <= sys.fronthaul_capacity;
  out["link_budget"] = {{"P", budget.power},
                        {"interference", budget.interference},
                        {"P_rx", budget.received_power},
                        {"mu", budget.agc_gain},
                        {"E", budget.distortion},
                        {"interference_to_noise", budget.interference / sys.noise_variance}};
  out["rate"] = rate_json(r);
  out["N_p"] = sys.pilot_length();
  out["threshold_f"] = threshold_f(d.bits, sys.quant_range);
  out["conditions"] = {{"bandwidth", bandwidth_condition(sys, d)},
                       {"pade", pade_bandwidth_condition(sys, d)},
                       {"antenna", antenna_condition(sys, d)}};
  return out;
}

nlohmann::json optimize_report(const ScenarioConfig& config) {
  OptimizeOptions options;
  options.max_bits = config.sweep.max_bits;
  const OptimizationResult result = optimize_full(config.system, options);

  nlohmann::json out;
  out["best"] = design_json(result.best);
  out["rate"] = rate_json(result.rate);
  out["relaxed"] = {{"s", result.relaxed.s},
                    {"M", result.relaxed.relaxed_antennas()},
                    {"B_w_hz", result.relaxed.relaxed_bandwidth()},
                    {"b", result.relaxed.bits},
                    {"rate_bps", result.relaxed.rate},
                    {"derivative", result.relaxed.derivative}};
  out["binding"] = result.binding;
  out["theorem1"] = result.theorem1;
  out["searched_bits"] = result.searched_bits;

  nlohmann::json per_bits = nlohmann::json::array();
  for (int b : result.searched_bits) {
    const TraceEntry* best = nullptr;
    for (const auto& entry : result.trace) {
      if (entry.design.bits == b && (!best || entry.rate.rate_bps > best->rate.rate_bps)) best = &entry;
    }
    if (best) {
      per_bits.push_back({{"b", b},
                          {"M", best->design.antennas},
                          {"B_w_hz", best->design.bandwidth},
                          {"rate_bps", best->rate.rate_bps}});
    }
  }
  out["trace"] = {{"evaluations", result.trace.size()}, {"best_per_bits", per_bits}};
  return out;
}

nlohmann::json mc_validate_report(const ScenarioConfig& config) {
  const SystemConfig& sys = config.system;
  const DesignPoint& d = config.design;
  const int trials = config.sweep.trials > 0 ? config.sweep.trials : 200;
  mc::McOptions options;
  options.mode = config.sweep.mode;
  options.threads = config.sweep.threads;
  const RateBreakdown closed = achievable_rate(sys, d);
  const mc::McResult sim = mc::empirical_rate(sys, d, trials, config.sweep.seed, options);

  nlohmann::json out;
  out["design"] = design_json(d);
  out["mode"] = mc::to_string(options.mode);
  out["trials"] = trials;
  out["seed"] = config.sweep.seed;
  out["closed_form"] = rate_json(closed);
  out["monte_carlo"] = {{"gamma", sim.sinqr},
                        {"gamma_stderr", sim.sinqr_stderr},
                        {"rate_bps", sim.rate_bps},
                        {"rate_stderr_bps", sim.rate_stderr_bps},
                        {"clip_rate", sim.clip_rate}};
  out["relative_error"] = sim.rate_bps / closed.rate_bps - 1.0;
  return out;
}

}  // namespace fhopt
