// fhopt: rates, fronthaul-constrained optimization, sweeps and Monte Carlo
// checks from the command line. Exit status 0 on success, 1 for usage and
// configuration errors, 2 for infeasible scenarios and model errors.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fhopt/config.hpp"
#include "fhopt/sweep.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_preset_flag = true) {
  cmd->add_option("--config", opts.config_path, "Scenario file (key = value)");
  if (with_preset_flag) {
    cmd->add_option("--preset", opts.preset, "Start from a figure preset (fig2 ... fig8)");
  }
  cmd->add_option("--out", opts.out, "Output file; PATH.config receives the effective config");
  cmd->add_option("--seed", opts.seed, "Monte Carlo seed");
  cmd->add_option("--trials", opts.trials, "Monte Carlo trials (0: closed form only)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--threads", opts.threads, "Worker threads (0: all cores)");
}

fhopt::ScenarioConfig scenario(const CommonOptions& opts) {
  fhopt::ScenarioConfig config = opts.preset.empty() ? fhopt::ScenarioConfig{} : fhopt::preset(opts.preset);
  if (!opts.config_path.empty()) config = fhopt::load_config(opts.config_path, config);
  if (opts.seed) config.sweep.seed = *opts.seed;
  if (opts.trials) config.sweep.trials = *opts.trials;
  if (opts.threads) config.sweep.threads = *opts.threads;
  if (!opts.out.empty()) config.sweep.out = opts.out;
  return config;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file || !(file << content) || !file.flush()) {
    throw fhopt::Error(fhopt::ErrorCode::ConfigError, "cannot write '" + path + "'");
  }
}

// Writes to config.sweep.out (plus the config echo) or to standard output.
void emit(const fhopt::ScenarioConfig& config, const std::string& content) {
  if (config.sweep.out.empty() || config.sweep.out == "-") {
    std::cout << content << std::flush;
    return;
  }
  write_file(config.sweep.out, content);
  write_file(config.sweep.out + ".config", fhopt::format_config(config));
}

std::string sweep_csv(const fhopt::ScenarioConfig& config) {
  std::ostringstream out;
  fhopt::write_csv(out, fhopt::run_sweep(config));
  return out.str();
}

int exit_code(fhopt::ErrorCode code) {
  switch (code) {
    case fhopt::ErrorCode::InvalidArgument:
    case fhopt::ErrorCode::ConfigError:
      return 1;
    default:
      return 2;
  }
}

int report_error(const std::string& code, const std::string& message, int status) {
  const nlohmann::json err = {{"error", {{"code", code}, {"message", message}, {"exit_status", status}}}};
  std::cout << err.dump() << std::endl;
  std::cerr << "fhopt: " << message << std::endl;
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fronthaul-constrained uplink rate optimization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fhopt 1.0");

  CommonOptions rate_opts, opt_opts, sweep_opts, mc_opts, preset_opts;
  std::string preset_name;

  auto* rate_cmd = app.add_subcommand("rate", "Closed-form rate of the configured design point");
  add_common(rate_cmd, rate_opts);
  auto* opt_cmd = app.add_subcommand("optimize", "Best (B_w, M, b) under the fronthaul constraint");
  add_common(opt_cmd, opt_opts);
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid sweep to CSV");
  add_common(sweep_cmd, sweep_opts);
  auto* mc_cmd = app.add_subcommand("mc-validate", "Monte Carlo rate next to the closed form");
  add_common(mc_cmd, mc_opts);
  auto* preset_cmd = app.add_subcommand("preset", "Run a figure preset sweep to CSV");
  preset_cmd->add_option("name", preset_name, "fig2, fig3, fig4, fig5, fig6, fig7 or fig8")->required();
  add_common(preset_cmd, preset_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 1;
  }

  try {
    if (*rate_cmd) {
      const auto config = scenario(rate_opts);
      emit(config, fhopt::rate_report(config).dump(2) + "\n");
    } else if (*opt_cmd) {
      const auto config = scenario(opt_opts);
      emit(config, fhopt::optimize_report(config).dump(2) + "\n");
    } else if (*sweep_cmd) {
      const auto config = scenario(sweep_opts);
      emit(config, sweep_csv(config));
    } else if (*mc_cmd) {
      const auto config = scenario(mc_opts);
      emit(config, fhopt::mc_validate_report(config).dump(2) + "\n");
    } else if (*preset_cmd) {
      preset_opts.preset = preset_name;
      const auto config = scenario(preset_opts);
      emit(config, sweep_csv(config));
    }
  } catch (const fhopt::Error& e) {
    return report_error(fhopt::to_string(e.code()), e.what(), exit_code(e.code()));
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 2);
  }
  return 0;
}
