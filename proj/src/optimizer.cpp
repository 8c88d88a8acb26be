#include "fhopt/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace fhopt {

OptimizationResult optimize_full(const SystemConfig& config, const OptimizeOptions& options) {
  config.validate();
  if (options.max_bits < 1) {
    throw Error(ErrorCode::InvalidArgument, "optimize: max_bits must be >= 1");
  }
  if (config.fronthaul_capacity < 1.0) {
    throw Error(ErrorCode::Infeasible, "optimize: C_f below one antenna-bit per second");
  }

  OptimizationResult result;
  result.theorem1 = theorem1_applies(config);
  const int max_bits = result.theorem1 ? 1 : options.max_bits;

  double best_rate = -1.0;
  for (int b = 1; b <= max_bits; ++b) {
    // B_w >= 1 Hz on the curve.
    const double max_antennas = std::floor(config.fronthaul_capacity / b);
    if (max_antennas < 1.0) break;
    result.searched_bits.push_back(b);

    const SearchState relaxed = maximize_over_s(config, b);
    const double target = relaxed.relaxed_antennas();
    const double first = std::max(1.0, std::floor(target) - 2.0);
    const double last = std::min(max_antennas, std::ceil(target) + 2.0);
    for (double m = first; m <= last; m += 1.0) {
      DesignPoint design{config.fronthaul_capacity / (m * b), static_cast<int>(m), b};
      const RateBreakdown rate = achievable_rate(config, design);
      result.trace.push_back({design, rate});
      if (rate.rate_bps > best_rate) {
        best_rate = rate.rate_bps;
        result.best = design;
        result.rate = rate;
        result.relaxed = relaxed;
      }
    }
  }
  if (best_rate < 0.0) {
    throw Error(ErrorCode::Infeasible, "optimize: no feasible design on the constraint curve");
  }
  result.binding = std::abs(result.best.fronthaul_load() - config.fronthaul_capacity) <=
                   1e-9 * config.fronthaul_capacity;
  return result;
}

}  // namespace fhopt
