#pragma once

// Closed-form estimation quality, SINQR and achievable rate of MRC with LMMSE
// channel estimates under channel-inversion power control. All users see the
// same numbers, so everything here is per user.

#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include "fhopt/sysmodel.hpp"

namespace fhopt {

template <typename Scalar>
struct BasicRateBreakdown {
  Scalar quality = 0;       // c
  Scalar sinqr = 0;         // gamma
  Scalar rate_bps = 0;      // per user
  Scalar sum_rate_bps = 0;  // K * rate_bps
};

using RateBreakdown = BasicRateBreakdown<double>;

/// Estimation quality c for an arbitrary power delay profile, summed tap by
/// tap. `profile` must hold L non-negative variances summing to one.
template <typename Scalar>
Scalar estimation_quality(const BasicSystemConfig<Scalar>& config,
                          const BasicDesignPoint<Scalar>& design,
                          std::span<const Scalar> profile) {
  using std::abs;
  if (static_cast<int>(profile.size()) != config.taps) {
    throw Error(ErrorCode::InvalidArgument, "estimation quality: profile length must equal L");
  }
  Scalar total = 0;
  for (Scalar v : profile) {
    if (v < Scalar(0)) {
      throw Error(ErrorCode::InvalidArgument, "estimation quality: negative tap variance");
    }
    total += v;
  }
  if (abs(total - Scalar(1)) > Scalar(1e-9)) {
    throw Error(ErrorCode::InvalidArgument, "estimation quality: profile must sum to one");
  }

  const auto budget = link_budget(config, design.bandwidth, design.bits);
  // beta_k P_k N_p mu: the same for every user once power control is applied.
  const Scalar pilot_gain =
      budget.power / design.bandwidth * Scalar(config.pilot_length()) * budget.agc_gain;
  const Scalar floor = budget.distortion + budget.agc_gain * config.noise_variance;

  Scalar quality = 0;
  for (Scalar variance : profile) {
    const Scalar d = pilot_gain * variance / (pilot_gain * variance + floor);
    quality += d * variance;
  }
  return quality;
}

/// Estimation quality for the uniform power delay profile:
/// c = theta I / (theta I + N_0 + P_rx E).
template <typename Scalar>
Scalar estimation_quality(const BasicSystemConfig<Scalar>& config,
                          const BasicDesignPoint<Scalar>& design) {
  const auto budget = link_budget(config, design.bandwidth, design.bits);
  const Scalar pilot = config.effective_pilot_excess() * budget.interference;
  return pilot /
         (pilot + config.noise_variance + budget.received_power * budget.distortion);
}

template <typename Scalar>
Scalar sinqr(const BasicSystemConfig<Scalar>& config, const BasicDesignPoint<Scalar>& design) {
  const auto budget = link_budget(config, design.bandwidth, design.bits);
  const Scalar quality = estimation_quality(config, design);
  return quality * Scalar(design.antennas) * (budget.power / design.bandwidth) /
         (budget.interference + config.noise_variance +
          budget.received_power * budget.distortion);
}

template <typename Scalar>
BasicRateBreakdown<Scalar> achievable_rate(const BasicSystemConfig<Scalar>& config,
                                           const BasicDesignPoint<Scalar>& design) {
  using std::log1p;
  if (config.pilot_length() >= config.block_length) {
    throw Error(ErrorCode::OverheadExhausted,
                "achievable rate: N_p = " + std::to_string(config.pilot_length()) +
                    " >= N = " + std::to_string(config.block_length));
  }
  if (design.antennas < 1) {
    throw Error(ErrorCode::InvalidArgument, "achievable rate: M must be >= 1");
  }
  BasicRateBreakdown<Scalar> out;
  out.quality = estimation_quality(config, design);
  out.sinqr = sinqr(config, design);
  const Scalar prelog = design.bandwidth * Scalar(config.data_length()) /
                        Scalar(config.block_length);
  out.rate_bps = prelog * log1p(out.sinqr) / std::numbers::ln2_v<Scalar>;
  out.sum_rate_bps = Scalar(config.users) * out.rate_bps;
  return out;
}

}  // namespace fhopt
