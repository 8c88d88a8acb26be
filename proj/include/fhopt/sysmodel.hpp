#pragma once

// Scenario constants and the shared physical layer: quantization distortion,
// path loss, channel-inversion power control, AGC and the per-user link budget.
//
// Unit conventions
//   bandwidth           Hz
//   fronthaul capacity  bit/s
//   max_power           W, before bandwidth normalization
//   noise_variance      W/Hz, i.e. the noise energy of one complex Nyquist sample
// A user received with power P/B_w per sample competes with noise_variance per
// sample, so every SNR below is dimensionless.

#include <algorithm>
#include <cmath>
#include <string>

#include "fhopt/error.hpp"

namespace fhopt {

/// Variance of the additive quantization distortion of a b-bit ADC whose
/// no-overload interval is [-range, range]: range^2 * 2^(-2b) / 3.
template <typename Scalar>
Scalar quantization_distortion_variance(int bits, Scalar range) {
  if (bits < 1) {
    throw Error(ErrorCode::InvalidArgument, "quantization: bits must be >= 1");
  }
  if (!(range > Scalar(0))) {
    throw Error(ErrorCode::InvalidArgument, "quantization: range must be positive");
  }
  return range * range / Scalar(3) * std::ldexp(Scalar(1), -2 * bits);
}

template <typename Scalar>
Scalar pathloss_db(Scalar distance_km, Scalar intercept_db = Scalar(-130),
                   Scalar slope = Scalar(37.6)) {
  using std::log10;
  if (!(distance_km > Scalar(0))) {
    throw Error(ErrorCode::InvalidArgument, "pathloss: distance must be positive");
  }
  return intercept_db - slope * log10(distance_km);
}

/// Large-scale fading gain beta (linear) at distance_km.
template <typename Scalar>
Scalar pathloss_linear(Scalar distance_km, Scalar intercept_db = Scalar(-130),
                       Scalar slope = Scalar(37.6)) {
  using std::pow;
  return pow(Scalar(10), pathloss_db(distance_km, intercept_db, slope) / Scalar(10));
}

namespace detail {

// P_max such that P_max * beta_edge / (1e6 * N_0) equals the reference SNR.
template <typename Scalar>
Scalar power_for_reference_snr(Scalar snr_db, Scalar noise_variance, Scalar radius_km,
                               Scalar intercept_db, Scalar slope) {
  using std::pow;
  const Scalar edge = pathloss_linear(radius_km, intercept_db, slope);
  return pow(Scalar(10), snr_db / Scalar(10)) * Scalar(1e6) * noise_variance / edge;
}

}  // namespace detail

template <typename Scalar>
struct BasicSystemConfig {
  int users = 20;                          // K
  Scalar fronthaul_capacity = Scalar(500e9);  // C_f
  int block_length = 2000;                 // N
  int taps = 10;                           // L
  Scalar pilot_excess = Scalar(1);         // theta
  Scalar noise_variance = Scalar(3.9810717055349725e-21);  // -174 dBm/Hz
  Scalar quant_range = Scalar(1);          // X_int
  Scalar cell_radius_km = Scalar(0.35);
  Scalar pathloss_intercept_db = Scalar(-130);
  Scalar pathloss_slope = Scalar(37.6);
  // 15 dB reference SNR for the defaults above.
  Scalar max_power = detail::power_for_reference_snr(
      Scalar(15), noise_variance, cell_radius_km, pathloss_intercept_db, pathloss_slope);

  /// N_p = round(theta K L), never below K L.
  int pilot_length() const {
    const long minimum = static_cast<long>(users) * taps;
    const long rounded = std::lround(static_cast<double>(pilot_excess) * static_cast<double>(minimum));
    return static_cast<int>(std::max(minimum, rounded));
  }

  int data_length() const { return block_length - pilot_length(); }

  /// N_p / (K L) after rounding; what the estimator actually sees.
  Scalar effective_pilot_excess() const {
    return Scalar(pilot_length()) / (Scalar(users) * Scalar(taps));
  }

  /// beta of a user at the cell edge.
  Scalar edge_gain() const {
    return pathloss_linear(cell_radius_km, pathloss_intercept_db, pathloss_slope);
  }

  /// P = P_max * beta_edge: the received power parameter under channel inversion.
  Scalar received_power() const { return max_power * edge_gain(); }

  void validate() const {
    auto reject = [](const std::string& what) {
      throw Error(ErrorCode::InvalidArgument, "config: " + what);
    };
    if (users < 1) reject("K must be a positive integer");
    if (taps < 1) reject("L must be a positive integer");
    if (block_length < 1) reject("N must be a positive integer");
    if (!(pilot_excess > Scalar(0))) reject("theta must be positive");
    if (!(noise_variance > Scalar(0))) reject("N_0 must be positive");
    if (!(max_power > Scalar(0))) reject("P_max must be positive");
    if (!(quant_range > Scalar(0))) reject("X_int must be positive");
    if (!(cell_radius_km > Scalar(0))) reject("cell_radius_km must be positive");
    if (!(pathloss_slope > Scalar(0))) reject("pathloss_slope must be positive");
    if (!(fronthaul_capacity > Scalar(0))) {
      throw Error(ErrorCode::Infeasible, "config: C_f must be positive");
    }
    if (pilot_length() >= block_length) {
      throw Error(ErrorCode::OverheadExhausted,
                  "config: pilot length " + std::to_string(pilot_length()) +
                      " leaves no data symbols in a block of " + std::to_string(block_length));
    }
  }
};

using SystemConfig = BasicSystemConfig<double>;

template <typename Scalar>
struct BasicDesignPoint {
  Scalar bandwidth = Scalar(200e6);  // B_w
  int antennas = 100;                // M
  int bits = 1;                      // b

  Scalar fronthaul_load() const { return bandwidth * Scalar(antennas) * Scalar(bits); }
};

using DesignPoint = BasicDesignPoint<double>;

template <typename Scalar>
struct BasicLinkBudget {
  Scalar power;           // P = P_max * beta_edge
  Scalar interference;    // KP / B_w, the total received power of all users
  Scalar received_power;  // P_rx = KP/B_w + N_0
  Scalar agc_gain;        // mu = 1 / P_rx
  Scalar distortion;      // E
};

using LinkBudget = BasicLinkBudget<double>;

/// Transmit power of a user with gain beta under statistical channel
/// inversion. The cell-edge user transmits P_max / B_w.
template <typename Scalar>
Scalar channel_inversion_power(const BasicSystemConfig<Scalar>& config, Scalar bandwidth,
                               Scalar gain) {
  const Scalar edge = config.edge_gain();
  if (!(bandwidth > Scalar(0))) {
    throw Error(ErrorCode::InvalidArgument, "power control: bandwidth must be positive");
  }
  if (!(gain >= edge * (Scalar(1) - Scalar(1e-12)))) {
    throw Error(ErrorCode::InvalidArgument,
                "power control: user gain below the cell-edge gain");
  }
  return config.max_power * edge / (bandwidth * gain);
}

template <typename Scalar>
BasicLinkBudget<Scalar> link_budget(const BasicSystemConfig<Scalar>& config, Scalar bandwidth,
                                    int bits) {
  if (config.users < 1) {
    throw Error(ErrorCode::InvalidArgument, "link budget: K must be a positive integer");
  }
  if (!(bandwidth > Scalar(0))) {
    throw Error(ErrorCode::InvalidArgument, "link budget: bandwidth must be positive");
  }
  BasicLinkBudget<Scalar> budget;
  budget.power = config.received_power();
  budget.interference = Scalar(config.users) * budget.power / bandwidth;
  budget.received_power = budget.interference + config.noise_variance;
  budget.agc_gain = Scalar(1) / budget.received_power;
  budget.distortion = quantization_distortion_variance(bits, config.quant_range);
  return budget;
}

template <typename Scalar>
Scalar reference_snr_to_power(const BasicSystemConfig<Scalar>& config, Scalar snr_db) {
  using std::isfinite;
  if (!isfinite(snr_db)) {
    throw Error(ErrorCode::InvalidArgument, "reference SNR must be finite");
  }
  return detail::power_for_reference_snr(snr_db, config.noise_variance, config.cell_radius_km,
                                         config.pathloss_intercept_db, config.pathloss_slope);
}

/// Inverse of reference_snr_to_power for the config's current P_max.
template <typename Scalar>
Scalar reference_snr_db(const BasicSystemConfig<Scalar>& config) {
  using std::log10;
  return Scalar(10) * log10(config.max_power * config.edge_gain() /
                            (Scalar(1e6) * config.noise_variance));
}

}  // namespace fhopt
