#pragma once

// Fronthaul-constrained rate maximization over (B_w, M, b).
//
// On the constraint curve B_w M b = C_f the search is one-dimensional: with the
// effective capacity C = C_f / b, the auxiliary variable s in (1/C, 1] maps to
// M = 1/s and B_w = C s. In normalized units (powers divided by N_0, p = P/N_0)
//
//   R(s)  = upsilon s ln(1 + omega(s)),        upsilon = N_d C / (N ln 2)
//   omega = (p^2 N_p / L) / (s D(s))
//   D(s)  = tau(s) + (1+E)^2 (K p + C s)^2
//   tau   = (theta - 1) K p (K p + C s) (1+E)
//
// and omega(s) is exactly the SINQR of the design (C s, 1/s, b).

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fhopt/linkrate.hpp"
#include "fhopt/sysmodel.hpp"

namespace fhopt {

template <typename Scalar>
struct BasicThresholdTerms {
  Scalar alpha;        // b / (b+1)
  Scalar distortion;   // E(b)
  Scalar numerator;    // alpha (-1 - E/4 + 1/sqrt(alpha) + E/sqrt(alpha))
  Scalar denominator;  // 1 + E/4 - sqrt(alpha) - E sqrt(alpha)

  Scalar value() const { return numerator / denominator; }
};

template <typename Scalar>
BasicThresholdTerms<Scalar> threshold_terms(int bits, Scalar range) {
  using std::sqrt;
  BasicThresholdTerms<Scalar> t;
  t.distortion = quantization_distortion_variance(bits, range);
  t.alpha = Scalar(bits) / Scalar(bits + 1);
  const Scalar root = sqrt(t.alpha);
  const Scalar e = t.distortion;
  t.numerator = t.alpha * (Scalar(-1) - e / Scalar(4) + Scalar(1) / root + e / root);
  t.denominator = Scalar(1) + e / Scalar(4) - root - e * root;
  return t;
}

/// Interference-to-noise level above which trading one ADC bit for bandwidth
/// (M fixed) is guaranteed to raise the rate.
template <typename Scalar>
Scalar threshold_f(int bits, Scalar range) {
  return threshold_terms(bits, range).value();
}

/// KP/(B_w N_0) > f(b), strict. The theta = 1 threshold is used for every
/// theta; larger theta only lowers the true threshold, so this stays sufficient.
template <typename Scalar>
bool bandwidth_condition(const BasicSystemConfig<Scalar>& config,
                         const BasicDesignPoint<Scalar>& design) {
  const auto budget = link_budget(config, design.bandwidth, design.bits);
  return budget.interference / config.noise_variance > threshold_f(design.bits, config.quant_range);
}

/// Fixed bandwidth: 1-bit ADCs on as many antennas as the fronthaul allows.
template <typename Scalar>
BasicDesignPoint<Scalar> lemma1_optimum(const BasicSystemConfig<Scalar>& config, Scalar bandwidth) {
  using std::floor;
  if (config.pilot_excess < Scalar(1)) {
    throw Error(ErrorCode::ThetaTooSmall,
                "lemma 1 needs theta >= 1; use fixed_bandwidth_optimum instead");
  }
  if (!(bandwidth > Scalar(0))) {
    throw Error(ErrorCode::InvalidArgument, "lemma 1: bandwidth must be positive");
  }
  const Scalar antennas = floor(config.fronthaul_capacity / bandwidth);
  if (antennas < Scalar(1)) {
    throw Error(ErrorCode::Infeasible, "lemma 1: C_f / B_w leaves no antenna");
  }
  return {bandwidth, static_cast<int>(antennas), 1};
}

/// Exhaustive search over b in [1, max_bits] with M = floor(C_f / (B_w b)).
/// Ties go to the smaller b.
template <typename Scalar>
BasicDesignPoint<Scalar> fixed_bandwidth_optimum(const BasicSystemConfig<Scalar>& config,
                                                 Scalar bandwidth, int max_bits = 12) {
  using std::floor;
  std::optional<BasicDesignPoint<Scalar>> best;
  Scalar best_rate = Scalar(-1);
  for (int b = 1; b <= max_bits; ++b) {
    const Scalar antennas = floor(config.fronthaul_capacity / (bandwidth * Scalar(b)));
    if (antennas < Scalar(1)) break;
    const BasicDesignPoint<Scalar> candidate{bandwidth, static_cast<int>(antennas), b};
    const Scalar rate = achievable_rate(config, candidate).rate_bps;
    if (rate > best_rate) {
      best_rate = rate;
      best = candidate;
    }
  }
  if (!best) throw Error(ErrorCode::Infeasible, "fixed bandwidth: no feasible design");
  return *best;
}

/// Fixed antenna count: (C_f/M, M, 1) when the bandwidth condition holds at
/// that point, nothing otherwise (the condition is only sufficient).
template <typename Scalar>
std::optional<BasicDesignPoint<Scalar>> lemma2_optimum(const BasicSystemConfig<Scalar>& config,
                                                       int antennas) {
  if (antennas < 1) throw Error(ErrorCode::InvalidArgument, "lemma 2: M must be >= 1");
  const BasicDesignPoint<Scalar> candidate{config.fronthaul_capacity / Scalar(antennas), antennas, 1};
  if (!bandwidth_condition(config, candidate)) return std::nullopt;
  return candidate;
}

template <typename Scalar>
struct BasicSearchState {
  Scalar s = 0;
  Scalar capacity = 0;   // C = C_f / b
  Scalar upsilon = 0;    // N_d C / (N ln 2)
  Scalar tau = 0;        // W^2
  Scalar omega = 0;      // SINQR at (C s, 1/s, b)
  Scalar omega_dot = 0;  // d omega / ds
  Scalar alpha = 0;      // b / (b+1)
  Scalar rate = 0;       // R(s), bit/s
  Scalar derivative = 0; // dR/ds
  int bits = 1;

  Scalar relaxed_antennas() const { return Scalar(1) / s; }
  Scalar relaxed_bandwidth() const { return capacity * s; }
};

using SearchState = BasicSearchState<double>;

/// Lower (exclusive) and upper (inclusive) end of the s-domain for b bits.
template <typename Scalar>
std::pair<Scalar, Scalar> s_domain(const BasicSystemConfig<Scalar>& config, int bits) {
  return {Scalar(bits) / config.fronthaul_capacity, Scalar(1)};
}

template <typename Scalar>
BasicSearchState<Scalar> search_state(const BasicSystemConfig<Scalar>& config, Scalar s,
                                      int bits) {
  using std::log1p;
  const auto [lo, hi] = s_domain(config, bits);
  if (!(s > lo && s <= hi)) {
    throw Error(ErrorCode::DomainError, "rate_of_s: s = " + std::to_string(double(s)) +
                                            " outside (" + std::to_string(double(lo)) + ", 1]");
  }
  const Scalar e = quantization_distortion_variance(bits, config.quant_range);
  const Scalar theta = config.effective_pilot_excess();
  const Scalar p = config.received_power() / config.noise_variance;
  const Scalar interference = Scalar(config.users) * p;
  const Scalar c = config.fronthaul_capacity / Scalar(bits);
  const Scalar load = interference + c * s;
  const Scalar signal = p * p * Scalar(config.pilot_length()) / Scalar(config.taps);

  const Scalar tau = (theta - Scalar(1)) * interference * load * (Scalar(1) + e);
  const Scalar denom = tau + (Scalar(1) + e) * (Scalar(1) + e) * load * load;
  const Scalar denom_ds = (theta - Scalar(1)) * interference * c * (Scalar(1) + e) +
                          Scalar(2) * (Scalar(1) + e) * (Scalar(1) + e) * load * c;

  BasicSearchState<Scalar> st;
  st.s = s;
  st.bits = bits;
  st.capacity = c;
  st.alpha = Scalar(bits) / Scalar(bits + 1);
  st.upsilon = Scalar(config.data_length()) * c /
               (Scalar(config.block_length) * std::numbers::ln2_v<Scalar>);
  st.tau = tau * config.noise_variance * config.noise_variance;
  st.omega = signal / (s * denom);
  st.omega_dot = -signal * (denom + s * denom_ds) / ((s * denom) * (s * denom));
  st.rate = st.upsilon * s * log1p(st.omega);
  st.derivative =
      st.upsilon * log1p(st.omega) + st.upsilon * s * st.omega_dot / (Scalar(1) + st.omega);
  return st;
}

template <typename Scalar>
Scalar rate_of_s(const BasicSystemConfig<Scalar>& config, Scalar s, int bits) {
  return search_state(config, s, bits).rate;
}

template <typename Scalar>
Scalar rate_of_s_derivative(const BasicSystemConfig<Scalar>& config, Scalar s, int bits) {
  return search_state(config, s, bits).derivative;
}

/// Maximizer of R(s) by bisection on the sign of dR/ds. R is unimodal on its
/// domain (its derivative changes sign at most once), so the bracket always
/// holds the maximizer. Returns an end point when the sign never changes.
template <typename Scalar>
BasicSearchState<Scalar> maximize_over_s(const BasicSystemConfig<Scalar>& config, int bits,
                                         Scalar tolerance = Scalar(1e-10)) {
  using std::min;
  const auto [domain_lo, hi] = s_domain(config, bits);
  if (!(domain_lo < hi)) {
    throw Error(ErrorCode::Infeasible, "s-search: C_f / b below 1 antenna-Hz");
  }
  const auto upper = search_state(config, hi, bits);
  if (upper.derivative >= Scalar(0)) return upper;

  Scalar lo = domain_lo + min(tolerance, (hi - domain_lo) / Scalar(2));
  if (search_state(config, lo, bits).derivative <= Scalar(0)) return search_state(config, lo, bits);

  Scalar up = hi;
  while (up - lo > tolerance) {
    const Scalar mid = lo + (up - lo) / Scalar(2);
    if (search_state(config, mid, bits).derivative > Scalar(0)) {
      lo = mid;
    } else {
      up = mid;
    }
  }
  return search_state(config, lo + (up - lo) / Scalar(2), bits);
}

/// Pade-approximant test for the region where growing B_w (shrinking M) helps:
/// KP/(B_w N_0) > 4 (1+E)^2 (KP + B_w N_0)^2 L / (M P^2 N_p) + 1.
template <typename Scalar>
bool pade_bandwidth_condition(const BasicSystemConfig<Scalar>& config,
                              const BasicDesignPoint<Scalar>& design) {
  const Scalar e = quantization_distortion_variance(design.bits, config.quant_range);
  const Scalar p = config.received_power() / config.noise_variance;
  const Scalar interference = Scalar(config.users) * p;
  const Scalar load = interference + design.bandwidth;
  const Scalar rhs = Scalar(4) * (Scalar(1) + e) * (Scalar(1) + e) * load * load *
                         Scalar(config.taps) /
                         (Scalar(design.antennas) * p * p * Scalar(config.pilot_length())) +
                     Scalar(1);
  return interference / design.bandwidth > rhs;
}

/// Upper-bound test for the region where growing M (shrinking B_w) helps:
/// M < 4 (1+E)^2 (KP + B_w N_0) B_w N_0 L / (P^2 N_p).
template <typename Scalar>
bool antenna_condition(const BasicSystemConfig<Scalar>& config,
                       const BasicDesignPoint<Scalar>& design) {
  const Scalar e = quantization_distortion_variance(design.bits, config.quant_range);
  const Scalar p = config.received_power() / config.noise_variance;
  const Scalar load = Scalar(config.users) * p + design.bandwidth;
  const Scalar bound = Scalar(4) * (Scalar(1) + e) * (Scalar(1) + e) * load * design.bandwidth *
                       Scalar(config.taps) / (p * p * Scalar(config.pilot_length()));
  return Scalar(design.antennas) < bound;
}

/// theta >= 1 and the bandwidth condition holds at the relaxed 1-bit optimum
/// of the constraint curve; then b* = 1 and the search can skip b > 1.
template <typename Scalar>
bool theorem1_applies(const BasicSystemConfig<Scalar>& config) {
  using std::lround;
  using std::max;
  if (config.pilot_excess < Scalar(1)) return false;
  const auto st = maximize_over_s(config, 1);
  const int antennas = static_cast<int>(max(1L, lround(static_cast<double>(st.relaxed_antennas()))));
  return bandwidth_condition(config, BasicDesignPoint<Scalar>{st.relaxed_bandwidth(), antennas, 1});
}

struct TraceEntry {
  DesignPoint design;
  RateBreakdown rate;
};

struct OptimizationResult {
  DesignPoint best;
  RateBreakdown rate;
  SearchState relaxed;            // continuous optimum for best.bits
  std::vector<TraceEntry> trace;  // every integer design evaluated
  std::vector<int> searched_bits;
  bool binding = false;           // B_w M b == C_f at the optimum
  bool theorem1 = false;
};

struct OptimizeOptions {
  int max_bits = 12;
};

/// Integer optimum of the fronthaul-constrained problem. With theorem 1 in
/// force only b = 1 is searched, otherwise every b up to max_bits. Each b gets
/// the continuous s-optimum refined over the five nearest integer M.
OptimizationResult optimize_full(const SystemConfig& config, const OptimizeOptions& options = {});

}  // namespace fhopt
