#pragma once

// Link-level Monte Carlo simulator for the quantized uplink: multipath channel
// draws, cyclically shifted pilots, AGC, ADC quantization (true midrise
// quantizer or its additive-noise surrogate), LMMSE estimation, MRC in the
// frequency domain and the use-and-then-forget rate statistic.
//
// Sample-domain convention: after AGC every complex sample is scaled by
// sqrt(mu) = 1/sqrt(P_rx), so the signal has unit power. The ADC itself sees
// each real component normalized to unit variance (gain sqrt(2 mu)); its
// distortion E per real component is therefore a distortion of E per complex
// sample relative to unit power once mapped back, which is what the SINQR's
// P_rx E term describes.

#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fhopt/sysmodel.hpp"

namespace fhopt::mc {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// ---------------------------------------------------------------------------
// Reproducible random substreams

enum class Stream : std::uint64_t {
  Users = 1,
  Channel = 2,
  PilotNoise = 3,
  Symbols = 4,
  DataNoise = 5,
  Quantization = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Engine for one (seed, trial, purpose) triple. Streams never depend on the
/// order in which trials are scheduled.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t trial, Stream purpose) {
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ splitmix64(trial));
  key = splitmix64(key ^ static_cast<std::uint64_t>(purpose));
  return std::mt19937_64(key);
}

/// Matrix of i.i.d. CN(0, variance) entries.
CMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, double variance,
                         std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Channel

class PowerDelayProfile {
 public:
  /// Renormalizes `variances` to sum to one.
  explicit PowerDelayProfile(Eigen::VectorXd variances);

  static PowerDelayProfile uniform(int taps);
  /// sigma^2[l] proportional to exp(-l / decay_taps).
  static PowerDelayProfile exponential(int taps, double decay_taps);

  const Eigen::VectorXd& variances() const { return variances_; }
  int taps() const { return static_cast<int>(variances_.size()); }

 private:
  Eigen::VectorXd variances_;
};

struct ChannelRealization {
  std::vector<CMatrix> small_scale;  // per tap l: M x K matrix of h_mk[l]
  Eigen::VectorXd gains;             // beta_k
  Eigen::VectorXd amplitudes;        // sqrt(beta_k P_k), per sample

  /// g_mk[l] = sqrt(beta_k) h_mk[l] for one tap.
  CMatrix taps(int tap) const;
};

/// Users uniform on the cell disk (10 m exclusion), channel inversion power,
/// h_mk[l] ~ CN(0, sigma^2[l]). power_scale multiplies every transmit power.
ChannelRealization draw_channel(const SystemConfig& config, const DesignPoint& design,
                                const PowerDelayProfile& profile, std::mt19937_64& user_rng,
                                std::mt19937_64& channel_rng, double power_scale = 1.0);

// ---------------------------------------------------------------------------
// Pilots

struct PilotMatrix {
  CMatrix symbols;  // K x N_p, unit modulus
  int stride = 0;   // cyclic shift between consecutive users

  int users() const { return static_cast<int>(symbols.rows()); }
  int length() const { return static_cast<int>(symbols.cols()); }

  /// K x N_p matrix whose (k, n) entry is phi_k[(n - lag) mod N_p].
  CMatrix delayed(int lag) const;
};

/// Cyclic shifts (stride floor(N_p/K) >= L) of a Zadoff-Chu root with ideal
/// periodic autocorrelation.
PilotMatrix generate_pilots(int users, int taps, int length);

/// Received pilot block Y = sum_l G_l diag(a) Phi_l + Z, an M x N_p matrix.
CMatrix receive_pilots(const ChannelRealization& channel, const PilotMatrix& pilots,
                       double noise_variance, std::mt19937_64& noise_rng);

/// r_l = Y Phi_l^H / sqrt(N_p), one M x K matrix per tap.
std::vector<CMatrix> correlate_pilots(const CMatrix& received, const PilotMatrix& pilots,
                                      int taps);

// ---------------------------------------------------------------------------
// Quantization

enum class QuantizerMode { Uniform, Pqn };

const char* to_string(QuantizerMode mode);
QuantizerMode parse_quantizer_mode(const std::string& name);

/// b-bit midrise quantizer on [-range, range]: step 2 range / 2^b, saturating
/// at +-(range - step/2).
double quantize_midrise(double value, int bits, double range);

struct QuantizedBlock {
  CMatrix samples;  // unit-power domain, see the header comment
  std::size_t clipped = 0;
  std::size_t components = 0;

  double clip_rate() const {
    return components == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(components);
  }
};

/// AGC with gain agc_gain followed by per-component quantization. Uniform mode
/// runs the midrise quantizer, Pqn mode adds independent uniform noise of
/// variance E per real component. Clipping counts |input| > range.
QuantizedBlock quantize_block(const CMatrix& received, int bits, double agc_gain, double range,
                              QuantizerMode mode, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Estimation and combining

struct ChannelEstimate {
  std::vector<CMatrix> taps;  // per tap: M x K estimates of h_mk[l]
  Eigen::VectorXd tap_quality;  // d[l]
};

/// Per-tap LMMSE scaling of the correlated pilots. `power_scale` must match
/// the one used to draw the channel.
ChannelEstimate lmmse_estimate(const std::vector<CMatrix>& correlated, const SystemConfig& config,
                               const DesignPoint& design, const PowerDelayProfile& profile,
                               double agc_gain, double power_scale = 1.0);

/// (M K) x n frequency responses of a tap set; row m + M k holds sum_l h_mk[l] e^{-j2pi v l/n}.
CMatrix frequency_response(const std::vector<CMatrix>& taps, int length);

/// Unitary DFT of every row.
CMatrix dft_rows(const CMatrix& time);

/// MRC with weights conj(H_hat_mk[v]): x_hat_k[v] = sum_m w_km[v] Y_m[v],
/// returned as a K x N_d frequency-domain matrix.
CMatrix mrc_combine(const CMatrix& quantized, const std::vector<CMatrix>& estimate);

/// Same combiner applied as length-N_d circular FIR filters in time; returns
/// K x N_d time-domain outputs. dft_rows() of the result equals mrc_combine().
CMatrix mrc_combine_fir(const CMatrix& quantized, const std::vector<CMatrix>& estimate);

// ---------------------------------------------------------------------------
// Blocks and the empirical rate

struct McOptions {
  QuantizerMode mode = QuantizerMode::Pqn;
  /// Uniform profile with L taps when empty.
  std::optional<PowerDelayProfile> profile;
  /// Per-block AGC gain 1 / mean|y|^2 instead of the analytic 1 / P_rx.
  bool empirical_agc = false;
  double power_scale = 1.0;
  unsigned threads = 0;  // 0: hardware concurrency
  int batches = 20;
  /// Largest tolerated standard error of ln(1 + gamma).
  double stability_bound = 0.25;
};

struct McBlock {
  ChannelRealization channel;
  CMatrix pilot_received;             // M x N_p
  QuantizedBlock pilot_quantized;
  ChannelEstimate estimate;
  std::vector<CMatrix> estimation_error;  // h - h_hat per tap
  CMatrix symbols;                    // K x N_d, time domain
  CMatrix symbols_freq;               // K x N_d, unitary DFT
  CMatrix received;                   // M x N_d
  QuantizedBlock quantized;
  CMatrix combined;                   // K x N_d, frequency domain
  double agc_gain = 0;
};

/// One coherence block of trial `trial`.
McBlock run_block(const SystemConfig& config, const DesignPoint& design, const PilotMatrix& pilots,
                  const McOptions& options, std::uint64_t seed, std::uint64_t trial);

struct McResult {
  double rate_bps = 0;          // per-user average of B_w (N_d/N) log2(1 + gamma_k)
  double rate_stderr_bps = 0;   // batch-means standard error, NaN with one batch
  double sinqr = 0;             // per-user average of gamma_k
  double sinqr_stderr = 0;
  Eigen::VectorXd user_sinqr;
  double clip_rate = 0;
  int trials = 0;
};

/// Sample-mean version of the use-and-then-forget bound. The interference
/// term is estimated as mean|x_hat - a x|^2 with a = mean(x* x_hat), which has
/// the same expectation as E|x_hat|^2 - |E[x* x_hat]|^2 for unit-power symbols.
/// Trials are reduced in index order, so results do not depend on threads.
McResult empirical_rate(const SystemConfig& config, const DesignPoint& design, int trials,
                        std::uint64_t seed, const McOptions& options = {});

}  // namespace fhopt::mc
