#include "fhopt/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include <unsupported/Eigen/FFT>

namespace fhopt::mc {

namespace {

Eigen::Index wrap(Eigen::Index index, Eigen::Index length) {
  const Eigen::Index r = index % length;
  return r < 0 ? r + length : r;
}

// (k, n) -> x(k, (n - lag) mod n_cols)
CMatrix circular_delay(const CMatrix& x, int lag) {
  const Eigen::Index n = x.cols();
  CMatrix out(x.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) out.col(c) = x.col(wrap(c - lag, n));
  return out;
}

}  // namespace

CMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, double variance,
                         std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  CMatrix out(rows, cols);
  // Column-major fill keeps the draw order fixed.
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      out(r, c) = Complex(re, im);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

PowerDelayProfile::PowerDelayProfile(Eigen::VectorXd variances) : variances_(std::move(variances)) {
  if (variances_.size() == 0) {
    throw Error(ErrorCode::InvalidArgument, "power delay profile: no taps");
  }
  if ((variances_.array() < 0.0).any() || !variances_.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "power delay profile: negative or non-finite tap");
  }
  const double total = variances_.sum();
  if (!(total > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "power delay profile: all taps are zero");
  }
  variances_ /= total;
}

PowerDelayProfile PowerDelayProfile::uniform(int taps) {
  if (taps < 1) throw Error(ErrorCode::InvalidArgument, "power delay profile: taps must be >= 1");
  return PowerDelayProfile(Eigen::VectorXd::Constant(taps, 1.0));
}

PowerDelayProfile PowerDelayProfile::exponential(int taps, double decay_taps) {
  if (taps < 1) throw Error(ErrorCode::InvalidArgument, "power delay profile: taps must be >= 1");
  if (!(decay_taps > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "power delay profile: decay must be positive");
  }
  Eigen::VectorXd v(taps);
  for (int l = 0; l < taps; ++l) v(l) = std::exp(-l / decay_taps);
  return PowerDelayProfile(std::move(v));
}

CMatrix ChannelRealization::taps(int tap) const {
  return small_scale.at(tap) * gains.cwiseSqrt().asDiagonal();
}

ChannelRealization draw_channel(const SystemConfig& config, const DesignPoint& design,
                                const PowerDelayProfile& profile, std::mt19937_64& user_rng,
                                std::mt19937_64& channel_rng, double power_scale) {
  if (profile.taps() != config.taps) {
    throw Error(ErrorCode::InvalidArgument, "draw_channel: profile length must equal L");
  }
  if (design.antennas < 1) throw Error(ErrorCode::InvalidArgument, "draw_channel: M must be >= 1");
  const int users = config.users;
  ChannelRealization ch;
  ch.gains.resize(users);
  ch.amplitudes.resize(users);

  const double outer = config.cell_radius_km;
  const double inner = std::min(0.01, outer / 2.0);
  std::uniform_real_distribution<double> area(inner * inner, outer * outer);
  for (int k = 0; k < users; ++k) {
    const double distance = std::sqrt(area(user_rng));
    const double gain = std::max(config.edge_gain(),
                                 pathloss_linear(distance, config.pathloss_intercept_db,
                                                 config.pathloss_slope));
    const double power = power_scale * channel_inversion_power(config, design.bandwidth, gain);
    ch.gains(k) = gain;
    ch.amplitudes(k) = std::sqrt(gain * power);
  }

  ch.small_scale.reserve(config.taps);
  for (int l = 0; l < config.taps; ++l) {
    ch.small_scale.push_back(
        complex_gaussian(design.antennas, users, profile.variances()(l), channel_rng));
  }
  return ch;
}

// ---------------------------------------------------------------------------

CMatrix PilotMatrix::delayed(int lag) const { return circular_delay(symbols, lag); }

PilotMatrix generate_pilots(int users, int taps, int length) {
  if (users < 1 || taps < 1) {
    throw Error(ErrorCode::InvalidArgument, "pilots: K and L must be >= 1");
  }
  if (static_cast<long>(length) < static_cast<long>(users) * taps) {
    throw Error(ErrorCode::InvalidArgument, "pilots: N_p must be at least K L");
  }
  // Zadoff-Chu root u = 1: exp(-j pi n (n + N_p mod 2) / N_p). The phase is
  // reduced modulo 2 N_p in integer arithmetic before scaling.
  const long n_p = length;
  const long parity = n_p % 2;
  CVector root(length);
  for (long n = 0; n < n_p; ++n) {
    const long phase = (n * (n + parity)) % (2 * n_p);
    const double angle = -std::numbers::pi * static_cast<double>(phase) / static_cast<double>(n_p);
    root(n) = std::polar(1.0, angle);
  }

  PilotMatrix pilots;
  pilots.stride = length / users;
  pilots.symbols.resize(users, length);
  for (int k = 0; k < users; ++k) {
    for (long n = 0; n < n_p; ++n) {
      pilots.symbols(k, n) = root(wrap(n - static_cast<long>(k) * pilots.stride, n_p));
    }
  }
  return pilots;
}

CMatrix receive_pilots(const ChannelRealization& channel, const PilotMatrix& pilots,
                       double noise_variance, std::mt19937_64& noise_rng) {
  const Eigen::Index antennas = channel.small_scale.front().rows();
  CMatrix y = complex_gaussian(antennas, pilots.length(), noise_variance, noise_rng);
  for (std::size_t l = 0; l < channel.small_scale.size(); ++l) {
    y.noalias() += channel.small_scale[l] * channel.amplitudes.asDiagonal() *
                   pilots.delayed(static_cast<int>(l));
  }
  return y;
}

std::vector<CMatrix> correlate_pilots(const CMatrix& received, const PilotMatrix& pilots,
                                      int taps) {
  const double norm = 1.0 / std::sqrt(static_cast<double>(pilots.length()));
  std::vector<CMatrix> out;
  out.reserve(taps);
  for (int l = 0; l < taps; ++l) {
    out.push_back(norm * received * pilots.delayed(l).adjoint());
  }
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(QuantizerMode mode) {
  return mode == QuantizerMode::Uniform ? "uniform" : "pqn";
}

QuantizerMode parse_quantizer_mode(const std::string& name) {
  if (name == "uniform") return QuantizerMode::Uniform;
  if (name == "pqn") return QuantizerMode::Pqn;
  throw Error(ErrorCode::InvalidArgument, "unknown quantizer mode '" + name + "'");
}

double quantize_midrise(double value, int bits, double range) {
  if (bits < 1 || bits > 52) {
    throw Error(ErrorCode::InvalidArgument, "quantizer: bits must be in [1, 52]");
  }
  const double levels = std::ldexp(1.0, bits);
  const double step = 2.0 * range / levels;
  const double index = std::clamp(std::floor(value / step), -levels / 2.0, levels / 2.0 - 1.0);
  return (index + 0.5) * step;
}

QuantizedBlock quantize_block(const CMatrix& received, int bits, double agc_gain, double range,
                              QuantizerMode mode, std::mt19937_64& rng) {
  if (bits < 1) throw Error(ErrorCode::InvalidArgument, "quantizer: bits must be >= 1");
  if (!(agc_gain > 0.0) || !(range > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "quantizer: gain and range must be positive");
  }
  const double adc_gain = std::sqrt(2.0 * agc_gain);
  const double back = 1.0 / std::sqrt(2.0);
  const double half_width = std::sqrt(3.0 * quantization_distortion_variance(bits, range));
  std::uniform_real_distribution<double> dither(-half_width, half_width);

  QuantizedBlock out;
  out.samples.resize(received.rows(), received.cols());
  out.components = static_cast<std::size_t>(2 * received.size());
  for (Eigen::Index c = 0; c < received.cols(); ++c) {
    for (Eigen::Index r = 0; r < received.rows(); ++r) {
      const double re = adc_gain * received(r, c).real();
      const double im = adc_gain * received(r, c).imag();
      out.clipped += (std::abs(re) > range) + (std::abs(im) > range);
      double qre, qim;
      if (mode == QuantizerMode::Uniform) {
        qre = quantize_midrise(re, bits, range);
        qim = quantize_midrise(im, bits, range);
      } else {
        qre = re + dither(rng);
        qim = im + dither(rng);
      }
      out.samples(r, c) = back * Complex(qre, qim);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

ChannelEstimate lmmse_estimate(const std::vector<CMatrix>& correlated, const SystemConfig& config,
                               const DesignPoint& design, const PowerDelayProfile& profile,
                               double agc_gain, double power_scale) {
  if (static_cast<int>(correlated.size()) != profile.taps()) {
    throw Error(ErrorCode::InvalidArgument, "lmmse: one correlation per tap required");
  }
  const double distortion = quantization_distortion_variance(design.bits, config.quant_range);
  // beta_k P_k N_p mu, identical across users under channel inversion.
  const double pilot_gain = power_scale * config.received_power() / design.bandwidth *
                            config.pilot_length() * agc_gain;
  const double floor = distortion + agc_gain * config.noise_variance;

  ChannelEstimate est;
  est.tap_quality.resize(profile.taps());
  est.taps.reserve(profile.taps());
  for (int l = 0; l < profile.taps(); ++l) {
    const double variance = profile.variances()(l);
    const double denom = pilot_gain * variance + floor;
    est.tap_quality(l) = pilot_gain * variance / denom;
    est.taps.push_back((std::sqrt(pilot_gain) * variance / denom) * correlated[l]);
  }
  return est;
}

CMatrix frequency_response(const std::vector<CMatrix>& taps, int length) {
  const Eigen::Index antennas = taps.front().rows();
  const Eigen::Index users = taps.front().cols();
  const int tap_count = static_cast<int>(taps.size());
  CMatrix stacked(antennas * users, tap_count);
  for (int l = 0; l < tap_count; ++l) {
    stacked.col(l) = taps[l].reshaped();  // column-major: row m + M k
  }
  CMatrix twiddle(tap_count, length);
  for (int l = 0; l < tap_count; ++l) {
    for (int v = 0; v < length; ++v) {
      const long phase = (static_cast<long>(v) * l) % length;
      twiddle(l, v) = std::polar(1.0, -2.0 * std::numbers::pi * phase / length);
    }
  }
  return stacked * twiddle;
}

CMatrix dft_rows(const CMatrix& time) {
  Eigen::FFT<double> fft;
  const double norm = 1.0 / std::sqrt(static_cast<double>(time.cols()));
  CMatrix out(time.rows(), time.cols());
  CVector in(time.cols());
  CVector spectrum(time.cols());
  for (Eigen::Index r = 0; r < time.rows(); ++r) {
    in = time.row(r).transpose();
    fft.fwd(spectrum, in);
    out.row(r) = norm * spectrum.transpose();
  }
  return out;
}

CMatrix mrc_combine(const CMatrix& quantized, const std::vector<CMatrix>& estimate) {
  // conj(H_hat[v]) Y[v] summed over antennas. The phase ramp e^{+j2pi v l/n}
  // of tap l is a circular advance by l in time, so the per-tap combination
  // is formed in time and only the K output rows are transformed.
  const Eigen::Index length = quantized.cols();
  const Eigen::Index users = estimate.front().cols();
  CMatrix time = CMatrix::Zero(users, length);
  for (std::size_t l = 0; l < estimate.size(); ++l) {
    const CMatrix projected = estimate[l].adjoint() * quantized;
    const Eigen::Index lag = static_cast<Eigen::Index>(l) % length;
    time.leftCols(length - lag) += projected.rightCols(length - lag);
    if (lag > 0) time.rightCols(lag) += projected.leftCols(lag);
  }
  return dft_rows(time);
}

CMatrix mrc_combine_fir(const CMatrix& quantized, const std::vector<CMatrix>& estimate) {
  const Eigen::Index antennas = quantized.rows();
  const Eigen::Index length = quantized.cols();
  const Eigen::Index users = estimate.front().cols();
  const CMatrix weights = frequency_response(estimate, static_cast<int>(length)).conjugate();

  Eigen::FFT<double> fft;
  CVector spectrum(length);
  CVector impulse(length);
  CMatrix out = CMatrix::Zero(users, length);
  for (Eigen::Index k = 0; k < users; ++k) {
    for (Eigen::Index m = 0; m < antennas; ++m) {
      // w_km[l] = (1/N_d) sum_v W_km[v] e^{j 2 pi v l / N_d}
      spectrum = weights.row(m + antennas * k).transpose();
      fft.inv(impulse, spectrum);
      for (Eigen::Index n = 0; n < length; ++n) {
        Complex acc = 0.0;
        for (Eigen::Index l = 0; l < length; ++l) {
          acc += impulse(l) * quantized(m, wrap(n - l, length));
        }
        out(k, n) += acc;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

McBlock run_block(const SystemConfig& config, const DesignPoint& design, const PilotMatrix& pilots,
                  const McOptions& options, std::uint64_t seed, std::uint64_t trial) {
  const PowerDelayProfile profile =
      options.profile ? *options.profile : PowerDelayProfile::uniform(config.taps);
  auto user_rng = substream(seed, trial, Stream::Users);
  auto channel_rng = substream(seed, trial, Stream::Channel);
  auto pilot_noise_rng = substream(seed, trial, Stream::PilotNoise);
  auto symbol_rng = substream(seed, trial, Stream::Symbols);
  auto data_noise_rng = substream(seed, trial, Stream::DataNoise);
  auto quant_rng = substream(seed, trial, Stream::Quantization);

  McBlock block;
  block.channel = draw_channel(config, design, profile, user_rng, channel_rng, options.power_scale);
  block.pilot_received = receive_pilots(block.channel, pilots, config.noise_variance, pilot_noise_rng);

  const int data = config.data_length();
  block.symbols = complex_gaussian(config.users, data, 1.0, symbol_rng);
  block.received = complex_gaussian(design.antennas, data, config.noise_variance, data_noise_rng);
  for (int l = 0; l < config.taps; ++l) {
    block.received.noalias() += block.channel.small_scale[l] *
                                block.channel.amplitudes.asDiagonal() *
                                circular_delay(block.symbols, l);
  }

  if (options.empirical_agc) {
    const double power = (block.pilot_received.squaredNorm() + block.received.squaredNorm()) /
                         static_cast<double>(block.pilot_received.size() + block.received.size());
    block.agc_gain = 1.0 / power;
  } else {
    const double received = options.power_scale * config.users * config.received_power() /
                                design.bandwidth +
                            config.noise_variance;
    block.agc_gain = 1.0 / received;
  }

  block.pilot_quantized = quantize_block(block.pilot_received, design.bits, block.agc_gain,
                                         config.quant_range, options.mode, quant_rng);
  const auto correlated = correlate_pilots(block.pilot_quantized.samples, pilots, config.taps);
  block.estimate = lmmse_estimate(correlated, config, design, profile, block.agc_gain,
                                  options.power_scale);
  block.estimation_error.reserve(config.taps);
  for (int l = 0; l < config.taps; ++l) {
    block.estimation_error.push_back(block.channel.small_scale[l] - block.estimate.taps[l]);
  }

  block.quantized = quantize_block(block.received, design.bits, block.agc_gain, config.quant_range,
                                   options.mode, quant_rng);
  block.symbols_freq = dft_rows(block.symbols);
  block.combined = mrc_combine(block.quantized.samples, block.estimate.taps);
  return block;
}

namespace {

struct TrialSums {
  CVector cross;           // sum x* x_hat, per user
  Eigen::VectorXd output;  // sum |x_hat|^2
  Eigen::VectorXd input;   // sum |x|^2
  std::size_t clipped = 0;
  std::size_t components = 0;
};

TrialSums summarize(const McBlock& block) {
  TrialSums s;
  s.cross = block.symbols_freq.conjugate().cwiseProduct(block.combined).rowwise().sum();
  s.output = block.combined.cwiseAbs2().rowwise().sum();
  s.input = block.symbols_freq.cwiseAbs2().rowwise().sum();
  s.clipped = block.pilot_quantized.clipped + block.quantized.clipped;
  s.components = block.pilot_quantized.components + block.quantized.components;
  return s;
}

// Per-user gamma from accumulated sums over `count` samples.
Eigen::VectorXd sinqr_from_sums(const CVector& cross, const Eigen::VectorXd& output,
                                const Eigen::VectorXd& input, double count) {
  Eigen::VectorXd gamma(cross.size());
  for (Eigen::Index k = 0; k < cross.size(); ++k) {
    const double gain2 = std::norm(cross(k) / count);
    const double residual = output(k) / count - 2.0 * gain2 + gain2 * input(k) / count;
    if (gain2 == 0.0) {
      gamma(k) = 0.0;  // nothing gets through, e.g. zero transmit power
    } else {
      gamma(k) = residual > 0.0 ? gain2 / residual : std::numeric_limits<double>::infinity();
    }
  }
  return gamma;
}

}  // namespace

McResult empirical_rate(const SystemConfig& config, const DesignPoint& design, int trials,
                        std::uint64_t seed, const McOptions& options) {
  config.validate();
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "empirical rate: trials must be >= 1");
  if (design.antennas < 1 || !(design.bandwidth > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "empirical rate: invalid design point");
  }
  const PilotMatrix pilots = generate_pilots(config.users, config.taps, config.pilot_length());

  std::vector<TrialSums> sums(trials);
  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                          : options.threads;
  threads = std::min<unsigned>(threads, static_cast<unsigned>(trials));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int t = next++; t < trials; t = next++) {
      sums[t] = summarize(run_block(config, design, pilots, options, seed, static_cast<std::uint64_t>(t)));
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
  }

  const int users = config.users;
  const int batches = std::clamp(options.batches, 1, trials);
  const double prelog = design.bandwidth * config.data_length() / config.block_length;
  const double per_trial = config.data_length();

  CVector cross = CVector::Zero(users);
  Eigen::VectorXd output = Eigen::VectorXd::Zero(users);
  Eigen::VectorXd input = Eigen::VectorXd::Zero(users);
  std::vector<double> batch_rate;
  std::vector<double> batch_gamma;
  CVector b_cross = CVector::Zero(users);
  Eigen::VectorXd b_output = Eigen::VectorXd::Zero(users);
  Eigen::VectorXd b_input = Eigen::VectorXd::Zero(users);
  int b_trials = 0;
  McResult result;
  result.trials = trials;
  std::size_t clipped = 0;
  std::size_t components = 0;

  for (int t = 0; t < trials; ++t) {
    const TrialSums& s = sums[t];
    cross += s.cross;
    output += s.output;
    input += s.input;
    clipped += s.clipped;
    components += s.components;
    b_cross += s.cross;
    b_output += s.output;
    b_input += s.input;
    ++b_trials;
    const bool batch_ends = t + 1 == trials ||
                            static_cast<long>(t + 1) * batches / trials !=
                                static_cast<long>(t + 2) * batches / trials;
    if (batch_ends) {
      const Eigen::VectorXd g = sinqr_from_sums(b_cross, b_output, b_input, b_trials * per_trial);
      batch_gamma.push_back(g.mean());
      batch_rate.push_back(prelog * g.array().log1p().mean() / std::numbers::ln2);
      b_cross.setZero();
      b_output.setZero();
      b_input.setZero();
      b_trials = 0;
    }
  }

  result.user_sinqr = sinqr_from_sums(cross, output, input, trials * per_trial);
  result.sinqr = result.user_sinqr.mean();
  result.rate_bps = prelog * result.user_sinqr.array().log1p().mean() / std::numbers::ln2;
  result.clip_rate = components == 0 ? 0.0 : static_cast<double>(clipped) / components;

  auto stderr_of = [](const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (n - 1.0) / n);
  };
  result.rate_stderr_bps = stderr_of(batch_rate);
  result.sinqr_stderr = stderr_of(batch_gamma);

  if (std::isfinite(result.sinqr_stderr) &&
      result.sinqr_stderr / (1.0 + result.sinqr) > options.stability_bound) {
    throw Error(ErrorCode::InsufficientTrials,
                "empirical rate: SINQR standard error too large for " + std::to_string(trials) +
                    " trials");
  }
  return result;
}

}  // namespace fhopt::mc
