#include "eprlock/lock_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "eprlock/errors.hpp"
#include "eprlock/estimation.hpp"
#include "eprlock/fft.hpp"
#include "eprlock/kernels.hpp"
#include "eprlock/spectra.hpp"

namespace eprlock::lock {

namespace {

using namespace std::complex_literals;

constexpr double kInLockWindow = 0.5;  // rad

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
  return std::mt19937_64(seq);
}

std::size_t sample_count(double duration, double rate, const char* what) {
  if (!(rate > 0) || !(duration > 0) || !std::isfinite(rate) || !std::isfinite(duration)) {
    throw InvalidInput(std::string(what) + ": duration and rate must be > 0");
  }
  const auto n = static_cast<std::size_t>(std::llround(duration * rate));
  if (n < 2) throw InvalidInput(std::string(what) + ": duration * rate must be >= 2");
  return n;
}

void fill_gaussian(std::mt19937_64& rng, std::span<double> out, double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : out) x = stddev * normal(rng);
}

// Interpolates a residual-phase trace onto t = k / rate, tiling it if short.
std::vector<double> resample(const TimeSeries& trace, std::size_t n, double rate) {
  std::vector<double> out(n, 0.0);
  if (trace.samples.empty()) return out;
  validate(trace);
  const std::size_t m = trace.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double position = static_cast<double>(k) / rate * trace.sample_rate;
    const double base = std::floor(position);
    const double frac = position - base;
    const auto i0 = static_cast<std::size_t>(base) % m;
    const std::size_t i1 = (i0 + 1) % m;
    out[k] = (1.0 - frac) * trace.samples[i0] + frac * trace.samples[i1];
  }
  return out;
}

struct Arm {
  const LoopConfig& config;
  double amplitude;  // |alpha_lo| |A_CL|
  double lock_point;
  OnePoleLowPass lpf;
  ResonantActuator actuator;
  double integral = 0;
  double output = 0;
  bool saturated = false;

  Arm(const LoopConfig& c, double amp_cl, double lock, double rate)
      : config(c),
        amplitude(c.lo_amplitude * amp_cl),
        lock_point(lock),
        lpf(c.lpf_cutoff, rate),
        actuator(c.actuator_resonance, c.actuator_q, rate) {}

  // One sample: returns the demodulated error signal (signal units).
  double step(double theta, double dt) {
    const double bs = sign_value(config.beat_sign);
    const std::complex<double> beat = amplitude * std::exp(1i * (bs * theta));
    const double demodulated = lpf.step((beat * std::exp(1i * config.theta_ref)).imag());
    const double error = bs * demodulated;
    const double normalized = error / amplitude;
    if (!saturated) integral += config.ki * normalized * dt;
    const double command = config.kp * normalized + integral;
    const double position = actuator.step(command);
    saturated = std::abs(position) > config.actuator_range;
    output = std::clamp(position, -config.actuator_range, config.actuator_range);
    return error;
  }
};

}  // namespace

std::vector<std::string> violations(const DisturbanceSpec& spec) {
  std::vector<std::string> out;
  if (!(spec.random_walk_diffusion >= 0) || !(spec.white_noise_density >= 0)) {
    out.emplace_back("disturbance densities must be >= 0");
  }
  if (!std::isfinite(spec.offset) || !std::isfinite(spec.ramp_rate)) out.emplace_back("offset and ramp must be finite");
  for (const auto& s : spec.sinusoids) {
    if (!(s.frequency >= 0) || !std::isfinite(s.amplitude) || !std::isfinite(s.phase)) {
      out.emplace_back("sinusoid terms need frequency >= 0 and finite amplitude/phase");
      break;
    }
  }
  return out;
}

TimeSeries synth_disturbance(const DisturbanceSpec& spec, double duration, double rate) {
  if (auto broken = violations(spec); !broken.empty()) throw InvalidInput(broken.front());
  const std::size_t n = sample_count(duration, rate, "synth_disturbance");
  const double dt = 1.0 / rate;
  TimeSeries out{rate, std::vector<double>(n, 0.0), "rad"};

  // Separate streams keep each term independent of whether the others are on.
  auto walk_rng = stream(spec.rng_seed, 0);
  auto white_rng = stream(spec.rng_seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double walk_step = std::sqrt(spec.random_walk_diffusion * dt);
  const double white_std = std::sqrt(spec.white_noise_density * rate / 2.0);

  double walk = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k > 0 && walk_step > 0) walk += walk_step * normal(walk_rng);
    double x = spec.offset + spec.ramp_rate * t + walk;
    if (white_std > 0) x += white_std * normal(white_rng);
    for (const auto& s : spec.sinusoids) x += s.amplitude * std::sin(kTwoPi * s.frequency * t + s.phase);
    out.samples[k] = x;
  }
  return out;
}

TimeSeries synth_ou_phase(double sigma, double corner, double duration, double rate, std::uint64_t seed) {
  if (!(sigma >= 0) || !(corner > 0)) throw InvalidInput("synth_ou_phase: need sigma >= 0 and corner > 0");
  const std::size_t n = sample_count(duration, rate, "synth_ou_phase");
  const double a = std::exp(-kTwoPi * corner / rate);
  const double kick = sigma * std::sqrt(-std::expm1(-2.0 * kTwoPi * corner / rate));
  auto rng = stream(seed, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  TimeSeries out{rate, std::vector<double>(n), "rad"};
  double x = sigma * normal(rng);
  for (std::size_t k = 0; k < n; ++k) {
    out.samples[k] = x;
    x = a * x + kick * normal(rng);
  }
  return out;
}

double error_signal(double theta, double amp_lo, double amp_cl, double theta_ref, BeatSign beat_sign) {
  if (!(amp_lo >= 0) || !(amp_cl >= 0)) throw InvalidInput("error_signal: amplitudes must be >= 0");
  return amp_lo * amp_cl * std::sin(theta + sign_value(beat_sign) * theta_ref);
}

OnePoleLowPass::OnePoleLowPass(double cutoff, double sample_rate)
    : a_(-std::expm1(-kTwoPi * cutoff / sample_rate)) {
  if (!(cutoff > 0) || !(sample_rate > 0)) throw InvalidInput("low-pass cutoff and sample rate must be > 0");
}

double OnePoleLowPass::step(double x) {
  y_ += a_ * (x - y_);
  return y_;
}

TimeSeries lockin_demodulate(const ComplexSeries& baseband, double theta_ref, double lpf_cutoff) {
  if (!(baseband.sample_rate > 0)) throw InvalidInput("lockin_demodulate: sample_rate must be > 0");
  if (!(lpf_cutoff > 0) || !(lpf_cutoff < baseband.sample_rate / 4)) {
    throw InvalidInput("lockin_demodulate: cutoff must lie in (0, sample_rate/4)");
  }
  OnePoleLowPass lpf(lpf_cutoff, baseband.sample_rate);
  const std::complex<double> rotation = std::exp(1i * theta_ref);
  TimeSeries out{baseband.sample_rate, {}, "signal"};
  out.samples.reserve(baseband.samples.size());
  for (const auto& z : baseband.samples) out.samples.push_back(lpf.step((z * rotation).imag()));
  return out;
}

ResonantActuator::ResonantActuator(double resonance, double q, double sample_rate) {
  if (!(resonance > 0) || !(q > 0) || !(resonance < sample_rate / 2)) {
    throw InvalidInput("actuator: need resonance in (0, Nyquist) and Q > 0");
  }
  const double w0 = kTwoPi * resonance;
  const double k = w0 / std::tan(w0 / (2.0 * sample_rate));
  const double a0 = k * k + w0 * k / q + w0 * w0;
  b0_ = w0 * w0 / a0;
  b1_ = 2.0 * w0 * w0 / a0;
  b2_ = w0 * w0 / a0;
  a1_ = (2.0 * w0 * w0 - 2.0 * k * k) / a0;
  a2_ = (k * k - w0 * k / q + w0 * w0) / a0;
}

double ResonantActuator::step(double command) {
  const double y = b0_ * command + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
  x2_ = x1_;
  x1_ = command;
  y2_ = y1_;
  y1_ = y;
  return y;
}

void ResonantActuator::reset(double value) { x1_ = x2_ = y1_ = y2_ = value; }

std::vector<std::string> violations(const LoopConfig& loop, double omega_cl_offset) {
  std::vector<std::string> out;
  if (!(loop.kp >= 0) || !(loop.ki >= 0)) out.emplace_back("loop gains must be >= 0");
  if (!(loop.lpf_cutoff > 0) || !(loop.lpf_cutoff < omega_cl_offset)) out.emplace_back("lpf_cutoff must lie in (0, omega_cl_offset)");
  if (!(loop.actuator_range > 0)) out.emplace_back("actuator_range must be > 0");
  if (!(loop.actuator_resonance > 0) || !(loop.actuator_q > 0)) out.emplace_back("actuator resonance and Q must be > 0");
  if (!(loop.lo_amplitude > 0)) out.emplace_back("lo_amplitude must be > 0");
  if (!std::isfinite(loop.theta_ref)) out.emplace_back("theta_ref must be finite");
  return out;
}

LockRunResult run_closed_loop(const LoopConfig& loop_s, const LoopConfig& loop_i, const Disturbances& disturbances,
                              const nopo::LockFieldState& lock_fields, double duration, double rate,
                              double omega_cl_offset) {
  for (const auto* loop : {&loop_s, &loop_i}) {
    if (auto broken = violations(*loop, omega_cl_offset); !broken.empty()) throw InvalidInput(broken.front());
    if (rate < 20.0 * loop->lpf_cutoff) throw InvalidInput("run_closed_loop: rate must be >= 20 x lpf_cutoff");
  }
  if (loop_s.beat_sign == loop_i.beat_sign) throw InvalidInput("run_closed_loop: loops need opposite beat signs");
  const double amp_s = std::abs(lock_fields.a_cls);
  const double amp_i = std::abs(lock_fields.a_cli);
  if (!(amp_s > 0) || !(amp_i > 0)) {
    throw InvalidInput("run_closed_loop: a locking field vanishes (epsilon = 0 gives no idler reference)");
  }

  const std::size_t n = sample_count(duration, rate, "run_closed_loop");
  const TimeSeries d_s = synth_disturbance(disturbances.signal, duration, rate);
  const TimeSeries d_i = synth_disturbance(disturbances.idler, duration, rate);
  const TimeSeries d_p = synth_disturbance(disturbances.pump, duration, rate);

  // Lock points: sin(theta_s + ref_s) = 0 and sin(theta_i - ref_i) = 0.
  Arm signal(loop_s, amp_s, -sign_value(loop_s.beat_sign) * loop_s.theta_ref, rate);
  Arm idler(loop_i, amp_i, -sign_value(loop_i.beat_sign) * loop_i.theta_ref, rate);

  LockRunResult result;
  for (TimeSeries* ts : {&result.residual_theta_s, &result.residual_theta_i, &result.common_mode_theta}) {
    *ts = TimeSeries{rate, std::vector<double>(n), "rad"};
  }
  result.error_s = TimeSeries{rate, std::vector<double>(n), "signal"};
  result.error_i = TimeSeries{rate, std::vector<double>(n), "signal"};

  const double dt = 1.0 / rate;
  std::size_t locked = 0;
  bool was_saturated = false;
  for (std::size_t k = 0; k < n; ++k) {
    const double theta_s = signal.lock_point + d_s.samples[k] - signal.output;
    const double theta_i = idler.lock_point + d_i.samples[k] + d_p.samples[k] - idler.output;
    const double residual_s = wrap_phase(theta_s - signal.lock_point);
    const double residual_i = wrap_phase(theta_i - idler.lock_point);
    result.residual_theta_s.samples[k] = residual_s;
    result.residual_theta_i.samples[k] = residual_i;
    result.common_mode_theta.samples[k] = 0.5 * (residual_s + residual_i);

    result.error_s.samples[k] = signal.step(theta_s, dt);
    result.error_i.samples[k] = idler.step(theta_i, dt);

    const bool saturated = signal.saturated || idler.saturated;
    if (saturated && !was_saturated) result.saturation_events.push_back(static_cast<double>(k) * dt);
    was_saturated = saturated;
    if (!saturated && std::abs(residual_s) < kInLockWindow && std::abs(residual_i) < kInLockWindow) ++locked;
  }
  result.in_lock_fraction = static_cast<double>(locked) / static_cast<double>(n);

  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  auto tail_rms = [&](const TimeSeries& ts) {
    double ss = 0;
    for (std::size_t k = n - tail; k < n; ++k) ss += ts.samples[k] * ts.samples[k];
    return std::sqrt(ss / static_cast<double>(tail));
  };
  const double rms_s = tail_rms(result.residual_theta_s);
  const double rms_i = tail_rms(result.residual_theta_i);
  result.unstable = !std::isfinite(rms_s) || !std::isfinite(rms_i) || rms_s > 1.0 || rms_i > 1.0;
  return result;
}

Calibration calibrate_error_signal(const TimeSeries& scan, double phase_span, CalibrationMethod method,
                                   const std::vector<double>& scan_phases) {
  validate(scan);
  if (!(phase_span >= kTwoPi * (1.0 - 1e-9))) {
    throw InvalidInput("calibrate_error_signal: incomplete fringe, scan spans less than 2 pi");
  }
  Calibration cal;
  if (method == CalibrationMethod::peak_to_peak) {
    const auto [lo, hi] = std::minmax_element(scan.samples.begin(), scan.samples.end());
    cal.s_pp = *hi - *lo;
  } else {
    if (scan_phases.size() != scan.size()) throw InvalidInput("calibrate_error_signal: sine fit needs one phase per sample");
    // Normal equations for y = a sin(phi) + b cos(phi) + c.
    double m[3][4] = {};
    for (std::size_t k = 0; k < scan.size(); ++k) {
      const double basis[3] = {std::sin(scan_phases[k]), std::cos(scan_phases[k]), 1.0};
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[r][c] += basis[r] * basis[c];
        m[r][3] += basis[r] * scan.samples[k];
      }
    }
    for (int col = 0; col < 3; ++col) {
      int pivot = col;
      for (int r = col + 1; r < 3; ++r) {
        if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
      }
      if (std::abs(m[pivot][col]) < 1e-300) throw NumericalError("calibrate_error_signal: degenerate scan phases");
      std::swap(m[col], m[pivot]);
      for (int r = 0; r < 3; ++r) {
        if (r == col) continue;
        const double factor = m[r][col] / m[col][col];
        for (int c = col; c < 4; ++c) m[r][c] -= factor * m[col][c];
      }
    }
    cal.s_pp = 2.0 * std::hypot(m[0][3] / m[0][0], m[1][3] / m[1][1]);
  }
  if (!(cal.s_pp > 0)) throw NumericalError("calibrate_error_signal: flat scan, peak-to-peak is zero");
  cal.beta = 2.0 / cal.s_pp;
  return cal;
}

EprRecords synth_epr_photocurrents(const EprSynthesis& config, const std::pair<TimeSeries, TimeSeries>& residual_theta) {
  if (!(config.epsilon >= 0 && config.epsilon < 1)) throw DomainError("synth_epr_photocurrents: epsilon outside [0, 1)");
  for (double eta : {config.eta_s, config.eta_i}) {
    if (!(eta >= 0 && eta <= 1)) throw DomainError("synth_epr_photocurrents: eta outside [0, 1]");
  }
  if (!(config.gamma > 0)) throw InvalidInput("synth_epr_photocurrents: gamma must be > 0");
  const std::size_t n = sample_count(config.duration, config.rate, "synth_epr_photocurrents");
  const auto& k = kernels::active();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  // Lossless joint quadratures: A = (x_s - x_i)/sqrt2 and C = (p_s + p_i)/sqrt2
  // carry the squeezed spectrum, B = (x_s + x_i)/sqrt2 and D = (p_s - p_i)/sqrt2
  // the anti-squeezed one.
  RealFft fft(n);
  std::vector<double> omega(fft.bins());
  for (std::size_t b = 0; b < omega.size(); ++b) {
    omega[b] = static_cast<double>(b) * config.rate / static_cast<double>(n) / config.gamma;
  }
  std::vector<double> gain_minus(omega.size()), gain_plus(omega.size());
  spectra::two_mode_variance(config.epsilon, 1.0, omega, spectra::Sign::minus, spectra::Variant::corrected, gain_minus);
  spectra::two_mode_variance(config.epsilon, 1.0, omega, spectra::Sign::plus, spectra::Variant::corrected, gain_plus);
  for (auto* gains : {&gain_minus, &gain_plus}) {
    for (double& g : *gains) g = std::sqrt(g) / static_cast<double>(n);
  }

  auto shaped = [&](std::uint32_t id, const std::vector<double>& gain) {
    auto rng = stream(config.rng_seed, id);
    fill_gaussian(rng, fft.real());
    fft.forward();
    k.scale_complex(fft.spectrum().data(), gain.data(), fft.bins());
    fft.inverse();
    return std::vector<double>(fft.real().begin(), fft.real().end());
  };
  const std::vector<double> a = shaped(0, gain_minus);
  const std::vector<double> b = shaped(1, gain_plus);
  const std::vector<double> c = shaped(2, gain_minus);
  const std::vector<double> d = shaped(3, gain_plus);

  std::vector<double> x_s(n), x_i(n), p_s(n), p_i(n);
  k.axpby(inv_sqrt2, b.data(), inv_sqrt2, a.data(), x_s.data(), n);
  k.axpby(inv_sqrt2, b.data(), -inv_sqrt2, a.data(), x_i.data(), n);
  k.axpby(inv_sqrt2, c.data(), inv_sqrt2, d.data(), p_s.data(), n);
  k.axpby(inv_sqrt2, c.data(), -inv_sqrt2, d.data(), p_i.data(), n);

  const double dark_variance =
      config.dark_noise_clearance_db ? std::pow(10.0, -*config.dark_noise_clearance_db / 10.0) : 0.0;

  auto detect = [&](const std::vector<double>& x, const std::vector<double>& p, const TimeSeries& residual, double eta,
                    std::uint32_t vacuum_id, std::uint32_t dark_id) {
    const std::vector<double> phase = resample(residual, n, config.rate);
    std::vector<double> cosine(n), sine(n);
    for (std::size_t j = 0; j < n; ++j) {
      cosine[j] = std::cos(phase[j]);
      sine[j] = std::sin(phase[j]);
    }
    TimeSeries q{config.rate, std::vector<double>(n), "shot-noise units"};
    k.rotate(x.data(), p.data(), cosine.data(), sine.data(), q.samples.data(), n);
    std::vector<double> vacuum(n);
    auto rng = stream(config.rng_seed, vacuum_id);
    fill_gaussian(rng, vacuum);
    k.axpby(std::sqrt(eta), q.samples.data(), std::sqrt(1.0 - eta), vacuum.data(), q.samples.data(), n);
    if (dark_variance > 0) {
      auto dark_rng = stream(config.rng_seed, dark_id);
      fill_gaussian(dark_rng, vacuum, std::sqrt(dark_variance));
      k.axpby(1.0, q.samples.data(), 1.0, vacuum.data(), q.samples.data(), n);
    }
    return q;
  };

  EprRecords records;
  records.q_s = detect(x_s, p_s, residual_theta.first, config.eta_s, 4, 7);
  records.q_i = detect(x_i, p_i, residual_theta.second, config.eta_i, 5, 8);

  records.shot_reference = TimeSeries{config.rate, std::vector<double>(n), "shot-noise units"};
  auto shot_rng = stream(config.rng_seed, 6);
  fill_gaussian(shot_rng, records.shot_reference.samples);
  if (dark_variance > 0) {
    std::vector<double> dark(n);
    auto dark_rng = stream(config.rng_seed, 9);
    fill_gaussian(dark_rng, dark, std::sqrt(dark_variance));
    k.axpby(1.0, records.shot_reference.samples.data(), 1.0, dark.data(), records.shot_reference.samples.data(), n);
  }
  return records;
}

TimeSeries combine_quadratures(const TimeSeries& q_s, const TimeSeries& q_i, double g, double sign) {
  validate(q_s);
  validate(q_i);
  if (q_s.size() != q_i.size() || q_s.sample_rate != q_i.sample_rate) {
    throw InvalidInput("combine_quadratures: records differ in length or rate");
  }
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  TimeSeries out{q_s.sample_rate, std::vector<double>(q_s.size()), q_s.label};
  kernels::active().axpby(inv_sqrt2, q_s.samples.data(), sign * g * inv_sqrt2, q_i.samples.data(), out.samples.data(),
                          out.size());
  return out;
}

double band_rms(const TimeSeries& series, double f_lo, double f_hi, const TimeSeries& shot_reference) {
  validate(series);
  validate(shot_reference);
  if (series.sample_rate != shot_reference.sample_rate) throw InvalidInput("band_rms: reference recorded at a different rate");
  if (!(f_lo >= 0) || !(f_lo < f_hi) || !(f_hi < series.sample_rate / 2)) {
    throw InvalidInput("band_rms: band must satisfy 0 <= f_lo < f_hi < Nyquist");
  }
  const std::size_t segment =
      estimation::default_segment_length(std::min(series.size(), shot_reference.size()));
  const auto psd = estimation::welch_psd(series, segment);
  const auto ref = estimation::welch_psd(shot_reference, segment);
  const double reference_power = estimation::band_power(ref, f_lo, f_hi);
  if (!(reference_power > 0)) throw NumericalError("band_rms: shot reference has no power in band");
  return estimation::band_power(psd, f_lo, f_hi) / reference_power;
}

}  // namespace eprlock::lock
