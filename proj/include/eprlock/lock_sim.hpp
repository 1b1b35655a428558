#pragma once

// Time-domain simulation of the two homodyne phase locks and of the
// photocurrents they deliver.
//
// Beat notes are simulated at complex baseband: the envelope of a beat at
// +Omega_CL (signal) is A exp(+i theta), the one at -Omega_CL (idler) is
// A exp(-i theta). Quantum noise is represented by classical Gaussian
// processes with the two-mode squeezing spectra.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eprlock/nopo.hpp"
#include "eprlock/timeseries.hpp"

namespace eprlock::lock {

struct Sinusoid {
  double frequency = 0;  // Hz
  double amplitude = 0;  // rad
  double phase = 0;      // rad
};

struct DisturbanceSpec {
  double random_walk_diffusion = 0;  // rad^2/s; increments ~ N(0, D dt)
  double white_noise_density = 0;    // rad^2/Hz, one-sided
  std::vector<Sinusoid> sinusoids;
  double offset = 0;     // rad, constant
  double ramp_rate = 0;  // rad/s, linear drift
  std::uint64_t rng_seed = 0;
};

std::vector<std::string> violations(const DisturbanceSpec& spec);

/// Random walk + white noise + offset + ramp + sinusoids, starting from the
/// offset at t = 0. Bit-reproducible for a fixed seed.
TimeSeries synth_disturbance(const DisturbanceSpec& spec, double duration, double rate);

/// Stationary Ornstein-Uhlenbeck phase with standard deviation sigma and a
/// one-pole spectrum cornering at `corner` Hz (exact discretization).
TimeSeries synth_ou_phase(double sigma, double corner, double duration, double rate, std::uint64_t seed);

enum class BeatSign : int { positive = 1, negative = -1 };

inline double sign_value(BeatSign s) { return static_cast<double>(static_cast<int>(s)); }

/// |amp_lo| |amp_cl| sin(theta + beat_sign * theta_ref).
double error_signal(double theta, double amp_lo, double amp_cl, double theta_ref, BeatSign beat_sign);

/// First-order IIR low-pass, y += a (x - y) with a = 1 - exp(-2 pi fc / fs).
class OnePoleLowPass {
 public:
  OnePoleLowPass(double cutoff, double sample_rate);
  double step(double x);
  double value() const { return y_; }
  void reset(double y = 0.0) { y_ = y; }

 private:
  double a_;
  double y_ = 0.0;
};

/// Rotates the baseband beat by exp(i theta_ref), keeps the quadrature
/// component and low-passes it. A beat A exp(i phi0) settles to
/// A sin(phi0 + theta_ref). Requires lpf_cutoff < sample_rate / 4.
TimeSeries lockin_demodulate(const ComplexSeries& baseband, double theta_ref, double lpf_cutoff);

/// Second-order actuator response w0^2 / (s^2 + (w0/Q) s + w0^2), discretized
/// with the bilinear transform (pre-warped at the resonance).
class ResonantActuator {
 public:
  ResonantActuator(double resonance, double q, double sample_rate);
  double step(double command);
  void reset(double value);

 private:
  double b0_, b1_, b2_, a1_, a2_;
  double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

struct LoopConfig {
  double kp = 0.05;                  // dimensionless, acts on the slope-normalized error (rad)
  double ki = 6.283185307179586e3;   // 1/s
  double lpf_cutoff = 10e3;          // Hz
  double actuator_range = 10.0;      // rad, PZT half-range
  double actuator_resonance = 20e3;  // Hz
  double actuator_q = 10.0;
  double theta_ref = 0.0;            // rad
  BeatSign beat_sign = BeatSign::positive;
  double lo_amplitude = 1.0;
};

std::vector<std::string> violations(const LoopConfig& loop, double omega_cl_offset);

struct Disturbances {
  DisturbanceSpec signal;  // adds to theta_s
  DisturbanceSpec idler;   // adds to theta_i
  DisturbanceSpec pump;    // pump phase; reaches theta_i through phi_CLi = phi_p - phi_CLs
};

struct LockRunResult {
  TimeSeries residual_theta_s;   // rad, deviation from the lock point
  TimeSeries residual_theta_i;
  TimeSeries common_mode_theta;  // (s + i) / 2
  TimeSeries error_s;            // demodulated error signals, signal units
  TimeSeries error_i;
  std::vector<double> saturation_events;  // s, onset times
  double in_lock_fraction = 0;
  bool unstable = false;  // non-finite output or residual RMS over the final tenth above 1 rad
};

/// Per-sample closed-loop simulation of both locks. Each arm: disturbance ->
/// baseband beat -> lock-in -> PI -> resonant actuator with hard clamp at
/// +-actuator_range. While clamped the integrator holds (anti-windup).
/// The loops start on their lock points with zero actuator output.
LockRunResult run_closed_loop(const LoopConfig& loop_s, const LoopConfig& loop_i, const Disturbances& disturbances,
                              const nopo::LockFieldState& lock_fields, double duration, double rate,
                              double omega_cl_offset = 3e6);

enum class CalibrationMethod { peak_to_peak, sine_fit };

struct Calibration {
  double s_pp = 0;
  double beta = 0;  // 2 / s_pp
};

/// Peak-to-peak amplitude of an error-signal fringe recorded while the LO
/// phase was scanned over `phase_span` radians (>= 2 pi required).
/// `sine_fit` needs the scan phases and estimates the amplitude by linear
/// least squares on (sin, cos, 1), which tolerates additive noise.
Calibration calibrate_error_signal(const TimeSeries& scan, double phase_span,
                                   CalibrationMethod method = CalibrationMethod::peak_to_peak,
                                   const std::vector<double>& scan_phases = {});

struct EprSynthesis {
  double epsilon = 0.8;
  double eta_s = 0.89;
  double eta_i = 0.89;
  double gamma = 15e6;  // Hz, cavity linewidth
  double duration = 1.0;
  double rate = 200e3;
  std::uint64_t rng_seed = 1;
  std::optional<double> dark_noise_clearance_db;  // e.g. 24 dB; empty = no detector noise
};

struct EprRecords {
  TimeSeries q_s;
  TimeSeries q_i;
  TimeSeries shot_reference;  // vacuum record through the same detector model
};

/// Correlated homodyne photocurrents with the two-mode spectra. The residual
/// phase traces (may be empty = perfect lock) are linearly interpolated onto
/// the output grid and repeated if shorter than the record.
EprRecords synth_epr_photocurrents(const EprSynthesis& config, const std::pair<TimeSeries, TimeSeries>& residual_theta);

/// (q_s + sign * g * q_i) / sqrt2.
TimeSeries combine_quadratures(const TimeSeries& q_s, const TimeSeries& q_i, double g, double sign);

/// Welch band power of `series` in [f_lo, f_hi] divided by that of the shot
/// reference.
double band_rms(const TimeSeries& series, double f_lo, double f_hi, const TimeSeries& shot_reference);

}  // namespace eprlock::lock
