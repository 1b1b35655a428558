#pragma once

// Spectral estimation, phase-noise integration and extraction of the
// detection efficiency and common-mode phase noise from squeezing data.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "eprlock/spectra.hpp"
#include "eprlock/timeseries.hpp"

namespace eprlock::estimation {

enum class Window { hann, rectangular };

std::string_view to_string(Window window);
Window window_from_string(std::string_view name);

/// One-sided power spectral density, bins 0 .. segment_length/2.
struct PsdEstimate {
  std::vector<double> frequencies;  // Hz
  std::vector<double> densities;    // units^2 / Hz
  std::size_t segment_length = 0;
  double overlap_fraction = 0.5;
  Window window = Window::hann;
  std::size_t segments = 0;

  double resolution() const { return frequencies.size() > 1 ? frequencies[1] - frequencies[0] : 0.0; }
};

/// min(len/8, 2^16), at least 2.
std::size_t default_segment_length(std::size_t series_length);

/// Averaged, mean-removed periodogram normalized so the density integrates to
/// the series variance over [0, Nyquist]. A segment_length of 0 picks the
/// default.
PsdEstimate welch_psd(const TimeSeries& series, std::size_t segment_length = 0, double overlap_fraction = 0.5,
                      Window window = Window::hann);

/// Trapezoidal integral of the density over the bins inside [f_lo, f_hi].
double band_power(const PsdEstimate& psd, double f_lo, double f_hi);

/// sqrt(band_power). Throws InvalidInput when fewer than two bins fall in the band.
double integrate_psd(const PsdEstimate& psd, double f_lo, double f_hi);

/// Converts an error signal to radians with the small-angle slope beta.
TimeSeries apply_calibration(const TimeSeries& series, double beta);

struct SqueezingPoint {
  double epsilon = 0;
  double var_minus = 1;
  double var_plus = 1;
  double uncertainty = 0;  // fractional 1-sigma on both variances; 0 = not supplied
};

struct SqueezingDataset {
  std::vector<SqueezingPoint> points;
};

void validate(const SqueezingDataset& data);

struct FitOptions {
  spectra::PhaseNoiseMode mode = spectra::PhaseNoiseMode::small_angle;
  int bootstrap_resamples = 200;
  std::uint64_t bootstrap_seed = 1;
  double sigma_upper_bound = 0.5;  // rad
};

struct FitResult {
  double eta_hat = 0;
  double sigma_hat = 0;
  double eta_err = 0;    // from the weighted Jacobian at the optimum
  double sigma_err = 0;
  double eta_err_bootstrap = 0;
  double sigma_err_bootstrap = 0;
  double residual_norm = 0;  // sqrt(sum of squared weighted residuals)
  bool converged = false;
  bool at_boundary = false;  // an estimate sits on its physical bound (e.g. sigma -> 0)
  int starts_converged = 0;
};

/// Model value of one branch: corrected two-mode variance composed with the
/// phase-noise mixing.
double degraded_variance(double epsilon, double eta, double sigma, double omega_norm, spectra::Sign sign,
                         spectra::PhaseNoiseMode mode = spectra::PhaseNoiseMode::small_angle);

/// Joint weighted least-squares fit of (eta, sigma_theta) to both branches.
/// Residuals are differences of log-variances divided by each point's
/// fractional uncertainty (unit weight when absent).
FitResult fit_phase_noise_model(const SqueezingDataset& data, double omega_norm, const FitOptions& options = {});

}  // namespace eprlock::estimation
