#pragma once

// Two-mode squeezing spectra of the below-threshold NOPO, their degradation
// by common-mode phase noise, and the Duan-Simon inseparability sum.
//
// All variances are normalized to shot noise; omega_norm is the Fourier
// frequency divided by the cavity linewidth.

#include <span>

#include "eprlock/model.hpp"

namespace eprlock::spectra {

/// Which joint quadrature: minus = (q_s - q_i)/sqrt2 (squeezed),
/// plus = (q_s + q_i)/sqrt2 (anti-squeezed).
enum class Sign { minus, plus };

inline Sign opposite(Sign s) { return s == Sign::minus ? Sign::plus : Sign::minus; }

/// corrected: (1 + eps)^2 in the squeezed denominator, (1 - eps)^2 in the
/// anti-squeezed one. paper_literal: (eps + 1)^2 for both.
enum class Variant { corrected, paper_literal };

enum class PhaseNoiseMode { small_angle, exact_gaussian };

struct SpectrumPoint {
  double omega_norm = 0;
  double var_minus = 1;
  double var_plus = 1;
};

/// Requires 0 <= epsilon < 1 and 0 <= eta <= 1 (DomainError otherwise).
double two_mode_variance(double epsilon, double eta, double omega_norm, Sign sign,
                         Variant variant = Variant::corrected);

/// Vectorized two_mode_variance over an omega_norm grid; out.size() == omega_norm.size().
void two_mode_variance(double epsilon, double eta, std::span<const double> omega_norm, Sign sign,
                       Variant variant, std::span<double> out);

SpectrumPoint spectrum_point(double epsilon, double eta, double omega_norm, Variant variant = Variant::corrected);

/// Variance of the orthogonal (pi/2-rotated) joint quadrature: the pair swaps.
double orthogonal_variance(double var_plus, double var_minus, Sign sign);

/// Variance seen when the detection angle jitters by a zero-mean Gaussian
/// common-mode phase of standard deviation sigma_theta.
double phase_noise_variance(double var_ideal, double var_orthogonal, double sigma_theta,
                            PhaseNoiseMode mode = PhaseNoiseMode::small_angle);

/// sqrt((sigma_s^2 + sigma_i^2 + 2 cov) / 4).
double sigma_theta_common(const PhaseNoiseSpec& spec);

struct DuanSimon {
  double sum = 0;
  bool entangled = false;
};

/// Separable states have var_minus + var_plus_orth >= 2.
DuanSimon duan_simon(double var_minus, double var_plus_orth);

/// Per-mode quadrature moments after independent loss on each arm.
/// p-sector variances equal the x-sector ones; its correlation has the
/// opposite sign.
struct CovarianceModel {
  double vx_s = 1;
  double vx_i = 1;
  double c_x = 0;
  double vp_s = 1;
  double vp_i = 1;
  double c_p = 0;
};

CovarianceModel build_covariance_model(double epsilon, double eta_s, double eta_i, double omega_norm);

std::vector<std::string> violations(const CovarianceModel& model, double eta_s = 1, double eta_i = 1);

/// Var[(q_s +- g q_i)/sqrt2] divided by the weighted shot noise (1 + g^2)/2,
/// evaluated on the x sector.
double weighted_variance(const CovarianceModel& model, double g, Sign sign);

struct CombinationOptimum {
  double g_star = 1;       // closed-form stationary point (or boundary, see below)
  double var_star = 1;
  double g_search = 1;     // golden-section result on log g in [1e-3, 1e3]
  double var_search = 1;
  bool no_correlation = false;  // c_x == 0: every g is equivalent, g_star = 1 by convention
  bool interior = true;         // false when the minimum over g > 0 lies on the search boundary
};

CombinationOptimum optimize_combination(const CovarianceModel& model, Sign sign);

struct PumpOptimum {
  double eps_opt = 0;
  double var_min = 1;
};

/// Pump amplitude in [0, 0.99] minimizing the phase-noise-degraded squeezed variance.
PumpOptimum optimal_epsilon(double eta, double sigma_theta, double omega_norm,
                            PhaseNoiseMode mode = PhaseNoiseMode::small_angle);

}  // namespace eprlock::spectra
