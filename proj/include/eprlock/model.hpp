#pragma once

// Shared domain types for the two-color NOPO phase-control toolkit.
//
// Conventions used everywhere in the library:
//  * configuration frequencies and rates are cyclic (Hz); the classical
//    dynamics multiply them by 2*pi internally, spectra use the normalized
//    Fourier frequency omega' = f / gamma so the factor cancels;
//  * quadrature variances are in shot-noise units (vacuum = 1);
//  * phases are radians, wrapped to (-pi, pi] when compared.

#include <complex>
#include <numbers>
#include <string>
#include <vector>

namespace eprlock {

using ComplexAmp = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Maps any angle to (-pi, pi].
double wrap_phase(double phase);

struct FrequencyPlan {
  double lambda_s = 1064e-9;        // m
  double lambda_i = 852e-9;         // m
  double lambda_p = 473e-9;         // m
  double omega_cl_offset = 3.0e6;   // Hz, cyclic
};

struct CavityParams {
  double gamma_in = 0.1e6;   // Hz
  double gamma_out = 14.0e6; // Hz
  double mu = 0.9e6;         // Hz, spurious intracavity loss
  double delta = 0.0;        // Hz, detuning of the signal mode (idler is -delta)

  double gamma_total() const { return gamma_in + gamma_out + mu; }
  double normalized_detuning() const { return delta / gamma_total(); }
};

/// Pump amplitude normalized to threshold. Values >= 1 are representable so
/// that above-threshold dynamics can be integrated and flagged; operations
/// that need a steady state reject them with DomainError.
struct PumpParams {
  double epsilon = 0.8;
  double phi_p = 0.0;

  bool below_threshold() const { return epsilon < 1.0; }
};

struct SeedParams {
  double alpha_cl = 1.0;  // sqrt(photons/s)
  double seed_phase = 0.0;

  ComplexAmp amplitude() const { return std::polar(alpha_cl, seed_phase); }
};

struct DetectionParams {
  double eta_s = 0.89;
  double eta_i = 0.89;
  double theta_ref_s = 0.0;
  double theta_ref_i = 0.0;
  double g_weight = 1.0;
};

struct PhaseNoiseSpec {
  double sigma_s = 0.01;  // rad
  double sigma_i = 0.01;  // rad
  double cov_si = 1e-4;   // rad^2
};

// Invariant checks. `violations` lists every broken invariant (empty when
// the value is valid); `validate` throws InvalidInput with the joined list.
std::vector<std::string> violations(const FrequencyPlan& plan);
std::vector<std::string> violations(const CavityParams& cavity);
std::vector<std::string> violations(const PumpParams& pump);
std::vector<std::string> violations(const SeedParams& seed);
std::vector<std::string> violations(const DetectionParams& detection);
std::vector<std::string> violations(const PhaseNoiseSpec& noise);

template <typename T>
void validate(const T& value);

struct FrequencyPlanCheck {
  bool ok = false;
  double relative_mismatch = 0.0;  // |1/ls + 1/li - 1/lp| * lp
  std::string diagnostic;
};

/// Energy-conservation check hbar*w_s + hbar*w_i = hbar*w_p to 1e-3 relative.
/// Throws InvalidInput on non-positive wavelengths.
FrequencyPlanCheck validate_frequency_plan(const FrequencyPlan& plan);

/// 10*log10(v); throws DomainError for v <= 0.
double db(double linear_variance);

}  // namespace eprlock
