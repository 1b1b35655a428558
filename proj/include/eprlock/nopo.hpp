#pragma once

// Classical dynamics of the seeded NOPO and the coherent locking fields it
// emits. The signal mode is detuned by +delta and the idler by -delta; the
// coupling is G = epsilon * gamma * exp(i phi_p).

#include <utility>
#include <vector>

#include "eprlock/model.hpp"

namespace eprlock::nopo {

struct LockFieldState {
  ComplexAmp a_cls;   // output amplitude of the signal-side locking field
  ComplexAmp a_cli;   // output amplitude of the idler-side locking field
  double phi_cls = 0; // arg(a_cls)
  double phi_cli = 0; // arg(a_cli)
};

struct Trajectory {
  std::vector<double> times;  // s
  std::vector<ComplexAmp> alpha_s;
  std::vector<ComplexAmp> alpha_i;
  bool above_threshold = false;  // drift matrix has an eigenvalue with positive real part
  bool diverged = false;         // amplitude exceeded 1e6 x the input scale; integration stopped
};

enum class ClosedFormVariant { paper_literal, corrected };

/// Exact steady state of the equations of motion (2x2 complex linear solve in
/// (alpha_s, alpha_i*)), mapped to output fields A = sqrt(2 gamma_out) alpha.
LockFieldState steady_state_linear_solve(const CavityParams& cavity, const PumpParams& pump,
                                         const SeedParams& seed);

/// Closed-form output amplitudes. `corrected` uses (1 + D'^2) in both epsilon^2
/// terms of the signal denominator and 1/(1 + iD') in the idler relation, which
/// is what the linear solve yields. `paper_literal` keeps (1 + D') in the second
/// epsilon^2 term and 1/(1 - iD') in the idler relation.
LockFieldState steady_state_closed_form(const CavityParams& cavity, const PumpParams& pump,
                                        const SeedParams& seed, ClosedFormVariant variant);

/// Output fields for given intracavity amplitudes.
LockFieldState output_fields(const CavityParams& cavity, ComplexAmp alpha_s, ComplexAmp alpha_i);

/// Fixed-step RK4 integration of the intracavity equations of motion.
/// Requires dt <= 0.1 / gamma_total and t_end >= dt (both in seconds, gamma in Hz).
Trajectory integrate_dynamics(const CavityParams& cavity, const PumpParams& pump, const SeedParams& seed,
                              double t_end, double dt, std::pair<ComplexAmp, ComplexAmp> initial = {});

/// Largest real part (1/s) among eigenvalues of the drift matrix acting on
/// (alpha_s, alpha_i*). Positive means the oscillator is above threshold.
double drift_max_growth_rate(const CavityParams& cavity, const PumpParams& pump);

/// Parametric amplitude gain 1/(1 - epsilon).
double parametric_gain(double epsilon);

/// Constant phase the idler relation picks up from detuning: arg(1/(1 + iD')).
double detuning_phase_offset(const CavityParams& cavity);

}  // namespace eprlock::nopo
