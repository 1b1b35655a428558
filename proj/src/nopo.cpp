#include "eprlock/nopo.hpp"

#include <algorithm>
#include <cmath>

#include "eprlock/errors.hpp"

namespace eprlock::nopo {

namespace {

using namespace std::complex_literals;

// Rates of the equations of motion in 1/s.
struct AngularRates {
  double gamma;
  double delta;
  double gamma_in;
  double gamma_out;
  ComplexAmp coupling;  // G
};

AngularRates angular(const CavityParams& cavity, const PumpParams& pump) {
  AngularRates r{};
  r.gamma = kTwoPi * cavity.gamma_total();
  r.delta = kTwoPi * cavity.delta;
  r.gamma_in = kTwoPi * cavity.gamma_in;
  r.gamma_out = kTwoPi * cavity.gamma_out;
  r.coupling = std::polar(pump.epsilon * r.gamma, pump.phi_p);
  return r;
}

void require_below_threshold(const PumpParams& pump) {
  if (!pump.below_threshold()) {
    throw DomainError("steady state undefined: epsilon = " + std::to_string(pump.epsilon) +
                      " is at or above threshold");
  }
}

void check_inputs(const CavityParams& cavity, const PumpParams& pump, const SeedParams& seed) {
  validate(cavity);
  validate(pump);
  validate(seed);
}

LockFieldState with_phases(ComplexAmp a_cls, ComplexAmp a_cli) {
  if (!std::isfinite(a_cls.real()) || !std::isfinite(a_cls.imag()) || !std::isfinite(a_cli.real()) ||
      !std::isfinite(a_cli.imag())) {
    throw NumericalError("non-finite locking-field amplitude");
  }
  return LockFieldState{a_cls, a_cli, std::arg(a_cls), std::arg(a_cli)};
}

}  // namespace

LockFieldState output_fields(const CavityParams& cavity, ComplexAmp alpha_s, ComplexAmp alpha_i) {
  const double coupling_out = std::sqrt(2.0 * kTwoPi * cavity.gamma_out);
  return with_phases(coupling_out * alpha_s, coupling_out * alpha_i);
}

LockFieldState steady_state_linear_solve(const CavityParams& cavity, const PumpParams& pump,
                                         const SeedParams& seed) {
  check_inputs(cavity, pump, seed);
  require_below_threshold(pump);
  const AngularRates r = angular(cavity, pump);

  // [ (g - iD)   -G      ] [alpha_s ]   [ sqrt(2 g_in) a_cl ]
  // [ -G*      (g - iD)  ] [alpha_i*] = [ 0                 ]
  const ComplexAmp diag = r.gamma - 1i * r.delta;
  const ComplexAmp det = diag * diag - std::norm(r.coupling);
  if (std::abs(det) <= 1e-12 * r.gamma * r.gamma) throw NumericalError("singular steady-state system");
  const ComplexAmp drive = std::sqrt(2.0 * r.gamma_in) * seed.amplitude();

  const ComplexAmp alpha_s = diag * drive / det;
  const ComplexAmp alpha_i_conj = std::conj(r.coupling) * drive / det;
  return output_fields(cavity, alpha_s, std::conj(alpha_i_conj));
}

LockFieldState steady_state_closed_form(const CavityParams& cavity, const PumpParams& pump,
                                        const SeedParams& seed, ClosedFormVariant variant) {
  check_inputs(cavity, pump, seed);
  require_below_threshold(pump);
  const double d = cavity.normalized_detuning();
  const double eps2 = pump.epsilon * pump.epsilon;
  const double lorentz = 1.0 + d * d;
  const double second = variant == ClosedFormVariant::corrected ? lorentz : 1.0 + d;

  const ComplexAmp denominator = (1.0 - eps2 / lorentz) - 1i * d * (1.0 + eps2 / second);
  const double prefactor = 2.0 * std::sqrt(cavity.gamma_in * cavity.gamma_out) / cavity.gamma_total();
  const ComplexAmp a_cls = prefactor / denominator * seed.amplitude();

  const ComplexAmp idler_response =
      variant == ClosedFormVariant::corrected ? 1.0 / (1.0 + 1i * d) : 1.0 / (1.0 - 1i * d);
  const ComplexAmp a_cli = pump.epsilon * std::polar(1.0, pump.phi_p) * idler_response * std::conj(a_cls);
  return with_phases(a_cls, a_cli);
}

Trajectory integrate_dynamics(const CavityParams& cavity, const PumpParams& pump, const SeedParams& seed,
                              double t_end, double dt, std::pair<ComplexAmp, ComplexAmp> initial) {
  check_inputs(cavity, pump, seed);
  if (!(dt > 0) || dt > 0.1 / cavity.gamma_total() * (1 + 1e-12)) {
    throw InvalidInput("integrate_dynamics: dt must lie in (0, 0.1/gamma_total]");
  }
  if (!(t_end >= dt)) throw InvalidInput("integrate_dynamics: t_end must be >= dt");

  const AngularRates r = angular(cavity, pump);
  const ComplexAmp decay_s = r.gamma - 1i * r.delta;  // signal detuned by +delta
  const ComplexAmp decay_i = r.gamma + 1i * r.delta;  // idler detuned by -delta
  const ComplexAmp drive = std::sqrt(2.0 * r.gamma_in) * seed.amplitude();
  const ComplexAmp g = r.coupling;

  auto rhs = [&](ComplexAmp s, ComplexAmp i) {
    return std::pair{-decay_s * s + g * std::conj(i) + drive, -decay_i * i + g * std::conj(s)};
  };

  const double input_scale =
      std::max({std::abs(drive) / r.gamma, std::abs(initial.first), std::abs(initial.second)});
  const double blowup = 1e6 * input_scale;

  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  Trajectory traj;
  traj.above_threshold = drift_max_growth_rate(cavity, pump) > 0;
  traj.times.reserve(steps + 1);
  traj.alpha_s.reserve(steps + 1);
  traj.alpha_i.reserve(steps + 1);

  ComplexAmp s = initial.first;
  ComplexAmp i = initial.second;
  traj.times.push_back(0.0);
  traj.alpha_s.push_back(s);
  traj.alpha_i.push_back(i);
  for (std::size_t n = 1; n <= steps; ++n) {
    const auto [k1s, k1i] = rhs(s, i);
    const auto [k2s, k2i] = rhs(s + 0.5 * dt * k1s, i + 0.5 * dt * k1i);
    const auto [k3s, k3i] = rhs(s + 0.5 * dt * k2s, i + 0.5 * dt * k2i);
    const auto [k4s, k4i] = rhs(s + dt * k3s, i + dt * k3i);
    s += dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
    i += dt / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
    traj.times.push_back(static_cast<double>(n) * dt);
    traj.alpha_s.push_back(s);
    traj.alpha_i.push_back(i);
    if (input_scale > 0 && (std::abs(s) > blowup || std::abs(i) > blowup || !std::isfinite(std::abs(s)))) {
      traj.diverged = true;
      break;
    }
  }
  return traj;
}

double drift_max_growth_rate(const CavityParams& cavity, const PumpParams& pump) {
  const AngularRates r = angular(cavity, pump);
  // Drift on (alpha_s, alpha_i*): [[-(g - iD), G], [G*, -(g - iD)]].
  const ComplexAmp a = -(r.gamma - 1i * r.delta);
  const ComplexAmp d = -(r.gamma - 1i * r.delta);
  const ComplexAmp mean = 0.5 * (a + d);
  const ComplexAmp root = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(r.coupling));
  return std::max((mean + root).real(), (mean - root).real());
}

double parametric_gain(double epsilon) {
  if (!(epsilon >= 0) || !(epsilon < 1)) throw DomainError("parametric_gain: epsilon must lie in [0, 1)");
  return 1.0 / (1.0 - epsilon);
}

double detuning_phase_offset(const CavityParams& cavity) {
  return -std::atan(cavity.normalized_detuning());
}

}  // namespace eprlock::nopo
