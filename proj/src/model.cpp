#include "eprlock/model.hpp"

#include <cmath>
#include <sstream>

#include "eprlock/errors.hpp"

namespace eprlock {

namespace {

constexpr double kEnergyTolerance = 1e-3;

bool finite(double x) { return std::isfinite(x); }

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += "; ";
    out += item;
  }
  return out;
}

}  // namespace

double wrap_phase(double phase) {
  double wrapped = std::remainder(phase, kTwoPi);  // [-pi, pi]
  if (wrapped <= -kPi) wrapped += kTwoPi;
  return wrapped;
}

std::vector<std::string> violations(const FrequencyPlan& plan) {
  std::vector<std::string> out;
  if (!(plan.lambda_s > 0) || !(plan.lambda_i > 0) || !(plan.lambda_p > 0) ||
      !finite(plan.lambda_s) || !finite(plan.lambda_i) || !finite(plan.lambda_p)) {
    out.emplace_back("wavelengths must be positive and finite");
  } else if (!validate_frequency_plan(plan).ok) {
    out.emplace_back(validate_frequency_plan(plan).diagnostic);
  }
  if (!(plan.omega_cl_offset > 0) || !finite(plan.omega_cl_offset)) {
    out.emplace_back("omega_cl_offset must be > 0");
  }
  return out;
}

std::vector<std::string> violations(const CavityParams& cavity) {
  std::vector<std::string> out;
  for (double rate : {cavity.gamma_in, cavity.gamma_out, cavity.mu}) {
    if (!(rate >= 0) || !finite(rate)) {
      out.emplace_back("cavity rates must be finite and >= 0");
      break;
    }
  }
  if (!(cavity.gamma_total() > 0)) out.emplace_back("gamma_total must be > 0");
  if (!finite(cavity.delta)) out.emplace_back("detuning must be finite");
  return out;
}

std::vector<std::string> violations(const PumpParams& pump) {
  std::vector<std::string> out;
  if (!(pump.epsilon >= 0) || !finite(pump.epsilon)) out.emplace_back("epsilon must be finite and >= 0");
  if (!finite(pump.phi_p)) out.emplace_back("phi_p must be finite");
  return out;
}

std::vector<std::string> violations(const SeedParams& seed) {
  std::vector<std::string> out;
  if (!(seed.alpha_cl >= 0) || !finite(seed.alpha_cl)) out.emplace_back("alpha_cl must be finite and >= 0");
  if (!finite(seed.seed_phase)) out.emplace_back("seed_phase must be finite");
  return out;
}

std::vector<std::string> violations(const DetectionParams& detection) {
  std::vector<std::string> out;
  for (double eta : {detection.eta_s, detection.eta_i}) {
    if (!(eta >= 0 && eta <= 1)) {
      out.emplace_back("detection efficiencies must lie in [0, 1]");
      break;
    }
  }
  if (!finite(detection.theta_ref_s) || !finite(detection.theta_ref_i)) {
    out.emplace_back("setpoint phases must be finite");
  }
  if (!(detection.g_weight > 0) || !finite(detection.g_weight)) out.emplace_back("g_weight must be > 0");
  return out;
}

std::vector<std::string> violations(const PhaseNoiseSpec& noise) {
  std::vector<std::string> out;
  if (!(noise.sigma_s >= 0) || !(noise.sigma_i >= 0) || !finite(noise.sigma_s) || !finite(noise.sigma_i)) {
    out.emplace_back("phase-noise sigmas must be finite and >= 0");
    return out;
  }
  // Small relative slack so that exactly-correlated specs survive rounding.
  const double bound = noise.sigma_s * noise.sigma_i;
  if (!finite(noise.cov_si) || std::abs(noise.cov_si) > bound * (1 + 1e-12)) {
    out.emplace_back("|cov_si| must not exceed sigma_s * sigma_i");
  }
  return out;
}

template <typename T>
void validate(const T& value) {
  if (auto broken = violations(value); !broken.empty()) throw InvalidInput(join(broken));
}

template void validate(const FrequencyPlan&);
template void validate(const CavityParams&);
template void validate(const PumpParams&);
template void validate(const SeedParams&);
template void validate(const DetectionParams&);
template void validate(const PhaseNoiseSpec&);

FrequencyPlanCheck validate_frequency_plan(const FrequencyPlan& plan) {
  if (!(plan.lambda_s > 0) || !(plan.lambda_i > 0) || !(plan.lambda_p > 0)) {
    throw InvalidInput("wavelengths must be positive");
  }
  FrequencyPlanCheck check;
  const double pump_wavenumber = 1.0 / plan.lambda_p;
  check.relative_mismatch =
      std::abs(1.0 / plan.lambda_s + 1.0 / plan.lambda_i - pump_wavenumber) / pump_wavenumber;
  check.ok = check.relative_mismatch < kEnergyTolerance;
  std::ostringstream msg;
  const double pump_from_modes = 1.0 / (1.0 / plan.lambda_s + 1.0 / plan.lambda_i);
  msg << (check.ok ? "energy conserved" : "energy not conserved") << ": signal+idler imply lambda_p = "
      << pump_from_modes * 1e9 << " nm, configured " << plan.lambda_p * 1e9 << " nm (relative mismatch "
      << check.relative_mismatch << ")";
  check.diagnostic = msg.str();
  return check;
}

double db(double linear_variance) {
  if (!(linear_variance > 0)) throw DomainError("db: variance must be > 0");
  return 10.0 * std::log10(linear_variance);
}

}  // namespace eprlock
