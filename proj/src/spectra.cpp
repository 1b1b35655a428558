#include "eprlock/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eprlock/errors.hpp"
#include "eprlock/kernels.hpp"
#include "eprlock/optimize.hpp"

namespace eprlock::spectra {

namespace {

constexpr double kEpsilonSearchMax = 0.99;
constexpr double kSearchTolerance = 1e-8;

void check_operating_point(double epsilon, double eta) {
  if (!(epsilon >= 0) || !(epsilon < 1)) {
    throw DomainError("two_mode_variance: epsilon = " + std::to_string(epsilon) + " outside [0, 1)");
  }
  if (!(eta >= 0 && eta <= 1)) throw DomainError("two_mode_variance: eta outside [0, 1]");
}

// variance = (omega^2 + top) / (omega^2 + bottom). `top` is formed so that
// the squeezed branch near threshold does not cancel.
struct Rational {
  double top;
  double bottom;
};

Rational rational(double epsilon, double eta, Sign sign, Variant variant) {
  const double up = (1.0 + epsilon) * (1.0 + epsilon);
  const double down = (1.0 - epsilon) * (1.0 - epsilon);
  if (sign == Sign::minus) {
    const double top = eta < 0.5 ? up - 4.0 * eta * epsilon : down + 4.0 * (1.0 - eta) * epsilon;
    return {top, up};
  }
  if (variant == Variant::paper_literal) return {up + 4.0 * eta * epsilon, up};
  const double top = eta < 0.5 ? down + 4.0 * eta * epsilon : up - 4.0 * (1.0 - eta) * epsilon;
  return {top, down};
}

}  // namespace

double two_mode_variance(double epsilon, double eta, double omega_norm, Sign sign, Variant variant) {
  check_operating_point(epsilon, eta);
  const Rational r = rational(epsilon, eta, sign, variant);
  const double w2 = omega_norm * omega_norm;
  return (w2 + r.top) / (w2 + r.bottom);
}

void two_mode_variance(double epsilon, double eta, std::span<const double> omega_norm, Sign sign, Variant variant,
                       std::span<double> out) {
  check_operating_point(epsilon, eta);
  if (out.size() != omega_norm.size()) throw InvalidInput("two_mode_variance: output size mismatch");
  const Rational r = rational(epsilon, eta, sign, variant);
  kernels::active().rational_variance(omega_norm.data(), out.data(), out.size(), r.top, r.bottom);
}

SpectrumPoint spectrum_point(double epsilon, double eta, double omega_norm, Variant variant) {
  return {omega_norm, two_mode_variance(epsilon, eta, omega_norm, Sign::minus, variant),
          two_mode_variance(epsilon, eta, omega_norm, Sign::plus, variant)};
}

double orthogonal_variance(double var_plus, double var_minus, Sign sign) {
  return sign == Sign::plus ? var_minus : var_plus;
}

double phase_noise_variance(double var_ideal, double var_orthogonal, double sigma_theta, PhaseNoiseMode mode) {
  if (!(sigma_theta >= 0)) throw DomainError("phase_noise_variance: sigma_theta must be >= 0");
  if (mode == PhaseNoiseMode::small_angle) {
    const double s2 = sigma_theta * sigma_theta;
    return var_ideal * (1.0 - s2) + var_orthogonal * s2;
  }
  // <cos^2> = (1 + exp(-2 s^2)) / 2 for a zero-mean Gaussian angle.
  const double sin2 = -0.5 * std::expm1(-2.0 * sigma_theta * sigma_theta);
  return var_ideal * (1.0 - sin2) + var_orthogonal * sin2;
}

double sigma_theta_common(const PhaseNoiseSpec& spec) {
  const double variance =
      (spec.sigma_s * spec.sigma_s + spec.sigma_i * spec.sigma_i + 2.0 * spec.cov_si) / 4.0;
  if (variance < 0) {
    // Rounding at perfect anticorrelation can land a hair below zero.
    if (variance > -1e-15 * (spec.sigma_s * spec.sigma_s + spec.sigma_i * spec.sigma_i)) return 0.0;
    throw DomainError("sigma_theta_common: negative common-mode variance (invalid covariance)");
  }
  return std::sqrt(variance);
}

DuanSimon duan_simon(double var_minus, double var_plus_orth) {
  const double sum = var_minus + var_plus_orth;
  return {sum, sum < 2.0};
}

CovarianceModel build_covariance_model(double epsilon, double eta_s, double eta_i, double omega_norm) {
  if (!(eta_s >= 0 && eta_s <= 1) || !(eta_i >= 0 && eta_i <= 1)) {
    throw DomainError("build_covariance_model: efficiencies outside [0, 1]");
  }
  const double v_minus = two_mode_variance(epsilon, 1.0, omega_norm, Sign::minus);
  const double v_plus = two_mode_variance(epsilon, 1.0, omega_norm, Sign::plus);
  const double single = 0.5 * (v_plus + v_minus);
  const double correlation = 0.5 * (v_plus - v_minus);

  CovarianceModel model;
  model.vx_s = 1.0 + eta_s * (single - 1.0);
  model.vx_i = 1.0 + eta_i * (single - 1.0);
  model.c_x = std::sqrt(eta_s * eta_i) * correlation;
  model.vp_s = model.vx_s;
  model.vp_i = model.vx_i;
  model.c_p = -model.c_x;
  return model;
}

std::vector<std::string> violations(const CovarianceModel& model, double eta_s, double eta_i) {
  std::vector<std::string> out;
  const double slack = 1e-12;
  if (model.vx_s < 1.0 - eta_s - slack || model.vp_s < 1.0 - eta_s - slack) out.emplace_back("signal variance below 1 - eta");
  if (model.vx_i < 1.0 - eta_i - slack || model.vp_i < 1.0 - eta_i - slack) out.emplace_back("idler variance below 1 - eta");
  auto psd = [&](double va, double vb, double c) {
    return va >= 0 && vb >= 0 && c * c <= va * vb * (1 + slack);
  };
  if (!psd(model.vx_s, model.vx_i, model.c_x)) out.emplace_back("x block not positive semidefinite");
  if (!psd(model.vp_s, model.vp_i, model.c_p)) out.emplace_back("p block not positive semidefinite");
  return out;
}

double weighted_variance(const CovarianceModel& model, double g, Sign sign) {
  if (!(g > 0)) throw InvalidInput("weighted_variance: g must be > 0");
  const double cross = (sign == Sign::plus ? 2.0 : -2.0) * g * model.c_x;
  return (model.vx_s + g * g * model.vx_i + cross) / (1.0 + g * g);
}

CombinationOptimum optimize_combination(const CovarianceModel& model, Sign sign) {
  constexpr double g_lo = 1e-3;
  constexpr double g_hi = 1e3;
  CombinationOptimum result;

  const auto search = optimize::golden_section(
      [&](double log_g) { return weighted_variance(model, std::exp(log_g), sign); }, std::log(g_lo), std::log(g_hi),
      kSearchTolerance);
  result.g_search = std::exp(search.x);
  result.var_search = search.value;

  const double scale = std::max({std::abs(model.vx_s), std::abs(model.vx_i), 1.0});
  if (std::abs(model.c_x) <= 1e-14 * scale) {
    result.no_correlation = true;
    result.g_star = 1.0;
    result.var_star = weighted_variance(model, 1.0, sign);
    return result;
  }

  // Rayleigh quotient of [[a, k], [k, b]] on (1, g): the minimum is the lower
  // eigenvalue, reached along its eigenvector (k, lambda - a).
  const double a = model.vx_s;
  const double b = model.vx_i;
  const double k = (sign == Sign::plus ? 1.0 : -1.0) * model.c_x;
  const double lambda_min = 0.5 * (a + b) - std::hypot(0.5 * (a - b), k);
  const double g = (lambda_min - a) / k;
  if (g > 0 && std::isfinite(g)) {
    result.g_star = g;
    result.var_star = weighted_variance(model, g, sign);
    return result;
  }
  result.interior = false;
  const double at_lo = weighted_variance(model, g_lo, sign);
  const double at_hi = weighted_variance(model, g_hi, sign);
  result.g_star = at_lo <= at_hi ? g_lo : g_hi;
  result.var_star = std::min(at_lo, at_hi);
  return result;
}

PumpOptimum optimal_epsilon(double eta, double sigma_theta, double omega_norm, PhaseNoiseMode mode) {
  if (!(eta >= 0 && eta <= 1)) throw DomainError("optimal_epsilon: eta outside [0, 1]");
  if (!(sigma_theta >= 0)) throw DomainError("optimal_epsilon: sigma_theta must be >= 0");
  auto degraded = [&](double epsilon) {
    const double v_minus = two_mode_variance(epsilon, eta, omega_norm, Sign::minus);
    const double v_plus = two_mode_variance(epsilon, eta, omega_norm, Sign::plus);
    return phase_noise_variance(v_minus, v_plus, sigma_theta, mode);
  };
  const auto best = optimize::golden_section(degraded, 0.0, kEpsilonSearchMax, kSearchTolerance);
  return {best.x, best.value};
}

}  // namespace eprlock::spectra
