#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "eprlock/errors.hpp"
#include "eprlock/estimation.hpp"

using namespace eprlock;
using namespace eprlock::estimation;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

TimeSeries white_noise(std::size_t n, double rate, double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  TimeSeries ts{rate, std::vector<double>(n), "V"};
  for (auto& x : ts.samples) x = normal(rng);
  return ts;
}

SqueezingDataset model_dataset(double eta, double sigma, spectra::PhaseNoiseMode mode, double noise, std::mt19937_64* rng,
                               double uncertainty) {
  SqueezingDataset data;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double e : {0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.85}) {
    SqueezingPoint p;
    p.epsilon = e;
    // independent evaluation of the corrected spectra composed with Gaussian phase mixing
    const double vm = 1 - eta * 4 * e / ((1 + e) * (1 + e));
    const double vp = 1 + eta * 4 * e / ((1 - e) * (1 - e));
    const double mix = mode == spectra::PhaseNoiseMode::small_angle ? sigma * sigma : 0.5 * (1 - std::exp(-2 * sigma * sigma));
    p.var_minus = vm * (1 - mix) + vp * mix;
    p.var_plus = vp * (1 - mix) + vm * mix;
    if (rng != nullptr) {
      p.var_minus *= std::exp(noise * normal(*rng));
      p.var_plus *= std::exp(noise * normal(*rng));
    }
    p.uncertainty = uncertainty;
    data.points.push_back(p);
  }
  return data;
}

}  // namespace

TEST_CASE("default segment length") {
  REQUIRE(default_segment_length(1000000) == 65536);
  REQUIRE(default_segment_length(800) == 100);
  REQUIRE(default_segment_length(4) == 2);
}

TEST_CASE("Welch PSD obeys Parseval on white noise") {
  const auto ts = white_noise(1 << 20, 1e5, 1.7, 1);
  for (auto window : {Window::hann, Window::rectangular}) {
    const auto psd = welch_psd(ts, 4096, 0.5, window);
    const double total = band_power(psd, 0.0, ts.sample_rate / 2);
    REQUIRE_THAT(total, WithinRel(variance(ts), 0.02));
    // flat one-sided density 2 sigma^2 / fs
    REQUIRE_THAT(psd.densities[psd.densities.size() / 2], WithinRel(2 * 1.7 * 1.7 / 1e5, 0.15));
  }
}

TEST_CASE("Welch PSD bookkeeping") {
  const auto ts = white_noise(10000, 1000.0, 1.0, 2);
  const auto psd = welch_psd(ts, 1000, 0.5);
  REQUIRE(psd.segment_length == 1000);
  REQUIRE(psd.segments == 19);
  REQUIRE(psd.frequencies.size() == 501);
  REQUIRE_THAT(psd.resolution(), WithinRel(1.0, 1e-12));
  REQUIRE(psd.frequencies.back() == 500.0);
  REQUIRE(to_string(psd.window) == "hann");
  REQUIRE(window_from_string("rectangular") == Window::rectangular);
  REQUIRE_THROWS_AS(window_from_string("kaiser"), InvalidInput);
}

TEST_CASE("sinusoid power lands in its bin") {
  const double fs = 1e4, f = 1250.0, amp = 0.3;
  TimeSeries ts{fs, std::vector<double>(1 << 16), "rad"};
  for (std::size_t k = 0; k < ts.size(); ++k) ts.samples[k] = amp * std::sin(2 * M_PI * f * static_cast<double>(k) / fs + 0.4);
  const auto psd = welch_psd(ts, 4096);
  REQUIRE_THAT(band_power(psd, f - 20, f + 20), WithinRel(amp * amp / 2, 0.02));
}

TEST_CASE("estimator input checks") {
  const auto ts = white_noise(100, 10.0, 1.0, 3);
  REQUIRE_THROWS_AS(welch_psd(ts, 200), InvalidInput);
  REQUIRE_THROWS_AS(welch_psd(ts, 1), InvalidInput);
  REQUIRE_THROWS_AS(welch_psd(ts, 50, 0.95), InvalidInput);
  REQUIRE_THROWS_AS(welch_psd(TimeSeries{10.0, {}, ""}), InvalidInput);
  const auto psd = welch_psd(ts, 20);
  REQUIRE_THROWS_AS(integrate_psd(psd, 1.0, 1.2), InvalidInput);
  REQUIRE_THROWS_AS(band_power(psd, 2.0, 1.0), InvalidInput);
}

TEST_CASE("calibration rescales to radians") {
  const TimeSeries s{10.0, {0.5, -1.0}, "V"};
  const auto r = apply_calibration(s, 2.0);
  REQUIRE(r.samples == std::vector<double>{1.0, -2.0});
  REQUIRE(r.label == "rad");
  REQUIRE_THROWS_AS(apply_calibration(s, 0.0), InvalidInput);
}

TEST_CASE("fit recovers noiseless parameters") {
  for (auto mode : {spectra::PhaseNoiseMode::small_angle, spectra::PhaseNoiseMode::exact_gaussian}) {
    const auto data = model_dataset(0.85, 0.02, mode, 0.0, nullptr, 0.0);
    FitOptions options;
    options.mode = mode;
    options.bootstrap_resamples = 0;
    const auto fit = fit_phase_noise_model(data, 0.0, options);
    REQUIRE(fit.converged);
    REQUIRE_THAT(fit.eta_hat, WithinAbs(0.85, 1e-6));
    REQUIRE_THAT(fit.sigma_hat, WithinAbs(0.02, 1e-6));
    REQUIRE(fit.residual_norm < 1e-6);
    REQUIRE_FALSE(fit.at_boundary);
  }
}

TEST_CASE("fit uncertainties cover the truth") {
  std::mt19937_64 rng(21);
  int eta_hits = 0, sigma_hits = 0;
  const int trials = 100;
  FitOptions options;
  options.bootstrap_resamples = 0;
  for (int t = 0; t < trials; ++t) {
    const auto data = model_dataset(0.89, 0.01, spectra::PhaseNoiseMode::small_angle, 0.01, &rng, 0.01);
    const auto fit = fit_phase_noise_model(data, 0.0, options);
    if (std::abs(fit.eta_hat - 0.89) < 2 * fit.eta_err) ++eta_hits;
    if (std::abs(fit.sigma_hat - 0.01) < 2 * fit.sigma_err) ++sigma_hits;
  }
  REQUIRE(eta_hits >= 90);
  REQUIRE(sigma_hits >= 90);
}

TEST_CASE("bootstrap is seeded and reproducible") {
  std::mt19937_64 rng(4);
  const auto data = model_dataset(0.8, 0.03, spectra::PhaseNoiseMode::small_angle, 0.02, &rng, 0.0);
  FitOptions options;
  options.bootstrap_resamples = 50;
  const auto a = fit_phase_noise_model(data, 0.0, options);
  const auto b = fit_phase_noise_model(data, 0.0, options);
  REQUIRE(a.eta_err_bootstrap == b.eta_err_bootstrap);
  REQUIRE(a.sigma_err_bootstrap == b.sigma_err_bootstrap);
  REQUIRE(a.eta_err_bootstrap > 0);
  REQUIRE(a.starts_converged >= 1);
}

TEST_CASE("vanishing phase noise is reported at the boundary") {
  const auto data = model_dataset(0.9, 0.0, spectra::PhaseNoiseMode::small_angle, 0.0, nullptr, 0.0);
  FitOptions options;
  options.bootstrap_resamples = 0;
  const auto fit = fit_phase_noise_model(data, 0.0, options);
  REQUIRE(fit.at_boundary);
  REQUIRE(fit.sigma_hat < 1e-3);
  REQUIRE_THAT(fit.eta_hat, WithinAbs(0.9, 1e-4));
}

TEST_CASE("dataset validation") {
  SqueezingDataset small;
  small.points = {{0.5, 0.3, 3.0, 0}, {0.6, 0.2, 5.0, 0}, {0.7, 0.2, 9.0, 0}};
  REQUIRE_THROWS_AS(validate(small), InvalidInput);
  SqueezingDataset flat;
  flat.points.assign(5, SqueezingPoint{0.5, 0.3, 3.0, 0});
  REQUIRE_THROWS_AS(validate(flat), InvalidInput);
  SqueezingDataset negative = flat;
  negative.points[1].epsilon = 0.6;
  negative.points[2].var_minus = -1;
  REQUIRE_THROWS_AS(fit_phase_noise_model(negative, 0.0), InvalidInput);
}
