#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "eprlock/config.hpp"
#include "eprlock/errors.hpp"
#include "eprlock/estimation.hpp"
#include "eprlock/lock_sim.hpp"
#include "eprlock/nopo.hpp"
#include "eprlock/pipeline.hpp"

using namespace eprlock;
using namespace eprlock::lock;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

nopo::LockFieldState fields(double eps = 0.5) {
  return nopo::steady_state_linear_solve(CavityParams{}, PumpParams{eps, 0.3}, SeedParams{1.0, 0.2});
}

std::pair<LoopConfig, LoopConfig> loops(double ref_s = 0.0, double ref_i = 0.0) {
  LoopConfig s, i;
  s.theta_ref = ref_s;
  i.theta_ref = ref_i;
  s.beat_sign = BeatSign::positive;
  i.beat_sign = BeatSign::negative;
  return {s, i};
}

double tail_max(const TimeSeries& ts, std::size_t count) {
  double m = 0;
  for (std::size_t k = ts.size() - count; k < ts.size(); ++k) m = std::max(m, std::abs(ts.samples[k]));
  return m;
}

}  // namespace

TEST_CASE("disturbance synthesis") {
  SECTION("all-zero spec is a zero series") {
    const auto ts = synth_disturbance(DisturbanceSpec{}, 0.01, 1e4);
    REQUIRE(ts.size() == 100);
    for (double x : ts.samples) REQUIRE(x == 0.0);
  }
  SECTION("random-walk increments have variance D dt") {
    DisturbanceSpec spec;
    spec.random_walk_diffusion = 2.5;
    spec.rng_seed = 5;
    const double rate = 1e6;
    const auto ts = synth_disturbance(spec, 1.0, rate);
    double s = 0, ss = 0;
    for (std::size_t k = 1; k < ts.size(); ++k) {
      const double d = ts.samples[k] - ts.samples[k - 1];
      s += d;
      ss += d * d;
    }
    const double n = static_cast<double>(ts.size() - 1);
    REQUIRE_THAT(ss / n - (s / n) * (s / n), WithinRel(2.5 / rate, 0.05));
  }
  SECTION("a sinusoid carries A^2/2 at its frequency") {
    DisturbanceSpec spec;
    spec.sinusoids = {{500.0, 0.2, 0.1}};
    const auto ts = synth_disturbance(spec, 2.0, 1e4);
    const auto psd = estimation::welch_psd(ts, 4000);
    REQUIRE_THAT(estimation::band_power(psd, 480, 520), WithinRel(0.02, 0.02));
  }
  SECTION("white noise has the requested one-sided density") {
    DisturbanceSpec spec;
    spec.white_noise_density = 1e-6;
    spec.rng_seed = 2;
    const auto ts = synth_disturbance(spec, 1.0, 1e5);
    REQUIRE_THAT(variance(ts), WithinRel(1e-6 * 1e5 / 2, 0.02));
  }
  SECTION("offset and ramp") {
    DisturbanceSpec spec;
    spec.offset = 0.5;
    spec.ramp_rate = 2.0;
    const auto ts = synth_disturbance(spec, 1.0, 100.0);
    REQUIRE(ts.samples.front() == 0.5);
    REQUIRE_THAT(ts.samples.back(), WithinAbs(0.5 + 2.0 * 0.99, 1e-12));
  }
  SECTION("seeded reproducibility") {
    DisturbanceSpec spec;
    spec.random_walk_diffusion = 1.0;
    spec.white_noise_density = 1e-8;
    spec.rng_seed = 99;
    REQUIRE(synth_disturbance(spec, 0.01, 1e5).samples == synth_disturbance(spec, 0.01, 1e5).samples);
    auto other = spec;
    other.rng_seed = 100;
    REQUIRE(synth_disturbance(spec, 0.01, 1e5).samples != synth_disturbance(other, 0.01, 1e5).samples);
  }
  SECTION("invalid input") {
    DisturbanceSpec spec;
    spec.random_walk_diffusion = -1;
    REQUIRE_THROWS_AS(synth_disturbance(spec, 1.0, 10.0), InvalidInput);
    REQUIRE_THROWS_AS(synth_disturbance(DisturbanceSpec{}, 0.1, 10.0), InvalidInput);
  }
}

TEST_CASE("Ornstein-Uhlenbeck phase has the requested spread") {
  const auto ts = synth_ou_phase(0.01, 1e3, 5.0, 2e5, 3);
  REQUIRE_THAT(std::sqrt(variance(ts)), WithinRel(0.01, 0.05));
}

TEST_CASE("homodyne error signal") {
  REQUIRE_THAT(error_signal(-0.4, 1.0, 1.0, 0.4, BeatSign::positive), WithinAbs(0.0, 1e-15));
  REQUIRE(error_signal(-0.4 + 1e-3, 1.0, 1.0, 0.4, BeatSign::positive) > 0);
  REQUIRE_THAT(error_signal(M_PI / 2 - 0.3, 2.0, 0.5, 0.3, BeatSign::positive), WithinRel(1.0, 1e-15));
  REQUIRE_THAT(error_signal(0.7, 1.0, 1.0, 0.2, BeatSign::negative), WithinRel(std::sin(0.5), 1e-15));
  double lo = 1e9, hi = -1e9;
  for (int k = 0; k < 1000; ++k) {
    const double v = error_signal(2 * M_PI * k / 999.0, 1.5, 0.4, 0.1, BeatSign::negative);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  REQUIRE_THAT(hi - lo, WithinRel(2 * 1.5 * 0.4, 1e-5));
  REQUIRE_THROWS_AS(error_signal(0.0, -1.0, 1.0, 0.0, BeatSign::positive), InvalidInput);
}

TEST_CASE("lock-in demodulation") {
  const double fs = 1e6, fc = 10e3;
  const double tau = 1 / (2 * M_PI * fc);
  SECTION("constant phase settles within five time constants") {
    ComplexSeries z{fs, std::vector<std::complex<double>>(static_cast<std::size_t>(6 * tau * fs), std::polar(0.7, 0.5))};
    const auto out = lockin_demodulate(z, 0.3, fc);
    const auto k5 = static_cast<std::size_t>(5 * tau * fs);
    REQUIRE_THAT(out.samples[k5], WithinRel(0.7 * std::sin(0.8), 0.01));
  }
  SECTION("zero input gives zero output") {
    ComplexSeries z{fs, std::vector<std::complex<double>>(1000)};
    for (double x : lockin_demodulate(z, 1.0, fc).samples) REQUIRE(x == 0.0);
  }
  SECTION("slow phase modulation passes with < 1 dB loss") {
    const double fm = 500, depth = 0.05;
    ComplexSeries z{fs, {}};
    for (int k = 0; k < 20000; ++k) z.samples.push_back(std::polar(1.0, depth * std::sin(2 * M_PI * fm * k / fs)));
    const auto out = lockin_demodulate(z, 0.0, fc);
    const double peak = tail_max(out, 4000);
    REQUIRE(20 * std::log10(peak / std::sin(depth)) > -1.0);
  }
  SECTION("cutoff above a quarter of the sample rate is rejected") {
    ComplexSeries z{fs, std::vector<std::complex<double>>(10)};
    REQUIRE_THROWS_AS(lockin_demodulate(z, 0.0, 0.3 * fs), InvalidInput);
  }
}

TEST_CASE("filters") {
  OnePoleLowPass lpf(1e3, 1e6);
  double y = 0;
  for (int k = 0; k < 5000; ++k) y = lpf.step(1.0);
  REQUIRE_THAT(y, WithinAbs(1.0, 1e-6));

  ResonantActuator act(20e3, 10, 1e6);
  double x = 0;
  for (int k = 0; k < 20000; ++k) x = act.step(1.0);
  REQUIRE_THAT(x, WithinAbs(1.0, 1e-9));

  // pre-warped bilinear transform keeps |H| = Q exactly at resonance
  ResonantActuator res(20e3, 10, 1e6);
  double peak = 0;
  for (int k = 0; k < 200000; ++k) {
    const double out = res.step(std::sin(2 * M_PI * 20e3 * k / 1e6));
    if (k > 150000) peak = std::max(peak, std::abs(out));
  }
  REQUIRE_THAT(peak, WithinRel(10.0, 0.01));
  REQUIRE_THROWS_AS(ResonantActuator(600e3, 10, 1e6), InvalidInput);
}

TEST_CASE("closed loop without disturbance stays on the lock point") {
  auto [ls, li] = loops(0.3, -0.2);
  const auto run = run_closed_loop(ls, li, Disturbances{}, fields(), 0.01, 1e6);
  REQUIRE(tail_max(run.residual_theta_s, run.residual_theta_s.size()) < 1e-12);
  REQUIRE(tail_max(run.residual_theta_i, run.residual_theta_i.size()) < 1e-12);
  REQUIRE(run.in_lock_fraction == 1.0);
  REQUIRE(run.saturation_events.empty());
  REQUIRE_FALSE(run.unstable);
}

TEST_CASE("integral action rejects constant offsets") {
  auto [ls, li] = loops();
  Disturbances d;
  d.signal.offset = 0.1;
  d.pump.offset = -0.05;
  const auto run = run_closed_loop(ls, li, d, fields(), 0.05, 1e6);
  REQUIRE(std::abs(run.residual_theta_s.samples.back()) < 1e-6);
  REQUIRE(std::abs(run.residual_theta_i.samples.back()) < 1e-6);
}

TEST_CASE("pump phase reaches only the idler lock") {
  auto [ls, li] = loops();
  Disturbances d;
  d.pump.offset = 0.2;
  const auto run = run_closed_loop(ls, li, d, fields(), 0.005, 1e6);
  REQUIRE(tail_max(run.residual_theta_s, run.residual_theta_s.size()) == 0.0);
  REQUIRE(run.residual_theta_i.samples.front() == Catch::Approx(0.2));
}

TEST_CASE("common-mode trace is the pointwise mean") {
  auto [ls, li] = loops();
  Disturbances d;
  d.signal.random_walk_diffusion = 3.0;
  d.idler.random_walk_diffusion = 1.0;
  d.signal.rng_seed = 1;
  d.idler.rng_seed = 2;
  const auto run = run_closed_loop(ls, li, d, fields(), 0.02, 1e6);
  for (std::size_t k = 0; k < run.common_mode_theta.size(); ++k) {
    REQUIRE(run.common_mode_theta.samples[k] ==
            0.5 * (run.residual_theta_s.samples[k] + run.residual_theta_i.samples[k]));
  }
  const auto again = run_closed_loop(ls, li, d, fields(), 0.02, 1e6);
  REQUIRE(again.residual_theta_s.samples == run.residual_theta_s.samples);
}

TEST_CASE("drift beyond the actuator range saturates the lock") {
  auto [ls, li] = loops();
  Disturbances d;
  d.signal.ramp_rate = 400.0;  // 20 rad in 50 ms, twice the range
  const auto run = run_closed_loop(ls, li, d, fields(), 0.05, 1e6);
  REQUIRE(run.saturation_events.size() >= 1);
  REQUIRE(run.in_lock_fraction < 1.0);
  REQUIRE(run.saturation_events.front() > 0.02);
}

TEST_CASE("excessive gain is flagged, not thrown") {
  auto [ls, li] = loops();
  ls.kp = li.kp = 50.0;
  Disturbances d;
  d.signal.random_walk_diffusion = 1.0;
  d.signal.rng_seed = 3;
  const auto run = run_closed_loop(ls, li, d, fields(), 0.01, 1e6);
  REQUIRE(run.unstable);
}

TEST_CASE("closed-loop preconditions") {
  auto [ls, li] = loops();
  REQUIRE_THROWS_AS(run_closed_loop(ls, ls, Disturbances{}, fields(), 0.01, 1e6), InvalidInput);
  REQUIRE_THROWS_AS(run_closed_loop(ls, li, Disturbances{}, fields(), 0.01, 1e5), InvalidInput);
  REQUIRE_THROWS_AS(run_closed_loop(ls, li, Disturbances{}, fields(0.0), 0.01, 1e6), InvalidInput);
  LoopConfig bad = ls;
  bad.actuator_range = 0;
  REQUIRE_THROWS_AS(run_closed_loop(bad, li, Disturbances{}, fields(), 0.01, 1e6), InvalidInput);
}

TEST_CASE("default lock scenario meets the phase-noise target") {
  const auto cfg = config::defaults();
  const auto summary = pipeline::summarize(pipeline::run_lock(cfg, cfg.pump.epsilon, 1.0));
  REQUIRE(summary.sigma_theta_rms <= 0.010);
  REQUIRE(summary.sigma_theta_rms >= 0.008);
  REQUIRE(summary.in_lock_fraction == 1.0);
  REQUIRE(summary.saturation_count == 0);
}

TEST_CASE("fringe calibration") {
  auto scan = [](double amplitude, double noise, double clip, std::vector<double>* phases) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> normal(0.0, noise);
    TimeSeries ts{1e3, {}, "V"};
    for (int k = 0; k <= 1000; ++k) {
      const double phi = 2 * M_PI * k / 1000.0;
      double v = amplitude * std::sin(phi + 0.3) + (noise > 0 ? normal(rng) : 0.0);
      ts.samples.push_back(std::clamp(v, -clip, clip));
      if (phases) phases->push_back(phi);
    }
    return ts;
  };
  const auto ideal = calibrate_error_signal(scan(1.0, 0, 10, nullptr), 2 * M_PI);
  REQUIRE_THAT(ideal.s_pp, WithinRel(2.0, 1e-5));
  REQUIRE_THAT(ideal.beta, WithinRel(1.0, 1e-5));
  REQUIRE_THAT(calibrate_error_signal(scan(0.5, 0, 10, nullptr), 2 * M_PI).beta, WithinRel(2.0, 1e-5));

  // 20 dB SNR: noise rms = amplitude / sqrt(2) / 10
  std::vector<double> phases;
  const auto noisy = scan(1.0, 1.0 / std::sqrt(2.0) / 10, 10, &phases);
  REQUIRE_THAT(calibrate_error_signal(noisy, 2 * M_PI, CalibrationMethod::sine_fit, phases).beta, WithinRel(1.0, 0.05));
  phases.clear();
  const auto clipped = scan(1.0, 0.02, 0.9, &phases);
  REQUIRE_THAT(calibrate_error_signal(clipped, 2 * M_PI, CalibrationMethod::sine_fit, phases).beta, WithinRel(1.0, 0.05));

  REQUIRE_THROWS_AS(calibrate_error_signal(scan(1.0, 0, 10, nullptr), 1.5 * M_PI), InvalidInput);
  REQUIRE_THROWS_AS(calibrate_error_signal(TimeSeries{1.0, std::vector<double>(10, 0.3), ""}, 2 * M_PI), NumericalError);
}

TEST_CASE("synthetic photocurrents") {
  EprSynthesis base;
  base.duration = 5.0;
  base.rate = 200e3;
  base.dark_noise_clearance_db.reset();
  const std::pair<TimeSeries, TimeSeries> locked;

  SECTION("no pump: uncorrelated shot noise") {
    auto cfg = base;
    cfg.epsilon = 0.0;
    const auto r = synth_epr_photocurrents(cfg, locked);
    const double n = static_cast<double>(r.q_s.size());
    REQUIRE_THAT(variance(r.q_s), WithinAbs(1.0, 4 * std::sqrt(2 / n)));
    REQUIRE_THAT(variance(r.q_i), WithinAbs(1.0, 4 * std::sqrt(2 / n)));
    double cov = 0;
    for (std::size_t k = 0; k < r.q_s.size(); ++k) cov += r.q_s.samples[k] * r.q_i.samples[k];
    REQUIRE(std::abs(cov / n) < 4 / std::sqrt(n));
  }

  SECTION("joint quadratures carry the two-mode spectra") {
    const auto r = synth_epr_photocurrents(base, locked);
    const auto minus = combine_quadratures(r.q_s, r.q_i, 1.0, -1.0);
    const auto plus = combine_quadratures(r.q_s, r.q_i, 1.0, 1.0);
    const double n = static_cast<double>(r.q_s.size());
    // spectra are flat far below the linewidth
    const double vm = 1 - 0.89 * 3.2 / 3.24, vp = 1 + 0.89 * 3.2 / 0.04;
    REQUIRE_THAT(variance(minus), WithinAbs(vm, 3 * vm * std::sqrt(2 / n)));
    REQUIRE_THAT(variance(plus), WithinAbs(vp, 3 * vp * std::sqrt(2 / n)));
    REQUIRE_THAT(band_rms(minus, 5e3, 15e3, r.shot_reference), WithinAbs(0.121, 0.01));
  }

  SECTION("common-mode phase noise mixes in the anti-squeezed branch") {
    const auto theta = synth_ou_phase(0.1, 1e3, base.duration, base.rate, 12);
    const auto r = synth_epr_photocurrents(base, {theta, theta});
    const auto minus = combine_quadratures(r.q_s, r.q_i, 1.0, -1.0);
    const auto p = spectra::spectrum_point(0.8, 0.89, 0.0);
    const double expected = spectra::phase_noise_variance(p.var_minus, p.var_plus, 0.1);
    REQUIRE_THAT(band_rms(minus, 5e3, 15e3, r.shot_reference), WithinRel(expected, 0.05));
  }

  SECTION("differential phase offsets leave the joint quadratures unchanged") {
    const TimeSeries plus_d{base.rate, std::vector<double>(10, 0.2), "rad"};
    const TimeSeries minus_d{base.rate, std::vector<double>(10, -0.2), "rad"};
    const auto r0 = synth_epr_photocurrents(base, locked);
    const auto r1 = synth_epr_photocurrents(base, {plus_d, minus_d});
    for (double sign : {-1.0, 1.0}) {
      const double v0 = band_rms(combine_quadratures(r0.q_s, r0.q_i, 1.0, sign), 5e3, 15e3, r0.shot_reference);
      const double v1 = band_rms(combine_quadratures(r1.q_s, r1.q_i, 1.0, sign), 5e3, 15e3, r1.shot_reference);
      REQUIRE_THAT(v1, WithinRel(v0, 0.03));
    }
  }

  SECTION("seeded determinism") {
    auto cfg = base;
    cfg.duration = 0.01;
    const auto a = synth_epr_photocurrents(cfg, locked);
    const auto b = synth_epr_photocurrents(cfg, locked);
    REQUIRE(a.q_s.samples == b.q_s.samples);
    REQUIRE(a.q_i.samples == b.q_i.samples);
  }

  SECTION("out-of-range pump is a domain error") {
    auto cfg = base;
    cfg.epsilon = 1.0;
    REQUIRE_THROWS_AS(synth_epr_photocurrents(cfg, locked), DomainError);
  }
}

TEST_CASE("band-limited variance normalization") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  TimeSeries ref{200e3, std::vector<double>(400000), "shot-noise units"};
  for (auto& x : ref.samples) x = normal(rng);
  REQUIRE_THAT(band_rms(ref, 5e3, 15e3, ref), WithinAbs(1.0, 1e-12));
  TimeSeries twice = ref;
  for (auto& x : twice.samples) x *= 2;
  REQUIRE_THAT(band_rms(twice, 5e3, 15e3, ref), WithinAbs(4.0, 1e-9));
  REQUIRE_THROWS_AS(band_rms(ref, 5e3, 150e3, ref), InvalidInput);
  TimeSeries other_rate = ref;
  other_rate.sample_rate = 100e3;
  REQUIRE_THROWS_AS(band_rms(ref, 5e3, 15e3, other_rate), InvalidInput);
}

TEST_CASE("quadrature combination") {
  const TimeSeries a{1.0, {1.0, 2.0}, ""}, b{1.0, {3.0, -1.0}, ""};
  const auto c = combine_quadratures(a, b, 2.0, -1.0);
  REQUIRE_THAT(c.samples[0], WithinRel((1.0 - 6.0) / std::sqrt(2.0), 1e-15));
  REQUIRE_THAT(c.samples[1], WithinRel((2.0 + 2.0) / std::sqrt(2.0), 1e-15));
}
