#include "eprlock/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "eprlock/errors.hpp"
#include "eprlock/nopo.hpp"
#include "parallel.hpp"

namespace eprlock::pipeline {

namespace {

// Stream ids for derive_seed.
constexpr std::uint64_t kLockStreams = 100;
constexpr std::uint64_t kSynthStreams = 1000;
constexpr std::uint64_t kPhaseStreams = 2000;

std::vector<double> grid(double lo, double hi, std::size_t points) {
  std::vector<double> out(points, lo);
  for (std::size_t k = 1; k < points; ++k) {
    out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  }
  return out;
}

}  // namespace

BranchPair branch_variances(const config::RunConfig& cfg, double epsilon, double omega_norm, spectra::Variant variant) {
  const auto& d = cfg.detection;
  if (d.eta_s == d.eta_i && d.g_weight == 1.0) {
    return {spectra::two_mode_variance(epsilon, d.eta_s, omega_norm, spectra::Sign::minus, variant),
            spectra::two_mode_variance(epsilon, d.eta_s, omega_norm, spectra::Sign::plus, variant)};
  }
  if (variant != spectra::Variant::corrected) {
    throw InvalidInput("paper_literal spectra need equal efficiencies and g = 1");
  }
  const auto model = spectra::build_covariance_model(epsilon, d.eta_s, d.eta_i, omega_norm);
  return {spectra::weighted_variance(model, d.g_weight, spectra::Sign::minus),
          spectra::weighted_variance(model, d.g_weight, spectra::Sign::plus)};
}

BranchPair with_phase_noise(BranchPair ideal, double sigma_theta, spectra::PhaseNoiseMode mode) {
  return {spectra::phase_noise_variance(ideal.minus, ideal.plus, sigma_theta, mode),
          spectra::phase_noise_variance(ideal.plus, ideal.minus, sigma_theta, mode)};
}

std::vector<SpectraRow> spectra_grid(const config::RunConfig& cfg) {
  std::vector<SpectraRow> rows;
  for (double omega : grid(cfg.spectra.omega_min, cfg.spectra.omega_max, cfg.spectra.points)) {
    const auto pair = branch_variances(cfg, cfg.pump.epsilon, omega, cfg.spectra.variant);
    rows.push_back({omega, pair.minus, pair.plus});
  }
  return rows;
}

std::vector<SweepRow> sweep(const config::RunConfig& cfg, double sigma_theta) {
  const auto epsilons = grid(cfg.sweep.eps_min, cfg.sweep.eps_max, cfg.sweep.points);
  std::vector<SweepRow> rows(epsilons.size());
  detail::parallel_for(epsilons.size(), [&](std::size_t k) {
    const auto ideal = branch_variances(cfg, epsilons[k], cfg.sweep.omega_norm, spectra::Variant::corrected);
    const auto noisy = with_phase_noise(ideal, sigma_theta, cfg.sweep.mode);
    rows[k] = {epsilons[k], noisy.minus, noisy.plus};
  });
  return rows;
}

lock::LockRunResult run_lock(const config::RunConfig& cfg, double epsilon, double duration, std::uint64_t stream) {
  PumpParams pump = cfg.pump;
  pump.epsilon = epsilon;
  const auto fields = nopo::steady_state_linear_solve(cfg.cavity, pump, cfg.seed);
  lock::Disturbances dist = cfg.lock.disturbances;
  const std::uint64_t base = kLockStreams + 10 * stream;
  dist.signal.rng_seed = config::derive_seed(cfg.rng_seed, base);
  dist.idler.rng_seed = config::derive_seed(cfg.rng_seed, base + 1);
  dist.pump.rng_seed = config::derive_seed(cfg.rng_seed, base + 2);
  lock::LoopConfig loop_s = cfg.lock.loop_s;
  lock::LoopConfig loop_i = cfg.lock.loop_i;
  loop_s.theta_ref = cfg.detection.theta_ref_s;
  loop_i.theta_ref = cfg.detection.theta_ref_i;
  return lock::run_closed_loop(loop_s, loop_i, dist, fields, duration, cfg.lock.rate,
                               cfg.frequency_plan.omega_cl_offset);
}

LockSummary summarize(const lock::LockRunResult& run) {
  LockSummary s;
  s.sigma_theta_rms = rms(run.common_mode_theta);
  s.sigma_theta_s = rms(run.residual_theta_s);
  s.sigma_theta_i = rms(run.residual_theta_i);
  s.in_lock_fraction = run.in_lock_fraction;
  s.saturation_count = run.saturation_events.size();
  s.unstable = run.unstable;
  return s;
}

lock::EprRecords synth_epr(const config::RunConfig& cfg, double epsilon, double duration, double rate,
                           double sigma_theta, double corner, std::uint64_t stream) {
  lock::EprSynthesis synth;
  synth.epsilon = epsilon;
  synth.eta_s = cfg.detection.eta_s;
  synth.eta_i = cfg.detection.eta_i;
  synth.gamma = cfg.cavity.gamma_total();
  synth.duration = duration;
  synth.rate = rate;
  synth.rng_seed = config::derive_seed(cfg.rng_seed, kSynthStreams + stream);
  synth.dark_noise_clearance_db = cfg.synth.dark_noise_clearance_db;
  std::pair<TimeSeries, TimeSeries> residual;
  if (sigma_theta > 0) {
    residual.first = lock::synth_ou_phase(sigma_theta, corner, duration, rate,
                                          config::derive_seed(cfg.rng_seed, kPhaseStreams + stream));
    residual.second = residual.first;
  }
  return lock::synth_epr_photocurrents(synth, residual);
}

double analysis_omega_norm(const config::RunConfig& cfg) {
  return 0.5 * (cfg.estimation.band_lo + cfg.estimation.band_hi) / cfg.cavity.gamma_total();
}

estimation::SqueezingPoint measure_point(const config::RunConfig& cfg, double epsilon, const lock::EprRecords& records) {
  const double g = cfg.detection.g_weight;
  const auto minus = lock::combine_quadratures(records.q_s, records.q_i, g, -1.0);
  const auto plus = lock::combine_quadratures(records.q_s, records.q_i, g, +1.0);
  // The weighted combinations carry (1 + g^2)/2 units of shot noise.
  const double shot = 0.5 * (1.0 + g * g);
  estimation::SqueezingPoint point;
  point.epsilon = epsilon;
  point.var_minus = lock::band_rms(minus, cfg.estimation.band_lo, cfg.estimation.band_hi, records.shot_reference) / shot;
  point.var_plus = lock::band_rms(plus, cfg.estimation.band_lo, cfg.estimation.band_hi, records.shot_reference) / shot;
  return point;
}

std::vector<Fig3Entry> reproduce_fig3(const config::RunConfig& cfg) {
  const auto& epsilons = cfg.reproduce.fig3.epsilons;
  std::vector<Fig3Entry> entries(epsilons.size());
  detail::parallel_for(epsilons.size(), [&](std::size_t k) {
    Fig3Entry& e = entries[k];
    e.epsilon = epsilons[k];
    const auto run = run_lock(cfg, e.epsilon, cfg.reproduce.fig3.duration, k + 1);
    e.summary = summarize(run);

    // Calibrate each error signal on a full fringe recorded with the same
    // demodulation gain, as done before closing the loops.
    PumpParams pump = cfg.pump;
    pump.epsilon = e.epsilon;
    const auto fields = nopo::steady_state_linear_solve(cfg.cavity, pump, cfg.seed);
    auto fringe = [&](const lock::LoopConfig& loop, double amp_cl, double theta_ref, lock::BeatSign sign) {
      constexpr std::size_t n = 1000;
      TimeSeries scan{static_cast<double>(n), std::vector<double>(n), "signal"};
      std::vector<double> phases(n);
      for (std::size_t j = 0; j < n; ++j) {
        phases[j] = kTwoPi * static_cast<double>(j) / static_cast<double>(n - 1);
        scan.samples[j] = lock::error_signal(phases[j], loop.lo_amplitude, amp_cl, theta_ref, sign);
      }
      return lock::calibrate_error_signal(scan, phases.back() - phases.front(), cfg.estimation.calibration, phases);
    };
    e.calibration_s = fringe(cfg.lock.loop_s, std::abs(fields.a_cls), cfg.detection.theta_ref_s, lock::BeatSign::positive);
    e.calibration_i = fringe(cfg.lock.loop_i, std::abs(fields.a_cli), cfg.detection.theta_ref_i, lock::BeatSign::negative);

    TimeSeries theta{run.error_s.sample_rate, std::vector<double>(run.error_s.size()), "rad"};
    for (std::size_t j = 0; j < theta.size(); ++j) {
      theta.samples[j] =
          0.5 * (e.calibration_s.beta * run.error_s.samples[j] + e.calibration_i.beta * run.error_i.samples[j]);
    }
    e.psd = estimation::welch_psd(theta, cfg.estimation.segment_length, cfg.estimation.overlap, cfg.estimation.window);
    e.sigma_theta_estimated = estimation::integrate_psd(e.psd, e.psd.frequencies[1], e.psd.frequencies.back());
  });
  return entries;
}

Fig4Result reproduce_fig4(const config::RunConfig& cfg) {
  const auto& f4 = cfg.reproduce.fig4;
  if (f4.epsilons.size() < 4) throw InvalidInput("fig4 needs at least four pump values");
  if (!(f4.rate >= 10.0 * cfg.estimation.band_hi)) throw InvalidInput("fig4 rate must be >= 10x the band upper edge");
  const double duration = static_cast<double>(f4.samples) / f4.rate;

  Fig4Result result;
  result.injected_eta = cfg.detection.eta_s;
  result.injected_sigma = f4.sigma_theta;
  result.omega_norm = analysis_omega_norm(cfg);
  result.measured.points.resize(f4.epsilons.size());
  detail::parallel_for(f4.epsilons.size(), [&](std::size_t k) {
    const auto records = synth_epr(cfg, f4.epsilons[k], duration, f4.rate, f4.sigma_theta, f4.corner, k);
    result.measured.points[k] = measure_point(cfg, f4.epsilons[k], records);
  });

  estimation::FitOptions options;
  options.mode = cfg.estimation.fit_mode;
  options.bootstrap_resamples = cfg.estimation.bootstrap_resamples;
  options.bootstrap_seed = config::derive_seed(cfg.rng_seed, 3000);
  result.fit = estimation::fit_phase_noise_model(result.measured, result.omega_norm, options);

  result.model_sweep = sweep(cfg, f4.sigma_theta);
  const auto best = std::min_element(result.model_sweep.begin(), result.model_sweep.end(),
                                     [](const SweepRow& a, const SweepRow& b) { return a.var_minus_pn < b.var_minus_pn; });
  result.sweep_min_epsilon = best->epsilon;
  result.sweep_min_db = db(best->var_minus_pn);
  return result;
}

Fig5Result reproduce_fig5(const config::RunConfig& cfg) {
  const auto& f5 = cfg.reproduce.fig5;
  if (f5.points < 2 || !(f5.f_hi > f5.f_lo)) throw InvalidInput("fig5 needs f_lo < f_hi and at least two points");
  const double gamma = cfg.cavity.gamma_total();
  const double sigma = spectra::sigma_theta_common(cfg.phase_noise);
  const double eps = cfg.pump.epsilon;

  Fig5Result result;
  for (double f : grid(f5.f_lo, f5.f_hi, f5.points)) {
    Fig5Row row;
    row.frequency = f;
    row.omega_norm = f / gamma;
    row.ideal = branch_variances(cfg, eps, row.omega_norm, spectra::Variant::corrected);
    row.degraded = with_phase_noise(row.ideal, sigma, cfg.sweep.mode);
    row.var_plus_paper_literal =
        spectra::two_mode_variance(eps, cfg.detection.eta_s, row.omega_norm, spectra::Sign::plus, spectra::Variant::paper_literal);
    result.rows.push_back(row);
  }
  const double centre = 0.5 * (f5.f_lo + f5.f_hi) / gamma;
  const auto ideal = branch_variances(cfg, eps, centre, spectra::Variant::corrected);
  const auto degraded = with_phase_noise(ideal, sigma, cfg.sweep.mode);
  // The pi/2-rotated plus combination carries the squeezed spectrum.
  result.duan_simon = spectra::duan_simon(ideal.minus, spectra::orthogonal_variance(ideal.plus, ideal.minus, spectra::Sign::plus));
  result.duan_simon_degraded =
      spectra::duan_simon(degraded.minus, spectra::orthogonal_variance(degraded.plus, degraded.minus, spectra::Sign::plus));
  return result;
}

}  // namespace eprlock::pipeline
