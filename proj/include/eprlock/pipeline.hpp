#pragma once

// Analysis chains assembled from the library modules: parameter sweeps, the
// lock scenario, synthetic squeezing measurements and the three canned
// figure reproductions.

#include <vector>

#include "eprlock/config.hpp"
#include "eprlock/estimation.hpp"
#include "eprlock/lock_sim.hpp"
#include "eprlock/spectra.hpp"

namespace eprlock::pipeline {

struct BranchPair {
  double minus = 1;
  double plus = 1;
};

/// Squeezed and anti-squeezed variances of the g-weighted combination for
/// the configured detection efficiencies. Equal efficiencies with g = 1 use
/// two_mode_variance directly; otherwise the covariance model (corrected
/// spectra only).
BranchPair branch_variances(const config::RunConfig& cfg, double epsilon, double omega_norm, spectra::Variant variant);

/// Phase-noise mixing of both branches.
BranchPair with_phase_noise(BranchPair ideal, double sigma_theta, spectra::PhaseNoiseMode mode);

struct SpectraRow {
  double omega_norm = 0;
  double var_minus = 1;
  double var_plus = 1;
};

std::vector<SpectraRow> spectra_grid(const config::RunConfig& cfg);

struct SweepRow {
  double epsilon = 0;
  double var_minus_pn = 1;
  double var_plus_pn = 1;
};

/// Pump sweep of the phase-noise-degraded variances at the configured sigma.
std::vector<SweepRow> sweep(const config::RunConfig& cfg, double sigma_theta);

/// Closed-loop run of both locks at the given pump amplitude using the
/// configured loops and disturbances. `stream` selects the noise seeds.
lock::LockRunResult run_lock(const config::RunConfig& cfg, double epsilon, double duration, std::uint64_t stream = 0);

struct LockSummary {
  double sigma_theta_rms = 0;
  double sigma_theta_s = 0;
  double sigma_theta_i = 0;
  double in_lock_fraction = 0;
  std::size_t saturation_count = 0;
  bool unstable = false;
};

LockSummary summarize(const lock::LockRunResult& run);

/// Photocurrents with a common-mode Ornstein-Uhlenbeck phase of standard
/// deviation `sigma_theta` on both arms.
lock::EprRecords synth_epr(const config::RunConfig& cfg, double epsilon, double duration, double rate,
                           double sigma_theta, double corner, std::uint64_t stream = 0);

/// Band-RMS squeezing point of a record pair, normalized to its shot reference.
estimation::SqueezingPoint measure_point(const config::RunConfig& cfg, double epsilon, const lock::EprRecords& records);

double analysis_omega_norm(const config::RunConfig& cfg);

struct Fig3Entry {
  double epsilon = 0;
  lock::Calibration calibration_s;
  lock::Calibration calibration_i;
  estimation::PsdEstimate psd;  // of the calibrated common-mode estimate
  double sigma_theta_estimated = 0;
  LockSummary summary;
};

std::vector<Fig3Entry> reproduce_fig3(const config::RunConfig& cfg);

struct Fig4Result {
  estimation::SqueezingDataset measured;
  estimation::FitResult fit;
  std::vector<SweepRow> model_sweep;  // at the injected eta and sigma
  double omega_norm = 0;
  double injected_eta = 0;
  double injected_sigma = 0;
  double sweep_min_epsilon = 0;
  double sweep_min_db = 0;
};

Fig4Result reproduce_fig4(const config::RunConfig& cfg);

struct Fig5Row {
  double frequency = 0;
  double omega_norm = 0;
  BranchPair ideal;
  BranchPair degraded;
  double var_plus_paper_literal = 1;
};

struct Fig5Result {
  std::vector<Fig5Row> rows;
  spectra::DuanSimon duan_simon;           // at the band centre, no phase noise
  spectra::DuanSimon duan_simon_degraded;  // with the configured common-mode phase noise
};

Fig5Result reproduce_fig5(const config::RunConfig& cfg);

}  // namespace eprlock::pipeline
