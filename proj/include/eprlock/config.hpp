#pragma once

// Run configuration shared by the command-line tool and the canned
// reproduction scenarios. Every field has a default; a JSON file and
// `key=value` overrides are merged on top of them.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "eprlock/estimation.hpp"
#include "eprlock/lock_sim.hpp"
#include "eprlock/model.hpp"
#include "eprlock/spectra.hpp"

namespace eprlock::config {

struct IntegrateBlock {
  double t_end_decays = 50.0;  // t_end in units of 1/gamma
  double dt_decays = 0.05;     // step in units of 1/gamma
  std::size_t decimation = 10;
};

struct SpectraBlock {
  double omega_min = 0.0;
  double omega_max = 2.0;
  std::size_t points = 201;
  spectra::Variant variant = spectra::Variant::corrected;
};

struct SweepBlock {
  double eps_min = 0.0;
  double eps_max = 0.95;
  std::size_t points = 96;
  double omega_norm = 0.0;
  spectra::PhaseNoiseMode mode = spectra::PhaseNoiseMode::small_angle;
};

struct LockBlock {
  double duration = 0.2;  // s
  double rate = 1e6;      // Hz
  std::size_t decimation = 100;
  lock::LoopConfig loop_s;
  lock::LoopConfig loop_i;
  lock::Disturbances disturbances;
};

struct SynthBlock {
  double duration = 1.0;
  double rate = 200e3;
  std::optional<double> dark_noise_clearance_db = 24.0;
  double residual_sigma = 0.0;      // rad, injected common-mode phase noise
  double residual_corner = 1e3;     // Hz
};

struct EstimationBlock {
  std::size_t segment_length = 0;  // 0 = default
  double overlap = 0.5;
  estimation::Window window = estimation::Window::hann;
  double band_lo = 5e3;
  double band_hi = 15e3;
  spectra::PhaseNoiseMode fit_mode = spectra::PhaseNoiseMode::small_angle;
  int bootstrap_resamples = 200;
  lock::CalibrationMethod calibration = lock::CalibrationMethod::peak_to_peak;
};

struct Fig3Block {
  std::vector<double> epsilons{0.39, 0.54, 0.78};
  double duration = 0.2;
};

struct Fig4Block {
  std::vector<double> epsilons{0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.85};
  double sigma_theta = 0.01;
  double corner = 1e3;
  std::size_t samples = 1000000;
  double rate = 200e3;
};

struct Fig5Block {
  double f_lo = 5e3;
  double f_hi = 17e3;
  std::size_t points = 121;
};

struct ReproduceBlock {
  Fig3Block fig3;
  Fig4Block fig4;
  Fig5Block fig5;
};

struct RunConfig {
  FrequencyPlan frequency_plan;
  CavityParams cavity;
  PumpParams pump;
  SeedParams seed;
  DetectionParams detection;
  PhaseNoiseSpec phase_noise;

  std::uint64_t rng_seed = 1;
  std::string output_dir = "out";

  IntegrateBlock integrate;
  SpectraBlock spectra;
  SweepBlock sweep;
  LockBlock lock;
  SynthBlock synth;
  EstimationBlock estimation;
  ReproduceBlock reproduce;
};

/// Built-in defaults, including the tuned lock disturbance scenario.
RunConfig defaults();

nlohmann::json to_json(const RunConfig& config);

/// Parses a complete document (as produced by to_json). Throws InvalidInput on
/// type errors or invalid enum names.
RunConfig from_json(const nlohmann::json& document);

/// Merges `patch` into `base`. Keys absent from `base` are rejected, so
/// misspelled settings never pass silently.
void merge_strict(nlohmann::json& base, const nlohmann::json& patch, const std::string& where = "");

/// Applies "a.b.c=value". The value is read as JSON when it parses, otherwise
/// as a string.
void apply_override(nlohmann::json& document, const std::string& assignment);

/// Runs every module-level invariant check that applies to the whole config.
void validate(const RunConfig& config);

/// FNV-1a 64-bit hash of the canonical (sorted-key) dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& document);

/// Independent stream seed derived from the run seed (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stream);

}  // namespace eprlock::config
