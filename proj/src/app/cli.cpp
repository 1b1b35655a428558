#include "eprlock/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include "CLI11.hpp"
#include "app/csv.hpp"
#include "eprlock/config.hpp"
#include "eprlock/errors.hpp"
#include "eprlock/kernels.hpp"
#include "eprlock/nopo.hpp"
#include "eprlock/pipeline.hpp"
#include "json.hpp"

#ifndef EPRLOCK_VERSION
#define EPRLOCK_VERSION "0.0.0"
#endif

namespace eprlock::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string input;
  std::string scenario;
};

class Session {
 public:
  Session(std::string subcommand, const Options& options) : subcommand_(std::move(subcommand)) {
    document_ = config::to_json(config::defaults());
    if (!options.config_path.empty()) {
      std::ifstream in(options.config_path);
      if (!in) throw InvalidInput("cannot read config " + options.config_path);
      json file = json::parse(in, nullptr, false);
      if (file.is_discarded()) throw InvalidInput("config " + options.config_path + " is not valid JSON");
      config::merge_strict(document_, file);
    }
    for (const auto& assignment : options.overrides) config::apply_override(document_, assignment);
    if (options.seed) document_["rng_seed"] = *options.seed;
    if (!options.out_dir.empty()) document_["output_dir"] = options.out_dir;
    cfg = config::from_json(document_);
    config::validate(cfg);
    out_dir_ = cfg.output_dir;
    fs::create_directories(out_dir_);
  }

  fs::path file(const std::string& name) {
    outputs_.push_back(name);
    return out_dir_ / name;
  }

  void write_json(const std::string& name, const json& value) {
    std::ofstream out(file(name), std::ios::binary);
    out << value.dump(2) << '\n';
    if (!out) throw InvalidInput("failed writing " + (out_dir_ / name).string());
  }

  void finish() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    json manifest = {{"tool", "eprlock"},
                     {"version", EPRLOCK_VERSION},
                     {"subcommand", subcommand_},
                     {"config_hash", config::config_hash(document_)},
                     {"seed", cfg.rng_seed},
                     {"kernels", std::string(kernels::active().name)},
                     {"outputs", outputs_},
                     {"config", document_},
                     {"timestamp", stamp}};
    std::ofstream out(out_dir_ / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
  }

  config::RunConfig cfg;

 private:
  std::string subcommand_;
  json document_;
  fs::path out_dir_;
  std::vector<std::string> outputs_;
};

json complex_json(ComplexAmp z) { return json::array({z.real(), z.imag()}); }

json fit_json(const estimation::FitResult& fit) {
  return {{"eta_hat", fit.eta_hat},
          {"sigma_hat", fit.sigma_hat},
          {"eta_err", fit.eta_err},
          {"sigma_err", fit.sigma_err},
          {"eta_err_bootstrap", fit.eta_err_bootstrap},
          {"sigma_err_bootstrap", fit.sigma_err_bootstrap},
          {"residual_norm", fit.residual_norm},
          {"converged", fit.converged},
          {"at_boundary", fit.at_boundary},
          {"starts_converged", fit.starts_converged}};
}

json summary_json(const pipeline::LockSummary& s) {
  return {{"sigma_theta_rms", s.sigma_theta_rms},
          {"sigma_theta_s", s.sigma_theta_s},
          {"sigma_theta_i", s.sigma_theta_i},
          {"in_lock_fraction", s.in_lock_fraction},
          {"saturation_count", s.saturation_count},
          {"unstable", s.unstable}};
}

void write_sweep(Session& session, const std::string& name, const std::vector<pipeline::SweepRow>& rows) {
  csv::Writer w(session.file(name), {"epsilon", "var_minus_pn", "var_plus_pn"});
  for (const auto& r : rows) w.row({r.epsilon, r.var_minus_pn, r.var_plus_pn});
  w.close();
}

void write_psd(Session& session, const std::string& name, const estimation::PsdEstimate& psd) {
  csv::Writer w(session.file(name), {"f", "density"});
  for (std::size_t k = 0; k < psd.frequencies.size(); ++k) w.row({psd.frequencies[k], psd.densities[k]});
  w.close();
}

const std::vector<double>& column(const csv::Table& table, const std::string& name, std::vector<double>& storage) {
  const int index = table.column(name);
  if (index < 0) throw InvalidInput("input lacks a '" + name + "' column");
  storage.clear();
  for (const auto& row : table.rows) storage.push_back(row[static_cast<std::size_t>(index)]);
  return storage;
}

// Subcommands.

void cmd_steady_state(Session& s, std::ostream& out) {
  const auto state = nopo::steady_state_linear_solve(s.cfg.cavity, s.cfg.pump, s.cfg.seed);
  const json result = {{"a_cls", complex_json(state.a_cls)},
                       {"a_cli", complex_json(state.a_cli)},
                       {"phi_cls", state.phi_cls},
                       {"phi_cli", state.phi_cli},
                       {"gain", nopo::parametric_gain(s.cfg.pump.epsilon)}};
  s.write_json("steady_state.json", result);
  out << result.dump(2) << '\n';
}

void cmd_integrate(Session& s, std::ostream& out) {
  const double gamma = s.cfg.cavity.gamma_total();
  const auto traj = nopo::integrate_dynamics(s.cfg.cavity, s.cfg.pump, s.cfg.seed, s.cfg.integrate.t_end_decays / gamma,
                                             s.cfg.integrate.dt_decays / gamma);
  csv::Writer w(s.file("trajectory.csv"), {"t", "alpha_s_re", "alpha_s_im", "alpha_i_re", "alpha_i_im"});
  const std::size_t n = traj.times.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (k % s.cfg.integrate.decimation != 0 && k + 1 != n) continue;
    w.row({traj.times[k], traj.alpha_s[k].real(), traj.alpha_s[k].imag(), traj.alpha_i[k].real(), traj.alpha_i[k].imag()});
  }
  w.close();
  const json result = {{"samples", n},
                       {"t_end", n ? traj.times.back() : 0.0},
                       {"above_threshold", traj.above_threshold},
                       {"diverged", traj.diverged}};
  out << result.dump(2) << '\n';
}

void cmd_spectra(Session& s, std::ostream&) {
  csv::Writer w(s.file("spectra.csv"), {"omega_norm", "var_minus", "var_plus", "var_minus_db", "var_plus_db"});
  for (const auto& r : pipeline::spectra_grid(s.cfg)) {
    w.row({r.omega_norm, r.var_minus, r.var_plus, db(r.var_minus), db(r.var_plus)});
  }
  w.close();
}

void cmd_sweep(Session& s, std::ostream&) {
  write_sweep(s, "sweep.csv", pipeline::sweep(s.cfg, spectra::sigma_theta_common(s.cfg.phase_noise)));
}

void cmd_duan_simon(Session& s, std::ostream& out) {
  const auto ideal = pipeline::branch_variances(s.cfg, s.cfg.pump.epsilon, s.cfg.sweep.omega_norm, spectra::Variant::corrected);
  const auto noisy = pipeline::with_phase_noise(ideal, spectra::sigma_theta_common(s.cfg.phase_noise), s.cfg.sweep.mode);
  const double orth = spectra::orthogonal_variance(ideal.plus, ideal.minus, spectra::Sign::plus);
  const auto ds = spectra::duan_simon(ideal.minus, orth);
  const auto ds_noisy =
      spectra::duan_simon(noisy.minus, spectra::orthogonal_variance(noisy.plus, noisy.minus, spectra::Sign::plus));
  const json result = {{"sum", ds.sum},
                       {"entangled", ds.entangled},
                       {"var_minus", ideal.minus},
                       {"var_plus_orth", orth},
                       {"sum_with_phase_noise", ds_noisy.sum},
                       {"entangled_with_phase_noise", ds_noisy.entangled}};
  s.write_json("duan_simon.json", result);
  out << result.dump(2) << '\n';
}

void cmd_lock_sim(Session& s, std::ostream& out) {
  const auto run = pipeline::run_lock(s.cfg, s.cfg.pump.epsilon, s.cfg.lock.duration);
  csv::Writer w(s.file("lock_trace.csv"), {"t", "theta_s", "theta_i", "theta_common"});
  const double dt = run.residual_theta_s.dt();
  for (std::size_t k = 0; k < run.residual_theta_s.size(); k += s.cfg.lock.decimation) {
    w.row({static_cast<double>(k) * dt, run.residual_theta_s.samples[k], run.residual_theta_i.samples[k],
           run.common_mode_theta.samples[k]});
  }
  w.close();
  json result = summary_json(pipeline::summarize(run));
  result["saturation_times"] = run.saturation_events;
  s.write_json("lock_summary.json", result);
  out << result.dump(2) << '\n';
}

void cmd_synth_epr(Session& s, std::ostream& out) {
  const auto& sy = s.cfg.synth;
  const auto records =
      pipeline::synth_epr(s.cfg, s.cfg.pump.epsilon, sy.duration, sy.rate, sy.residual_sigma, sy.residual_corner);
  const double dt = records.q_s.dt();
  csv::Writer w(s.file("epr_records.csv"), {"t", "q_s", "q_i"});
  for (std::size_t k = 0; k < records.q_s.size(); ++k) {
    w.row({static_cast<double>(k) * dt, records.q_s.samples[k], records.q_i.samples[k]});
  }
  w.close();
  csv::Writer ref(s.file("shot_reference.csv"), {"t", "q_shot"});
  for (std::size_t k = 0; k < records.shot_reference.size(); ++k) {
    ref.row({static_cast<double>(k) * dt, records.shot_reference.samples[k]});
  }
  ref.close();
  const auto point = pipeline::measure_point(s.cfg, s.cfg.pump.epsilon, records);
  const json result = {{"epsilon", point.epsilon}, {"band_var_minus", point.var_minus}, {"band_var_plus", point.var_plus}};
  out << result.dump(2) << '\n';
}

TimeSeries read_trace(const std::string& path) {
  if (path.empty()) throw InvalidInput("--input is required");
  const auto table = csv::read(path);
  if (table.header.size() < 2 || table.rows.size() < 2) throw InvalidInput(path + ": need columns t,value and >= 2 rows");
  const double t0 = table.rows.front()[0];
  const double t1 = table.rows.back()[0];
  if (!(t1 > t0)) throw InvalidInput(path + ": time column must increase");
  TimeSeries series{static_cast<double>(table.rows.size() - 1) / (t1 - t0), {}, table.header[1]};
  for (const auto& row : table.rows) series.samples.push_back(row[1]);
  return series;
}

void cmd_calibrate(Session& s, std::ostream& out, const std::string& input) {
  if (input.empty()) throw InvalidInput("--input is required");
  const auto table = csv::read(input);
  std::vector<double> phases, signal;
  column(table, "phase", phases);
  column(table, "signal", signal);
  if (phases.size() < 2) throw InvalidInput(input + ": fringe needs at least two samples");
  const auto [lo, hi] = std::minmax_element(phases.begin(), phases.end());
  const TimeSeries scan{static_cast<double>(signal.size()), signal, "signal"};
  const auto cal = lock::calibrate_error_signal(scan, *hi - *lo, s.cfg.estimation.calibration, phases);
  const json result = {{"s_pp", cal.s_pp}, {"beta", cal.beta}};
  s.write_json("calibration.json", result);
  out << result.dump(2) << '\n';
}

void cmd_psd(Session& s, std::ostream& out, const std::string& input) {
  const auto series = read_trace(input);
  const auto& e = s.cfg.estimation;
  const auto psd = estimation::welch_psd(series, e.segment_length, e.overlap, e.window);
  write_psd(s, "psd.csv", psd);
  const json result = {{"sample_rate", series.sample_rate},
                       {"segment_length", psd.segment_length},
                       {"segments", psd.segments},
                       {"resolution", psd.resolution()},
                       {"window", std::string(estimation::to_string(psd.window))}};
  out << result.dump(2) << '\n';
}

void cmd_fit(Session& s, std::ostream& out, const std::string& input) {
  if (input.empty()) throw InvalidInput("--input is required");
  const auto table = csv::read(input);
  std::vector<double> eps, vm, vp, unc;
  column(table, "epsilon", eps);
  column(table, "var_minus", vm);
  column(table, "var_plus", vp);
  const bool has_uncert = table.column("uncert") >= 0;
  if (has_uncert) column(table, "uncert", unc);
  estimation::SqueezingDataset data;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const double u = has_uncert && std::isfinite(unc[k]) ? unc[k] : 0.0;
    data.points.push_back({eps[k], vm[k], vp[k], u});
  }
  estimation::FitOptions options;
  options.mode = s.cfg.estimation.fit_mode;
  options.bootstrap_resamples = s.cfg.estimation.bootstrap_resamples;
  options.bootstrap_seed = config::derive_seed(s.cfg.rng_seed, 3000);
  const auto fit = estimation::fit_phase_noise_model(data, pipeline::analysis_omega_norm(s.cfg), options);
  const json result = fit_json(fit);
  s.write_json("fit.json", result);
  out << result.dump(2) << '\n';
}

void reproduce_fig3(Session& s, std::ostream& out) {
  const auto entries = pipeline::reproduce_fig3(s.cfg);
  json summary = json::array();
  for (const auto& e : entries) {
    char name[64];
    std::snprintf(name, sizeof name, "fig3_psd_eps%.2f.csv", e.epsilon);
    write_psd(s, name, e.psd);
    json item = summary_json(e.summary);
    item["epsilon"] = e.epsilon;
    item["beta_s"] = e.calibration_s.beta;
    item["beta_i"] = e.calibration_i.beta;
    item["sigma_theta_from_error_signals"] = e.sigma_theta_estimated;
    summary.push_back(item);
  }
  s.write_json("fig3_summary.json", summary);
  out << summary.dump(2) << '\n';
}

void reproduce_fig4(Session& s, std::ostream& out) {
  const auto result = pipeline::reproduce_fig4(s.cfg);
  {
    csv::Writer w(s.file("fig4_measured.csv"), {"epsilon", "var_minus", "var_plus", "uncert"});
    for (const auto& p : result.measured.points) w.row({p.epsilon, p.var_minus, p.var_plus, p.uncertainty});
    w.close();
  }
  write_sweep(s, "fig4_sweep.csv", result.model_sweep);
  json summary = {{"fit", fit_json(result.fit)},
                  {"omega_norm", result.omega_norm},
                  {"injected_eta", result.injected_eta},
                  {"injected_sigma_theta", result.injected_sigma},
                  {"sweep_min_epsilon", result.sweep_min_epsilon},
                  {"sweep_min_db", result.sweep_min_db}};
  s.write_json("fig4_fit.json", summary);
  out << summary.dump(2) << '\n';
}

void reproduce_fig5(Session& s, std::ostream& out) {
  const auto result = pipeline::reproduce_fig5(s.cfg);
  csv::Writer w(s.file("fig5_spectra.csv"), {"f", "omega_norm", "var_minus_db", "var_plus_db", "var_minus_pn_db",
                                             "var_plus_pn_db", "var_plus_paper_literal_db"});
  for (const auto& r : result.rows) {
    w.row({r.frequency, r.omega_norm, db(r.ideal.minus), db(r.ideal.plus), db(r.degraded.minus), db(r.degraded.plus),
           db(r.var_plus_paper_literal)});
  }
  w.close();
  const json summary = {{"duan_simon_sum", result.duan_simon.sum},
                        {"entangled", result.duan_simon.entangled},
                        {"duan_simon_sum_with_phase_noise", result.duan_simon_degraded.sum},
                        {"entangled_with_phase_noise", result.duan_simon_degraded.entangled}};
  s.write_json("fig5_duan_simon.json", summary);
  out << summary.dump(2) << '\n';
}

void report(std::ostream& err, const char* kind, const std::string& message) {
  err << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Phase-control and squeezing analysis toolkit for a two-color NOPO", "eprlock"};
  app.set_version_flag("--version", EPRLOCK_VERSION);
  app.require_subcommand(1);
  Options options;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", options.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", options.overrides, "Override a setting, e.g. --set pump.epsilon=0.7");
    sub->add_option("--out", options.out_dir, "Output directory");
    sub->add_option("--seed", options.seed, "RNG seed");
  };

  const std::map<std::string, std::string> descriptions = {
      {"steady-state", "Coherent locking field amplitudes and phases"},
      {"integrate", "Integrate the intracavity equations of motion"},
      {"spectra", "Two-mode squeezing spectra over a frequency grid"},
      {"sweep", "Phase-noise-degraded variances versus pump amplitude"},
      {"duan-simon", "Inseparability sum at the operating point"},
      {"lock-sim", "Closed-loop simulation of both phase locks"},
      {"synth-epr", "Synthetic homodyne photocurrents"},
      {"calibrate", "Error-signal calibration from a fringe scan (CSV phase,signal)"},
      {"psd", "Welch PSD of a trace (CSV t,value)"},
      {"fit", "Fit eta and sigma_theta to a squeezing dataset"},
      {"reproduce", "Canned analysis scenarios: fig3, fig4, fig5"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, text] : descriptions) {
    subs[name] = app.add_subcommand(name, text);
    common(subs[name]);
  }
  for (const char* name : {"calibrate", "psd", "fit"}) {
    subs[name]->add_option("--input", options.input, "Input CSV")->required()->check(CLI::ExistingFile);
  }
  subs["reproduce"]
      ->add_option("scenario", options.scenario, "fig3, fig4 or fig5")
      ->required()
      ->check(CLI::IsMember({"fig3", "fig4", "fig5"}));

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::CallForVersion&) {
    out << EPRLOCK_VERSION << '\n';
    return ok;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    report(err, "usage", e.what());
    return config_error;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    Session session(name == "reproduce" ? "reproduce " + options.scenario : name, options);
    static const std::map<std::string, std::function<void(Session&, std::ostream&)>> plain = {
        {"steady-state", cmd_steady_state}, {"integrate", cmd_integrate}, {"spectra", cmd_spectra},
        {"sweep", cmd_sweep},               {"duan-simon", cmd_duan_simon}, {"lock-sim", cmd_lock_sim},
        {"synth-epr", cmd_synth_epr}};
    if (auto it = plain.find(name); it != plain.end()) {
      it->second(session, out);
    } else if (name == "calibrate") {
      cmd_calibrate(session, out, options.input);
    } else if (name == "psd") {
      cmd_psd(session, out, options.input);
    } else if (name == "fit") {
      cmd_fit(session, out, options.input);
    } else if (options.scenario == "fig3") {
      reproduce_fig3(session, out);
    } else if (options.scenario == "fig4") {
      reproduce_fig4(session, out);
    } else {
      reproduce_fig5(session, out);
    }
    session.finish();
  } catch (const DomainError& e) {
    report(err, "domain", e.what());
    return domain_error;
  } catch (const NumericalError& e) {
    report(err, "numerical", e.what());
    return numerical_error;
  } catch (const InvalidInput& e) {
    report(err, "config", e.what());
    return config_error;
  } catch (const json::exception& e) {
    report(err, "config", e.what());
    return config_error;
  } catch (const fs::filesystem_error& e) {
    report(err, "config", e.what());
    return config_error;
  }
  return ok;
}

}  // namespace eprlock::cli
