#include "eprlock/config.hpp"

#include <charconv>
#include <concepts>
#include <cstdio>

#include "eprlock/errors.hpp"

namespace eprlock::config {

using nlohmann::json;

namespace {

// Field lists. One function per struct drives both directions.

template <typename F>
void fields(FrequencyPlan& v, F&& f) {
  f("lambda_s", v.lambda_s);
  f("lambda_i", v.lambda_i);
  f("lambda_p", v.lambda_p);
  f("omega_cl_offset", v.omega_cl_offset);
}

template <typename F>
void fields(CavityParams& v, F&& f) {
  f("gamma_in", v.gamma_in);
  f("gamma_out", v.gamma_out);
  f("mu", v.mu);
  f("delta", v.delta);
}

template <typename F>
void fields(PumpParams& v, F&& f) {
  f("epsilon", v.epsilon);
  f("phi_p", v.phi_p);
}

template <typename F>
void fields(SeedParams& v, F&& f) {
  f("alpha_cl", v.alpha_cl);
  f("seed_phase", v.seed_phase);
}

template <typename F>
void fields(DetectionParams& v, F&& f) {
  f("eta_s", v.eta_s);
  f("eta_i", v.eta_i);
  f("theta_ref_s", v.theta_ref_s);
  f("theta_ref_i", v.theta_ref_i);
  f("g_weight", v.g_weight);
}

template <typename F>
void fields(PhaseNoiseSpec& v, F&& f) {
  f("sigma_s", v.sigma_s);
  f("sigma_i", v.sigma_i);
  f("cov_si", v.cov_si);
}

template <typename F>
void fields(IntegrateBlock& v, F&& f) {
  f("t_end_decays", v.t_end_decays);
  f("dt_decays", v.dt_decays);
  f("decimation", v.decimation);
}

template <typename F>
void fields(SpectraBlock& v, F&& f) {
  f("omega_min", v.omega_min);
  f("omega_max", v.omega_max);
  f("points", v.points);
  f("variant", v.variant);
}

template <typename F>
void fields(SweepBlock& v, F&& f) {
  f("eps_min", v.eps_min);
  f("eps_max", v.eps_max);
  f("points", v.points);
  f("omega_norm", v.omega_norm);
  f("mode", v.mode);
}

template <typename F>
void fields(lock::Sinusoid& v, F&& f) {
  f("frequency", v.frequency);
  f("amplitude", v.amplitude);
  f("phase", v.phase);
}

template <typename F>
void fields(lock::DisturbanceSpec& v, F&& f) {
  f("random_walk_diffusion", v.random_walk_diffusion);
  f("white_noise_density", v.white_noise_density);
  f("sinusoids", v.sinusoids);
  f("offset", v.offset);
  f("ramp_rate", v.ramp_rate);
}

template <typename F>
void fields(lock::Disturbances& v, F&& f) {
  f("signal", v.signal);
  f("idler", v.idler);
  f("pump", v.pump);
}

template <typename F>
void fields(lock::LoopConfig& v, F&& f) {
  f("kp", v.kp);
  f("ki", v.ki);
  f("lpf_cutoff", v.lpf_cutoff);
  f("actuator_range", v.actuator_range);
  f("actuator_resonance", v.actuator_resonance);
  f("actuator_q", v.actuator_q);
  f("lo_amplitude", v.lo_amplitude);
}

template <typename F>
void fields(LockBlock& v, F&& f) {
  f("duration", v.duration);
  f("rate", v.rate);
  f("decimation", v.decimation);
  f("loop_s", v.loop_s);
  f("loop_i", v.loop_i);
  f("disturbances", v.disturbances);
}

template <typename F>
void fields(SynthBlock& v, F&& f) {
  f("duration", v.duration);
  f("rate", v.rate);
  f("dark_noise_clearance_db", v.dark_noise_clearance_db);
  f("residual_sigma", v.residual_sigma);
  f("residual_corner", v.residual_corner);
}

template <typename F>
void fields(EstimationBlock& v, F&& f) {
  f("segment_length", v.segment_length);
  f("overlap", v.overlap);
  f("window", v.window);
  f("band_lo", v.band_lo);
  f("band_hi", v.band_hi);
  f("fit_mode", v.fit_mode);
  f("bootstrap_resamples", v.bootstrap_resamples);
  f("calibration", v.calibration);
}

template <typename F>
void fields(Fig3Block& v, F&& f) {
  f("epsilons", v.epsilons);
  f("duration", v.duration);
}

template <typename F>
void fields(Fig4Block& v, F&& f) {
  f("epsilons", v.epsilons);
  f("sigma_theta", v.sigma_theta);
  f("corner", v.corner);
  f("samples", v.samples);
  f("rate", v.rate);
}

template <typename F>
void fields(Fig5Block& v, F&& f) {
  f("f_lo", v.f_lo);
  f("f_hi", v.f_hi);
  f("points", v.points);
}

template <typename F>
void fields(ReproduceBlock& v, F&& f) {
  f("fig3", v.fig3);
  f("fig4", v.fig4);
  f("fig5", v.fig5);
}

template <typename F>
void fields(RunConfig& v, F&& f) {
  f("frequency_plan", v.frequency_plan);
  f("cavity", v.cavity);
  f("pump", v.pump);
  f("seed", v.seed);
  f("detection", v.detection);
  f("phase_noise", v.phase_noise);
  f("rng_seed", v.rng_seed);
  f("output_dir", v.output_dir);
  f("integrate", v.integrate);
  f("spectra", v.spectra);
  f("sweep", v.sweep);
  f("lock", v.lock);
  f("synth", v.synth);
  f("estimation", v.estimation);
  f("reproduce", v.reproduce);
}

struct Probe {
  template <typename T>
  void operator()(const char*, T&) const {}
};

template <typename T>
concept Record = requires(T& v) { fields(v, Probe{}); };

// Enum names.
template <typename E>
struct EnumNames;

template <>
struct EnumNames<spectra::Variant> {
  static constexpr std::pair<spectra::Variant, const char*> table[] = {
      {spectra::Variant::corrected, "corrected"}, {spectra::Variant::paper_literal, "paper_literal"}};
};

template <>
struct EnumNames<spectra::PhaseNoiseMode> {
  static constexpr std::pair<spectra::PhaseNoiseMode, const char*> table[] = {
      {spectra::PhaseNoiseMode::small_angle, "small_angle"},
      {spectra::PhaseNoiseMode::exact_gaussian, "exact_gaussian"}};
};

template <>
struct EnumNames<estimation::Window> {
  static constexpr std::pair<estimation::Window, const char*> table[] = {
      {estimation::Window::hann, "hann"}, {estimation::Window::rectangular, "rectangular"}};
};

template <>
struct EnumNames<lock::CalibrationMethod> {
  static constexpr std::pair<lock::CalibrationMethod, const char*> table[] = {
      {lock::CalibrationMethod::peak_to_peak, "peak_to_peak"}, {lock::CalibrationMethod::sine_fit, "sine_fit"}};
};

template <typename E>
concept Named = requires { EnumNames<E>::table; };

[[noreturn]] void type_error(const std::string& path, const char* expected) {
  throw InvalidInput("config: " + path + " must be " + expected);
}

// Encoding.

json encode(double v) { return v; }
json encode(int v) { return v; }
template <std::unsigned_integral U>
json encode(U v) { return v; }
json encode(const std::string& v) { return v; }
json encode(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json encode(const std::vector<double>& v) { return v; }

template <Named E>
json encode(E v) {
  for (auto [value, name] : EnumNames<E>::table) {
    if (value == v) return name;
  }
  return nullptr;
}

template <Record T>
json encode(const T& v);

template <Record T>
json encode(const std::vector<T>& v) {
  json out = json::array();
  for (const auto& item : v) out.push_back(encode(item));
  return out;
}

template <Record T>
json encode(const T& v) {
  json out = json::object();
  fields(const_cast<T&>(v), [&](const char* key, const auto& member) { out[key] = encode(member); });
  return out;
}

// Decoding.

void decode(const json& j, double& v, const std::string& path) {
  if (!j.is_number()) type_error(path, "a number");
  v = j.get<double>();
}

void decode(const json& j, int& v, const std::string& path) {
  if (!j.is_number_integer()) type_error(path, "an integer");
  v = j.get<int>();
}

template <std::unsigned_integral U>
void decode(const json& j, U& v, const std::string& path) {
  if (!j.is_number_unsigned()) type_error(path, "a non-negative integer");
  v = j.get<U>();
}

void decode(const json& j, std::string& v, const std::string& path) {
  if (!j.is_string()) type_error(path, "a string");
  v = j.get<std::string>();
}

void decode(const json& j, std::optional<double>& v, const std::string& path) {
  if (j.is_null()) {
    v.reset();
    return;
  }
  if (!j.is_number()) type_error(path, "a number or null");
  v = j.get<double>();
}

void decode(const json& j, std::vector<double>& v, const std::string& path) {
  if (!j.is_array()) type_error(path, "an array of numbers");
  v.clear();
  for (const auto& item : j) {
    if (!item.is_number()) type_error(path, "an array of numbers");
    v.push_back(item.get<double>());
  }
}

template <Named E>
void decode(const json& j, E& v, const std::string& path) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    for (auto [value, known] : EnumNames<E>::table) {
      if (name == known) {
        v = value;
        return;
      }
    }
  }
  std::string options;
  for (auto [value, known] : EnumNames<E>::table) options += std::string(options.empty() ? "" : ", ") + known;
  type_error(path, ("one of " + options).c_str());
}

template <Record T>
void decode(const json& j, T& v, const std::string& path);

template <Record T>
void decode(const json& j, std::vector<T>& v, const std::string& path) {
  if (!j.is_array()) type_error(path, "an array");
  v.clear();
  for (std::size_t k = 0; k < j.size(); ++k) {
    T item{};
    decode(j[k], item, path + "[" + std::to_string(k) + "]");
    v.push_back(item);
  }
}

template <Record T>
void decode(const json& j, T& v, const std::string& path) {
  if (!j.is_object()) type_error(path.empty() ? "document" : path, "an object");
  fields(v, [&](const char* key, auto& member) {
    const std::string child = path.empty() ? key : path + "." + key;
    if (!j.contains(key)) throw InvalidInput("config: missing " + child);
    decode(j.at(key), member, child);
  });
}

// Keys that hold arrays of records are validated element-wise against the
// default record.
json record_template(const std::string& path) {
  if (path.ends_with("sinusoids")) return encode(lock::Sinusoid{});
  return nullptr;
}

}  // namespace

RunConfig defaults() {
  RunConfig c;
  // Thermal drift dominates; the pump phase walks more slowly and reaches the
  // idler lock only. A weak acoustic line sits inside the loop bandwidth.
  c.lock.disturbances.signal.random_walk_diffusion = 2.0;
  c.lock.disturbances.signal.white_noise_density = 1e-11;
  c.lock.disturbances.signal.sinusoids = {{120.0, 0.02, 0.0}};
  c.lock.disturbances.idler.random_walk_diffusion = 1.2;
  c.lock.disturbances.idler.white_noise_density = 1e-11;
  c.lock.disturbances.pump.random_walk_diffusion = 0.6;
  c.lock.loop_s.beat_sign = lock::BeatSign::positive;
  c.lock.loop_i.beat_sign = lock::BeatSign::negative;
  return c;
}

json to_json(const RunConfig& config) { return encode(config); }

RunConfig from_json(const json& document) {
  RunConfig c = defaults();
  decode(document, c, "");
  c.lock.loop_s.theta_ref = c.detection.theta_ref_s;
  c.lock.loop_i.theta_ref = c.detection.theta_ref_i;
  c.lock.loop_s.beat_sign = lock::BeatSign::positive;
  c.lock.loop_i.beat_sign = lock::BeatSign::negative;
  return c;
}

void merge_strict(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw InvalidInput("config: " + (where.empty() ? std::string("document") : where) + " must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw InvalidInput("config: unknown key " + path);
    json& target = base[key];
    if (target.is_object()) {
      merge_strict(target, value, path);
    } else if (const json proto = record_template(path); !proto.is_null()) {
      if (!value.is_array()) type_error(path, "an array");
      json merged = json::array();
      for (std::size_t k = 0; k < value.size(); ++k) {
        json item = proto;
        merge_strict(item, value[k], path + "[" + std::to_string(k) + "]");
        merged.push_back(item);
      }
      target = merged;
    } else {
      target = value;
    }
  }
}

void apply_override(json& document, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidInput("override must look like key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  // Build the nested patch {"a": {"b": value}} and merge it strictly.
  json patch = value;
  std::size_t end = path.size();
  while (true) {
    const auto dot = path.rfind('.', end - 1);
    const std::size_t begin = dot == std::string::npos ? 0 : dot + 1;
    const std::string key = path.substr(begin, end - begin);
    if (key.empty()) throw InvalidInput("override has an empty path segment: " + path);
    patch = json{{key, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  merge_strict(document, patch);
}

void validate(const RunConfig& c) {
  std::vector<std::string> problems;
  auto collect = [&](const std::vector<std::string>& found) { problems.insert(problems.end(), found.begin(), found.end()); };
  collect(violations(c.frequency_plan));
  collect(violations(c.cavity));
  collect(violations(c.pump));
  collect(violations(c.seed));
  collect(violations(c.detection));
  collect(violations(c.phase_noise));
  if (problems.empty()) {
    const auto plan = validate_frequency_plan(c.frequency_plan);
    if (!plan.ok) problems.push_back(plan.diagnostic);
  }
  for (const auto* loop : {&c.lock.loop_s, &c.lock.loop_i}) collect(lock::violations(*loop, c.frequency_plan.omega_cl_offset));
  for (const auto* d : {&c.lock.disturbances.signal, &c.lock.disturbances.idler, &c.lock.disturbances.pump}) {
    collect(lock::violations(*d));
  }
  if (c.spectra.points < 1 || !(c.spectra.omega_min >= 0) || !(c.spectra.omega_max >= c.spectra.omega_min)) {
    problems.emplace_back("spectra grid needs points >= 1 and 0 <= omega_min <= omega_max");
  }
  if (c.sweep.points < 2 || !(c.sweep.eps_min >= 0) || !(c.sweep.eps_max > c.sweep.eps_min)) {
    problems.emplace_back("sweep grid needs points >= 2 and 0 <= eps_min < eps_max");
  }
  if (c.integrate.decimation == 0 || c.lock.decimation == 0) problems.emplace_back("decimation must be >= 1");
  if (!(c.estimation.band_lo >= 0) || !(c.estimation.band_hi > c.estimation.band_lo)) {
    problems.emplace_back("estimation band needs 0 <= band_lo < band_hi");
  }
  if (!(c.estimation.overlap >= 0 && c.estimation.overlap < 1)) problems.emplace_back("estimation.overlap must lie in [0, 1)");
  if (c.estimation.bootstrap_resamples < 0) problems.emplace_back("estimation.bootstrap_resamples must be >= 0");
  if (!(c.synth.residual_sigma >= 0) || !(c.synth.residual_corner > 0)) {
    problems.emplace_back("synth residual needs sigma >= 0 and corner > 0");
  }
  if (!problems.empty()) {
    std::string joined;
    for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
    throw InvalidInput(joined);
  }
}

std::string config_hash(const json& document) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : document.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stream) {
  std::uint64_t z = run_seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace eprlock::config
