#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "app/csv.hpp"
#include "eprlock/cli.hpp"
#include "eprlock/estimation.hpp"
#include "eprlock/spectra.hpp"
#include "json.hpp"

using namespace eprlock;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "eprlock");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("eprlock_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& path) { return json::parse(slurp(path)); }

std::string error_kind(const Outcome& o) {
  const auto line = o.err.substr(o.err.rfind("{\"error\""));
  return json::parse(line)["error"]["kind"];
}

}  // namespace

TEST_CASE("spectra CSV matches the library to full precision") {
  const auto dir = scratch("spectra");
  const auto o = invoke({"spectra", "--out", dir.string(), "--set", "spectra.points=11", "--set", "pump.epsilon=0.6"});
  REQUIRE(o.code == 0);
  const auto table = csv::read(dir / "spectra.csv");
  REQUIRE(table.rows.size() == 11);
  REQUIRE(table.header[0] == "omega_norm");
  for (const auto& row : table.rows) {
    REQUIRE(row[1] == spectra::two_mode_variance(0.6, 0.89, row[0], spectra::Sign::minus));
    REQUIRE(row[2] == spectra::two_mode_variance(0.6, 0.89, row[0], spectra::Sign::plus));
  }
}

TEST_CASE("usage and configuration errors") {
  SECTION("unknown subcommand") {
    const auto o = invoke({"frobnicate"});
    REQUIRE(o.code == cli::config_error);
    REQUIRE(error_kind(o) == "usage");
  }
  SECTION("no subcommand") { REQUIRE(invoke({}).code != 0); }
  SECTION("unknown configuration key") {
    const auto dir = scratch("unknown_key");
    const auto o = invoke({"spectra", "--out", dir.string(), "--set", "pump.epsilom=0.5"});
    REQUIRE(o.code == cli::config_error);
    REQUIRE(error_kind(o) == "config");
    REQUIRE(o.err.find("pump.epsilom") != std::string::npos);
  }
  SECTION("unknown key in a config file") {
    const auto dir = scratch("unknown_file_key");
    std::ofstream(dir / "cfg.json") << R"({"cavity": {"gamma_in": 1e5, "colour": 3}})";
    const auto o = invoke({"spectra", "--out", dir.string(), "--config", (dir / "cfg.json").string()});
    REQUIRE(o.code == cli::config_error);
  }
  SECTION("wrong value type") {
    const auto o = invoke({"spectra", "--out", scratch("bad_type").string(), "--set", "spectra.variant=sideways"});
    REQUIRE(o.code == cli::config_error);
  }
  SECTION("invariant violation") {
    const auto o = invoke({"spectra", "--out", scratch("bad_eta").string(), "--set", "detection.eta_s=1.5"});
    REQUIRE(o.code == cli::config_error);
  }
  SECTION("pump at or above threshold is a domain error") {
    const auto o = invoke({"spectra", "--out", scratch("threshold").string(), "--set", "pump.epsilon=1.0"});
    REQUIRE(o.code == cli::domain_error);
    REQUIRE(error_kind(o) == "domain");
  }
  SECTION("missing input file") {
    REQUIRE(invoke({"psd", "--input", "/nonexistent/trace.csv"}).code == cli::config_error);
  }
  SECTION("unknown scenario") { REQUIRE(invoke({"reproduce", "fig9"}).code == cli::config_error); }
}

TEST_CASE("help and version") {
  const auto help = invoke({"--help"});
  REQUIRE(help.code == 0);
  REQUIRE(help.out.find("lock-sim") != std::string::npos);
  REQUIRE(invoke({"--version"}).code == 0);
}

TEST_CASE("manifest lists every output and the resolved config") {
  const auto dir = scratch("manifest");
  REQUIRE(invoke({"lock-sim", "--out", dir.string(), "--seed", "7", "--set", "lock.duration=0.02"}).code == 0);
  const auto manifest = read_json(dir / "manifest.json");
  REQUIRE(manifest["subcommand"] == "lock-sim");
  REQUIRE(manifest["seed"] == 7);
  REQUIRE(manifest["config"]["lock"]["duration"] == 0.02);
  REQUIRE(manifest["config_hash"].get<std::string>().size() == 16);
  for (const auto& name : manifest["outputs"]) REQUIRE(fs::exists(dir / name.get<std::string>()));
  std::set<std::string> listed;
  for (const auto& name : manifest["outputs"]) listed.insert(name);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().filename() != "manifest.json") REQUIRE(listed.count(entry.path().filename().string()) == 1);
  }
  const auto summary = read_json(dir / "lock_summary.json");
  REQUIRE(summary["in_lock_fraction"].get<double>() == 1.0);
}

TEST_CASE("repeated runs are byte-identical") {
  for (const char* sub : {"synth-epr", "lock-sim", "integrate"}) {
    const auto a = scratch(std::string("repeat_a_") + sub), b = scratch(std::string("repeat_b_") + sub);
    const std::vector<std::string> extra = {"--set", "synth.duration=0.01", "--set", "lock.duration=0.01", "--seed", "42"};
    auto args_a = std::vector<std::string>{sub, "--out", a.string()};
    auto args_b = std::vector<std::string>{sub, "--out", b.string()};
    args_a.insert(args_a.end(), extra.begin(), extra.end());
    args_b.insert(args_b.end(), extra.begin(), extra.end());
    REQUIRE(invoke(args_a).code == 0);
    REQUIRE(invoke(args_b).code == 0);
    const auto manifest_a = read_json(a / "manifest.json");
    const auto manifest_b = read_json(b / "manifest.json");
    REQUIRE(manifest_a["config_hash"] != manifest_b["config_hash"]);  // output_dir differs
    for (const auto& name : manifest_a["outputs"]) {
      REQUIRE(slurp(a / name.get<std::string>()) == slurp(b / name.get<std::string>()));
    }
  }
}

TEST_CASE("steady-state and duan-simon summaries") {
  const auto dir = scratch("steady");
  REQUIRE(invoke({"steady-state", "--out", dir.string()}).code == 0);
  const auto state = read_json(dir / "steady_state.json");
  REQUIRE(state.contains("a_cls"));
  REQUIRE(state["a_cli"].size() == 2);
  REQUIRE(invoke({"duan-simon", "--out", dir.string(), "--set", "pump.epsilon=0.8"}).code == 0);
  const auto ds = read_json(dir / "duan_simon.json");
  REQUIRE(ds["entangled"] == true);
  REQUIRE(ds["sum"].get<double>() < 2.0);
}

TEST_CASE("calibrate round trip") {
  const auto dir = scratch("calibrate");
  {
    csv::Writer w(dir / "fringe.csv", {"phase", "signal"});
    for (int k = 0; k <= 2000; ++k) {
      const double phi = 2 * M_PI * k / 2000.0;
      w.row({phi, 0.25 * std::sin(phi + 1.0)});
    }
    w.close();
  }
  REQUIRE(invoke({"calibrate", "--out", dir.string(), "--input", (dir / "fringe.csv").string()}).code == 0);
  const auto cal = read_json(dir / "calibration.json");
  REQUIRE_THAT(cal["beta"].get<double>(), Catch::Matchers::WithinRel(4.0, 1e-5));
  REQUIRE(invoke({"calibrate", "--out", dir.string(), "--input", (dir / "fringe.csv").string(), "--set",
                  "estimation.calibration=sine_fit"})
              .code == 0);
  REQUIRE_THAT(read_json(dir / "calibration.json")["beta"].get<double>(), Catch::Matchers::WithinRel(4.0, 1e-9));
}

TEST_CASE("psd round trip") {
  const auto dir = scratch("psd");
  const double fs = 1e4, amplitude = 0.3;
  {
    csv::Writer w(dir / "trace.csv", {"t", "volts"});
    for (int k = 0; k < 40000; ++k) w.row({k / fs, amplitude * std::sin(2 * M_PI * 1000.0 * k / fs)});
    w.close();
  }
  const auto o = invoke({"psd", "--out", dir.string(), "--input", (dir / "trace.csv").string(), "--set",
                         "estimation.segment_length=2000"});
  REQUIRE(o.code == 0);
  const auto table = csv::read(dir / "psd.csv");
  REQUIRE(table.rows.size() == 1001);
  double power = 0;
  const double df = table.rows[1][0] - table.rows[0][0];
  REQUIRE_THAT(df, Catch::Matchers::WithinRel(5.0, 1e-9));
  for (const auto& row : table.rows) power += row[1] * df;
  REQUIRE_THAT(power, Catch::Matchers::WithinRel(amplitude * amplitude / 2, 0.02));
  REQUIRE(json::parse(o.out)["segments"] == 39);
}

TEST_CASE("fit round trip") {
  const auto dir = scratch("fit");
  {
    csv::Writer w(dir / "data.csv", {"epsilon", "var_minus", "var_plus"});
    const double omega = 10e3 / 15e6;
    for (double eps : {0.3, 0.45, 0.6, 0.7, 0.8, 0.85, 0.9}) {
      w.row({eps, estimation::degraded_variance(eps, 0.85, 0.03, omega, spectra::Sign::minus),
             estimation::degraded_variance(eps, 0.85, 0.03, omega, spectra::Sign::plus)});
    }
    w.close();
  }
  REQUIRE(invoke({"fit", "--out", dir.string(), "--input", (dir / "data.csv").string(), "--set",
                  "estimation.bootstrap_resamples=20"})
              .code == 0);
  const auto fit = read_json(dir / "fit.json");
  REQUIRE_THAT(fit["eta_hat"].get<double>(), Catch::Matchers::WithinAbs(0.85, 1e-4));
  REQUIRE_THAT(fit["sigma_hat"].get<double>(), Catch::Matchers::WithinAbs(0.03, 1e-4));
  REQUIRE(fit["converged"] == true);

  std::ofstream(dir / "bad.csv") << "epsilon,var_minus,var_plus\n0.5,abc,2\n";
  REQUIRE(invoke({"fit", "--out", dir.string(), "--input", (dir / "bad.csv").string()}).code == cli::config_error);
}

TEST_CASE("reproduce fig4 recovers the injected operating point") {
  const auto dir = scratch("fig4");
  REQUIRE(invoke({"reproduce", "fig4", "--out", dir.string(), "--set", "estimation.bootstrap_resamples=20"}).code == 0);
  const auto summary = read_json(dir / "fig4_fit.json");
  REQUIRE_THAT(summary["sweep_min_epsilon"].get<double>(), Catch::Matchers::WithinAbs(0.8, 0.1));
  REQUIRE_THAT(summary["sweep_min_db"].get<double>(), Catch::Matchers::WithinAbs(-9.0, 1.0));
  REQUIRE_THAT(summary["fit"]["eta_hat"].get<double>(), Catch::Matchers::WithinAbs(0.89, 0.02));
  REQUIRE_THAT(summary["fit"]["sigma_hat"].get<double>(), Catch::Matchers::WithinAbs(0.01, 0.003));
  REQUIRE(csv::read(dir / "fig4_measured.csv").rows.size() == 8);
}
