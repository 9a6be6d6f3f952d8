#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "cqg/dynamics.hpp"
#include "cqg/io.hpp"

namespace cqg {

inline constexpr const char* version_string = "1.0.0";

// Initial state presets. Per-axis vectors cover the configured (unpadded)
// axes; a single value is broadcast.
//   gaussian           rho = prod N(q_a; center_a, width_a), S = sum p_a (q_a - center_a)
//   oscillator-ground  gaussian with width sqrt(hbar / (2 m omega)) (harmonic fields)
//   coherent           oscillator ground state displaced to `center` (default 1)
//   plane-wave         uniform rho, S = hbar sum k_a (q_a - lo_a) with
//                      k_a = 2 pi n_a / L_a (periodic axes only)
struct StateSpec {
  std::string preset = "gaussian";
  std::vector<double> center;
  std::vector<double> width;
  std::vector<double> momentum;
  std::vector<int> wave_number;
};

// V(q) = offset + (1/2) m omega^2 |q - center|^2   (harmonic)
//      = offset - force . q                         (uniform)
//      = offset                                     (none)
struct FieldSpec {
  std::string kind = "none";
  double omega = 1.0;
  std::vector<double> center;
  std::vector<double> force;
  double offset = 0.0;
};

struct SolverSpec {
  SolverParams params;
  bool dt_given = false;    // otherwise dt = dt_factor * h_min^2 m / hbar
  double dt_factor = 0.45;
  std::size_t samples = 16;  // sample times t_end * k / samples
  double tolerance = 1e-3;
  bool snapshots = false;
};

struct ScenarioConfig {
  std::string scenario;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  ChartSpec chart;
  StateSpec state;
  FieldSpec fields;
  SolverSpec solver;
  // Scenario-specific sections, defaults filled in by parse_config.
  json curvature;
  json spin;
  json spin_validate;
  json exchange;
  json symmetrize;
  json equivalence;
};

const std::vector<std::string>& scenario_names();

// Overrides from command-line flags; they win over the config document.
struct ConfigOverrides {
  std::optional<std::string> scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  // (section, key, value) triples, e.g. ("exchange", "K", 16).
  std::vector<std::tuple<std::string, std::string, json>> fields;
};

// Parses and validates a config document. ConfigError names the field.
ScenarioConfig parse_config(const json& doc, const ConfigOverrides& overrides = {});
// Normalized document: every field explicit. Feeding it back to
// parse_config reproduces the same run.
json config_to_json(const ScenarioConfig& cfg);

struct Assertion {
  std::string name;
  bool pass = false;
  json value;
  json limit;
};

struct RunResult {
  int exit_code = 0;  // 0 all assertions pass, 1 otherwise
  json metrics;
  std::vector<Assertion> assertions;
  std::vector<std::string> artifacts;  // file names inside out_dir
};

// Runs the scenario and writes its artifacts, manifest.json (config echo,
// versions, metrics, assertions, artifact list; byte-stable) and
// timing.json (wall time and thread count, which vary between runs) into
// cfg.out_dir. Progress lines go to `log` when non-null.
RunResult run(const ScenarioConfig& cfg, std::ostream* log = nullptr);

// Columnar plot files derived from the artifacts in `dir`, with '#' header
// lines: width.dat (t, sigma per axis) for evolve, path_valid.dat and
// path_direct.dat ((gamma_a, gamma_b) polylines) for exchange-paths,
// rate.dat (s_z, beta, rate) for spin-rate. Throws Error if an input
// artifact is missing. Returns the files written.
std::vector<std::string> emit_plot_data(const std::string& scenario, const std::string& dir);

}  // namespace cqg
