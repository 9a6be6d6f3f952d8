// cqg: configuration-driven scenario runner.
//
// Precedence: built-in defaults < --config document < command-line flags.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cqg/error.hpp"
#include "cqg/scenario.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool quiet = false;
  bool serial = false;

  // evolve / equivalence
  std::optional<std::string> preset;
  std::optional<double> t_end, dt;
  std::optional<std::int64_t> samples, levels;
  bool snapshots = false;
  // spin-rate / spin-validate
  std::vector<std::string> spins;
  std::vector<std::int64_t> grid;
  std::optional<std::int64_t> random, max_den;
  std::vector<std::string> values;
  // exchange-paths
  std::optional<std::int64_t> K;
  std::vector<std::int64_t> start;
  bool allow_touching = false, no_census = false;
  // symmetrize
  std::optional<std::int64_t> n, basis;
  std::optional<std::string> s, states;
  bool duplicate = false;
};

using cqg::json;

void add(cqg::ConfigOverrides& ov, const char* sec, const char* key, const json& v) { ov.fields.emplace_back(sec, key, v); }

template <class T>
void add_opt(cqg::ConfigOverrides& ov, const char* sec, const char* key, const std::optional<T>& v) {
  if (v) add(ov, sec, key, *v);
}

cqg::ConfigOverrides overrides(const Flags& f, const std::string& scenario) {
  cqg::ConfigOverrides ov;
  if (!scenario.empty()) ov.scenario = scenario;
  ov.seed = f.seed;
  ov.out_dir = f.out;
  if (f.serial) add(ov, "solver", "exec", "serial");
  if (f.preset) add(ov, "state", "preset", *f.preset);
  add_opt(ov, "solver", "t_end", f.t_end);
  add_opt(ov, "solver", "dt", f.dt);
  add_opt(ov, "solver", "samples", f.samples);
  if (f.snapshots) add(ov, "solver", "snapshots", true);
  add_opt(ov, "equivalence", "levels", f.levels);
  add_opt(ov, "curvature", "samples", scenario == "curvature" ? f.samples : std::nullopt);
  if (!f.spins.empty()) add(ov, "spin", "s", f.spins);
  if (!f.grid.empty()) add(ov, "spin", "grid", f.grid);
  add_opt(ov, "spin", "random", f.random);
  if (!f.values.empty()) add(ov, "spin_validate", "values", f.values);
  add_opt(ov, "spin_validate", "max_denominator", f.max_den);
  add_opt(ov, "exchange", "K", f.K);
  if (!f.start.empty()) add(ov, "exchange", "start", f.start);
  if (f.allow_touching) add(ov, "exchange", "allow_touching", true);
  if (f.no_census) add(ov, "exchange", "census", false);
  add_opt(ov, "symmetrize", "n", f.n);
  add_opt(ov, "symmetrize", "basis", f.basis);
  add_opt(ov, "symmetrize", "s", f.s);
  add_opt(ov, "symmetrize", "states", f.states);
  if (f.duplicate) add(ov, "symmetrize", "duplicate", true);
  return ov;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal quantum geometrodynamics scenarios"};
  app.fallthrough();
  app.require_subcommand(0, 1);
  Flags f;
  app.add_option("--config", f.config, "scenario config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "seed for randomized checks");
  app.add_option("--out", f.out, "output directory");
  app.add_flag("--quiet", f.quiet, "print nothing on success");
  app.add_flag("--serial", f.serial, "use the serial reference kernels");

  auto* evolve = app.add_subcommand("evolve", "evolve a preset state with the coupled solver");
  evolve->add_option("--preset", f.preset, "gaussian | oscillator-ground | coherent | plane-wave");
  evolve->add_option("--t-end", f.t_end);
  evolve->add_option("--dt", f.dt);
  evolve->add_option("--samples", f.samples, "number of sample intervals");
  evolve->add_flag("--snapshots", f.snapshots, "write a density CSV at every sample");

  auto* curvature = app.add_subcommand("curvature", "scalar curvature and the curvature-coupling check");
  curvature->add_option("--samples", f.samples, "random densities");

  auto* rate = app.add_subcommand("spin-rate", "ratchet check of the proper rotation rate");
  rate->add_option("--s", f.spins, "spin values")->delimiter(',');
  rate->add_option("--grid", f.grid, "nz,nbeta")->delimiter(',')->expected(2);
  rate->add_option("--random", f.random, "random samples per spin");

  auto* validate = app.add_subcommand("spin-validate", "quantization gate");
  validate->add_option("values", f.values, "values such as 1/2 or 0.75");
  validate->add_option("--max-den", f.max_den, "largest denominator of the rational sweep");

  auto* exchange = app.add_subcommand("exchange-paths", "enumerate exchange paths on the angle lattice");
  exchange->add_option("--K", f.K, "lattice points per 2 pi");
  exchange->add_option("--start", f.start, "start point a,b")->delimiter(',')->expected(2);
  exchange->add_flag("--allow-touching", f.allow_touching, "let paths touch the diagonal");
  exchange->add_flag("--no-census", f.no_census, "skip the all-starts census");

  auto* sym = app.add_subcommand("symmetrize", "(anti)symmetrized product states");
  sym->add_option("--n", f.n, "particles");
  sym->add_option("--s", f.s, "spin");
  sym->add_option("--basis", f.basis, "spatial basis size");
  sym->add_option("--states", f.states, "states file (JSON)")->check(CLI::ExistingFile);
  sym->add_flag("--duplicate", f.duplicate, "use the first state for every particle");

  auto* equiv = app.add_subcommand("equivalence", "coupled solver against the linear reference");
  equiv->add_option("--t-end", f.t_end);
  equiv->add_option("--dt", f.dt);
  equiv->add_option("--levels", f.levels, "dt halvings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::string scenario;
  for (auto* sub : app.get_subcommands()) scenario = sub->get_name();

  try {
    const json doc = f.config.empty() ? json::object() : cqg::read_json_file(f.config);
    const cqg::ScenarioConfig cfg = cqg::parse_config(doc, overrides(f, scenario));
    const cqg::RunResult res = cqg::run(cfg, f.quiet ? nullptr : &std::cerr);
    if (!f.quiet || res.exit_code != 0) {
      std::ostream& os = res.exit_code == 0 ? std::cout : std::cerr;
      for (const auto& a : res.assertions)
        os << (a.pass ? "PASS " : "FAIL ") << a.name << "  value=" << a.value.dump() << "  limit=" << a.limit.dump()
           << '\n';
      if (res.exit_code != 0) os << "metrics: " << res.metrics.dump(2) << '\n';
      os << cfg.scenario << ": " << (res.exit_code == 0 ? "ok" : "assertion failure") << " (" << cfg.out_dir
         << "/manifest.json)\n";
    }
    return res.exit_code;
  } catch (const cqg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const cqg::CflError& e) {
    std::cerr << "config error: " << e.what() << " (largest admissible dt " << e.suggested_dt() << ")\n";
    return 2;
  } catch (const cqg::QuantizationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const cqg::StencilError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const cqg::PreconditionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
