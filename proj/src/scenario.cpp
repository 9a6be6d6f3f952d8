#include "cqg/scenario.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "cqg/error.hpp"
#include "cqg/exchange.hpp"
#include "cqg/geometry.hpp"
#include "cqg/permutation.hpp"
#include "cqg/spin.hpp"
#include "cqg/statistics.hpp"

namespace cqg {

namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

// ---------------------------------------------------------------- parsing

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(section + "." + key + ": unknown field");
  }
}

template <class T>
T field(const json& j, const char* key, T fallback, const std::string& section) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key + ": wrong type (got " + j.at(key).dump() + ")");
  }
}

// A number or a list of numbers.
template <class T>
std::vector<T> list_field(const json& j, const char* key, const std::string& section) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  const json& v = j.at(key);
  try {
    if (v.is_array()) return v.get<std::vector<T>>();
    return {v.get<T>()};
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key + ": expected a number or a list of numbers");
  }
}

template <class T>
std::vector<T> per_axis(const std::vector<T>& v, std::size_t n, T fallback, const std::string& what) {
  if (v.empty()) return std::vector<T>(n, fallback);
  if (v.size() == 1) return std::vector<T>(n, v[0]);
  if (v.size() != n)
    throw ConfigError(what + ": expected 1 or " + std::to_string(n) + " values, got " + std::to_string(v.size()));
  return v;
}

json section(const json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return json::object();
  if (!doc.at(key).is_object()) throw ConfigError(std::string(key) + ": expected an object");
  return doc.at(key);
}

ChartSpec default_chart(const std::string& scenario) {
  ChartSpec c;
  if (scenario == "curvature")
    c.axes = {Axis{"x", 0.0, 2.0 * pi, 256, Boundary::periodic}};
  else if (scenario == "equivalence")
    c.axes = {Axis{"x", -5.0, 5.0, 128, Boundary::open}};
  else
    c.axes = {Axis{"x", -6.0, 6.0, 256, Boundary::open}};
  return c;
}

StateSpec parse_state(const json& j) {
  const std::string sec = "state";
  check_keys(j, {"preset", "center", "width", "momentum", "wave_number"}, sec);
  StateSpec s;
  s.preset = field<std::string>(j, "preset", "gaussian", sec);
  if (s.preset != "gaussian" && s.preset != "oscillator-ground" && s.preset != "coherent" && s.preset != "plane-wave")
    throw ConfigError("state.preset: unknown '" + s.preset +
                      "' (expected gaussian|oscillator-ground|coherent|plane-wave)");
  s.center = list_field<double>(j, "center", sec);
  s.width = list_field<double>(j, "width", sec);
  s.momentum = list_field<double>(j, "momentum", sec);
  s.wave_number = list_field<int>(j, "wave_number", sec);
  for (double w : s.width)
    if (!(w > 0.0)) throw ConfigError("state.width must be positive");
  return s;
}

FieldSpec parse_fields(const json& j) {
  const std::string sec = "fields";
  check_keys(j, {"kind", "omega", "center", "force", "offset"}, sec);
  FieldSpec f;
  f.kind = field<std::string>(j, "kind", "none", sec);
  if (f.kind != "none" && f.kind != "harmonic" && f.kind != "uniform")
    throw ConfigError("fields.kind: unknown '" + f.kind + "' (expected none|harmonic|uniform)");
  f.omega = field<double>(j, "omega", 1.0, sec);
  if (!(f.omega > 0.0)) throw ConfigError("fields.omega must be positive");
  f.center = list_field<double>(j, "center", sec);
  f.force = list_field<double>(j, "force", sec);
  f.offset = field<double>(j, "offset", 0.0, sec);
  return f;
}

SolverSpec parse_solver(const json& j) {
  const std::string sec = "solver";
  check_keys(j,
             {"dt", "dt_factor", "t_end", "xi", "scheme", "kinetic", "curvature_refresh", "cfl", "filter",
              "filter_time", "rho_floor_rel", "max_clipped_mass", "mass", "hbar", "exec", "samples", "tolerance",
              "snapshots"},
             sec);
  SolverSpec s;
  SolverParams& p = s.params;
  s.dt_given = j.contains("dt") && !j["dt"].is_null();
  if (s.dt_given) p.dt = field<double>(j, "dt", p.dt, sec);
  s.dt_factor = field<double>(j, "dt_factor", s.dt_factor, sec);
  p.t_end = field<double>(j, "t_end", p.t_end, sec);
  if (j.contains("xi") && !j["xi"].is_null()) p.xi = field<double>(j, "xi", 0.0, sec);
  try {
    p.scheme = scheme_from_string(field<std::string>(j, "scheme", to_string(p.scheme), sec));
    p.kinetic = kinetic_from_string(field<std::string>(j, "kinetic", to_string(p.kinetic), sec));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
  p.curvature_refresh = field<int>(j, "curvature_refresh", p.curvature_refresh, sec);
  p.cfl = field<double>(j, "cfl", p.cfl, sec);
  p.filter = field<double>(j, "filter", p.filter, sec);
  if (j.contains("filter_time") && !j["filter_time"].is_null())
    p.filter_time = field<double>(j, "filter_time", 0.0, sec);
  p.rho_floor_rel = field<double>(j, "rho_floor_rel", p.rho_floor_rel, sec);
  p.max_clipped_mass = field<double>(j, "max_clipped_mass", p.max_clipped_mass, sec);
  p.units.mass = field<double>(j, "mass", p.units.mass, sec);
  p.units.hbar = field<double>(j, "hbar", p.units.hbar, sec);
  const std::string exec = field<std::string>(j, "exec", "parallel", sec);
  if (exec != "parallel" && exec != "serial") throw ConfigError("solver.exec: expected parallel|serial");
  p.exec = exec == "serial" ? Exec::serial : Exec::parallel;
  const auto samples = field<std::int64_t>(j, "samples", 16, sec);
  if (samples < 1) throw ConfigError("solver.samples must be at least 1");
  s.samples = static_cast<std::size_t>(samples);
  s.tolerance = field<double>(j, "tolerance", s.tolerance, sec);
  s.snapshots = field<bool>(j, "snapshots", false, sec);
  if (!(p.t_end > 0.0)) throw ConfigError("solver.t_end must be positive");
  if (!(s.dt_factor > 0.0)) throw ConfigError("solver.dt_factor must be positive");
  if (!(p.units.mass > 0.0) || !(p.units.hbar > 0.0)) throw ConfigError("solver.mass and solver.hbar must be positive");
  return s;
}

json spin_list_json(const json& v, const std::string& where) {
  json out = json::array();
  auto one = [&](const json& x) {
    const std::string text = x.is_string() ? x.get<std::string>() : x.dump();
    try {
      out.push_back(validate_spin(text).str());
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  };
  if (v.is_array())
    for (const auto& x : v) one(x);
  else
    one(v);
  return out;
}

json parse_curvature(const json& j) {
  const std::string sec = "curvature";
  check_keys(j, {"samples", "tolerance", "curvature_tolerance"}, sec);
  return json{{"samples", field<std::int64_t>(j, "samples", 20, sec)},
              {"tolerance", field<double>(j, "tolerance", 1e-6, sec)},
              {"curvature_tolerance", field<double>(j, "curvature_tolerance", 1e-6, sec)}};
}

json parse_spin(const json& j) {
  const std::string sec = "spin";
  check_keys(j, {"s", "grid", "random", "mass", "lambda", "hbar", "plot_grid"}, sec);
  json out;
  out["s"] = spin_list_json(j.contains("s") ? j["s"] : json::array({"1/2", "1", "3/2"}), "spin.s");
  const auto grid = list_field<std::int64_t>(j, "grid", sec);
  const auto g = per_axis<std::int64_t>(grid, 2, 1000, "spin.grid");
  const auto plot = per_axis<std::int64_t>(list_field<std::int64_t>(j, "plot_grid", sec), 2, 41, "spin.plot_grid");
  if (g[0] < 2 || g[1] < 1 || plot[0] < 2 || plot[1] < 1) throw ConfigError("spin.grid: need at least 2 x 1 points");
  out["grid"] = g;
  out["random"] = field<std::int64_t>(j, "random", 1000000, sec);
  out["mass"] = field<double>(j, "mass", 1.0, sec);
  out["lambda"] = field<double>(j, "lambda", 1.0, sec);
  out["hbar"] = field<double>(j, "hbar", 1.0, sec);
  out["plot_grid"] = plot;
  if (out["random"].get<std::int64_t>() < 0) throw ConfigError("spin.random must be nonnegative");
  return out;
}

json parse_spin_validate(const json& j) {
  const std::string sec = "spin_validate";
  check_keys(j, {"values", "max_denominator", "max_numerator"}, sec);
  json values = json::array();
  if (j.contains("values")) {
    if (!j["values"].is_array()) throw ConfigError("spin_validate.values: expected a list");
    for (const auto& v : j["values"]) values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  }
  const auto den = field<std::int64_t>(j, "max_denominator", 10, sec);
  const auto num = field<std::int64_t>(j, "max_numerator", 40, sec);
  if (den < 1 || num < 0) throw ConfigError("spin_validate: bounds must be positive");
  return json{{"values", values}, {"max_denominator", den}, {"max_numerator", num}};
}

json parse_exchange(const json& j) {
  const std::string sec = "exchange";
  check_keys(j, {"K", "start", "allow_touching", "census"}, sec);
  const auto K = field<std::int64_t>(j, "K", 8, sec);
  if (K < 2 || K > max_enumeration_k)
    throw ConfigError("exchange.K: must lie in [2, " + std::to_string(max_enumeration_k) + "]");
  const auto start = per_axis<std::int64_t>(list_field<std::int64_t>(j, "start", sec), 2, 0, "exchange.start");
  std::vector<std::int64_t> st = start;
  if (!j.contains("start") || j["start"].is_null()) st = {1 % K, 3 % K};
  if (st[0] < 0 || st[0] >= K || st[1] < 0 || st[1] >= K)
    throw ConfigError("exchange.start: indices must lie in [0, K)");
  if (st[0] == st[1]) throw ConfigError("exchange.start: start lies on the diagonal");
  return json{{"K", K},
              {"start", st},
              {"allow_touching", field<bool>(j, "allow_touching", false, sec)},
              {"census", field<bool>(j, "census", true, sec)}};
}

json parse_symmetrize(const json& j) {
  const std::string sec = "symmetrize";
  check_keys(j, {"n", "s", "basis", "states", "duplicate", "equivalence_samples", "write_tensor"}, sec);
  json out;
  std::vector<SpinorState> given;
  if (j.contains("states") && !j["states"].is_null()) {
    const json& st = j["states"];
    const json doc = st.is_string() ? read_json_file(st.get<std::string>()) : st;
    given = states_from_json(doc);
    if (given.empty()) throw ConfigError("symmetrize.states: no states");
    out["states"] = states_to_json(given);
  } else {
    out["states"] = nullptr;
  }
  const auto n = field<std::int64_t>(j, "n", given.empty() ? 2 : static_cast<std::int64_t>(given.size()), sec);
  if (n < 1 || n > static_cast<std::int64_t>(max_particles))
    throw ConfigError("symmetrize.n: must lie in [1, " + std::to_string(max_particles) + "]");
  out["n"] = n;
  if (given.empty()) {
    out["s"] = spin_list_json(j.contains("s") ? j["s"] : json("1/2"), "symmetrize.s")[0];
    const auto d = field<std::int64_t>(j, "basis", 2, sec);
    if (d < 1) throw ConfigError("symmetrize.basis must be positive");
    out["basis"] = d;
  } else {
    out["s"] = given[0].s.str();
    out["basis"] = given[0].basis;
    if (j.contains("s") && spin_list_json(j["s"], "symmetrize.s")[0] != out["s"])
      throw ConfigError("symmetrize.s: differs from the spin of the given states");
  }
  out["duplicate"] = field<bool>(j, "duplicate", false, sec);
  if (!given.empty() && !out["duplicate"].get<bool>() && static_cast<std::int64_t>(given.size()) != n)
    throw ConfigError("symmetrize.states: " + std::to_string(given.size()) + " states given for n = " +
                      std::to_string(n));
  out["equivalence_samples"] = field<std::int64_t>(j, "equivalence_samples", 100, sec);
  out["write_tensor"] = field<bool>(j, "write_tensor", true, sec);
  return out;
}

json parse_equivalence(const json& j) {
  const std::string sec = "equivalence";
  check_keys(j, {"levels", "phase_region_rel", "sample_every", "tolerance", "order_min", "order_max"}, sec);
  const auto levels = field<std::int64_t>(j, "levels", 3, sec);
  if (levels < 1 || levels > 6) throw ConfigError("equivalence.levels: must lie in [1, 6]");
  return json{{"levels", levels},
              {"phase_region_rel", field<double>(j, "phase_region_rel", 1e-4, sec)},
              {"sample_every", field<std::int64_t>(j, "sample_every", 100, sec)},
              {"tolerance", field<double>(j, "tolerance", 1e-3, sec)},
              {"order_min", field<double>(j, "order_min", 3.5, sec)},
              {"order_max", field<double>(j, "order_max", 4.5, sec)}};
}

void set_override(json& doc, const std::string& sec, const std::string& key, const json& value) {
  if (!doc.contains(sec) || doc[sec].is_null()) doc[sec] = json::object();
  if (!doc[sec].is_object()) throw ConfigError(sec + ": expected an object");
  doc[sec][key] = value;
}

bool uses_chart(const std::string& s) { return s == "evolve" || s == "curvature" || s == "equivalence"; }

// ---------------------------------------------------------------- output

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Writer {
  fs::path dir;
  std::vector<std::string> files;

  std::ofstream open(const std::string& name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw Error("cannot write '" + (dir / name).string() + "'");
    if (std::find(files.begin(), files.end(), name) == files.end()) files.push_back(name);
    return os;
  }
  void json_file(const std::string& name, const json& j) {
    auto os = open(name);
    os << j.dump(2) << '\n';
  }
  void field_csv(const std::string& name, const ScalarField& f) {
    auto os = open(name);
    write_csv(f, os);
  }
};

struct Context {
  const ScenarioConfig& cfg;
  Writer& out;
  std::ostream* log;
  json metrics = json::object();
  std::vector<Assertion> assertions;
  json warnings = json::array();

  Context(const ScenarioConfig& c, Writer& w, std::ostream* l) : cfg(c), out(w), log(l) {}

  void note(const std::string& line) const {
    if (log) *log << line << '\n';
  }
  void check(const std::string& name, bool pass, json value, json limit) {
    assertions.push_back({name, pass, std::move(value), std::move(limit)});
  }
};

// ---------------------------------------------------------------- physics set-up

std::size_t physical_axes(const ScenarioConfig& cfg) { return cfg.chart.axes.size(); }

ExternalFields make_fields(const ScenarioConfig& cfg) {
  const FieldSpec& f = cfg.fields;
  const std::size_t n = physical_axes(cfg);
  const double m = cfg.solver.params.units.mass;
  ExternalFields ef;
  if (f.kind == "harmonic") {
    const auto c = per_axis(f.center, n, 0.0, "fields.center");
    const double k = m * f.omega * f.omega;
    ef.potential = [c, k, n, off = f.offset](std::span<const double> q, double) {
      double v = 0.0;
      for (std::size_t a = 0; a < n; ++a) v += (q[a] - c[a]) * (q[a] - c[a]);
      return off + 0.5 * k * v;
    };
  } else if (f.kind == "uniform") {
    const auto force = per_axis(f.force, n, 0.0, "fields.force");
    ef.potential = [force, n, off = f.offset](std::span<const double> q, double) {
      double v = off;
      for (std::size_t a = 0; a < n; ++a) v -= force[a] * q[a];
      return v;
    };
  } else if (f.offset != 0.0) {
    ef.potential = [off = f.offset](std::span<const double>, double) { return off; };
  }
  return ef;
}

struct GaussianOracle {
  std::vector<double> center, width, momentum, field_center, force;
  bool harmonic = false;
  double omega = 1.0, mass = 1.0, hbar = 1.0;

  void at(double t, std::size_t a, double& mean, double& w) const {
    const double m = mass, w0 = width[a];
    if (harmonic) {
      const double c = std::cos(omega * t), s = std::sin(omega * t);
      const double wp = hbar / (2.0 * m * omega * w0);
      mean = field_center[a] + (center[a] - field_center[a]) * c + momentum[a] / (m * omega) * s;
      w = std::sqrt(w0 * w0 * c * c + wp * wp * s * s);
    } else {
      const double f = force.empty() ? 0.0 : force[a];
      mean = center[a] + momentum[a] * t / m + f * t * t / (2.0 * m);
      const double r = hbar * t / (2.0 * m * w0 * w0);
      w = w0 * std::sqrt(1.0 + r * r);
    }
  }
};

struct Preset {
  CqgState state;
  std::optional<GaussianOracle> gaussian;
  bool uniform_oracle = false;  // plane wave in a field-free box
  std::string oracle = "none";
};

Preset make_preset(const ScenarioConfig& cfg, const ChartPtr& chart) {
  const StateSpec& s = cfg.state;
  const std::size_t n = physical_axes(cfg);
  const double m = cfg.solver.params.units.mass, hbar = cfg.solver.params.units.hbar;
  const bool flat = cfg.chart.kind == "euclidean";
  Preset p;
  ScalarField rho(chart), action(chart);
  std::vector<double> winding(chart->dim(), 0.0);

  if (s.preset == "plane-wave") {
    const auto nk = per_axis(s.wave_number, n, 1, "state.wave_number");
    for (std::size_t a = 0; a < n; ++a)
      if (!chart->axis(a).periodic()) throw ConfigError("state.preset plane-wave: axis '" + chart->axis(a).name + "' must be periodic");
    std::vector<double> q(chart->dim());
    for (std::size_t i = 0; i < chart->size(); ++i) {
      chart->coords(i, q);
      rho[i] = 1.0;
      double v = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        const Axis& ax = chart->axis(a);
        v += hbar * 2.0 * pi * nk[a] * (q[a] - ax.lo) / ax.length();
      }
      action[i] = v;
    }
    for (std::size_t a = 0; a < n; ++a) winding[a] = nk[a];
    p.uniform_oracle = flat && cfg.fields.kind == "none";
    if (p.uniform_oracle) p.oracle = "uniform density";
  } else {
    const bool osc = s.preset != "gaussian";
    if (osc && cfg.fields.kind != "harmonic")
      throw ConfigError("state.preset " + s.preset + ": needs fields.kind = harmonic");
    const double ground = std::sqrt(hbar / (2.0 * m * cfg.fields.omega));
    GaussianOracle g;
    g.center = per_axis(s.center, n, s.preset == "coherent" ? 1.0 : 0.0, "state.center");
    g.width = per_axis(s.width, n, osc ? ground : 1.0, "state.width");
    g.momentum = per_axis(s.momentum, n, 0.0, "state.momentum");
    g.harmonic = cfg.fields.kind == "harmonic";
    g.field_center = per_axis(cfg.fields.center, n, 0.0, "fields.center");
    if (cfg.fields.kind == "uniform") g.force = per_axis(cfg.fields.force, n, 0.0, "fields.force");
    g.omega = cfg.fields.omega;
    g.mass = m;
    g.hbar = hbar;
    std::vector<double> q(chart->dim());
    for (std::size_t i = 0; i < chart->size(); ++i) {
      chart->coords(i, q);
      double e = 0.0, v = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        const double d = q[a] - g.center[a];
        e -= d * d / (2.0 * g.width[a] * g.width[a]);
        v += g.momentum[a] * d;
      }
      rho[i] = std::exp(e);
      action[i] = v;
    }
    if (flat) {
      p.gaussian = g;
      p.oracle = g.harmonic ? "gaussian in harmonic field" : "free gaussian spreading";
    }
  }
  CqgState st = make_state(std::move(rho), std::move(action), 0.0, hbar, winding);
  const double nrm = norm(st);
  if (!(nrm > 0.0)) throw ConfigError("state: initial density integrates to zero on this chart");
  for (auto& v : st.rho.values) v /= nrm;
  p.state = std::move(st);
  return p;
}

SolverParams resolved_params(const ScenarioConfig& cfg, const MetricChart& chart) {
  SolverParams p = cfg.solver.params;
  if (!cfg.solver.dt_given) {
    const double h = chart.min_spacing();
    p.dt = cfg.solver.dt_factor * h * h * p.units.mass / p.units.hbar;
  }
  check_params(chart, p);
  return p;
}

// ---------------------------------------------------------------- scenarios

void run_evolve(Context& ctx) {
  const ScenarioConfig& cfg = ctx.cfg;
  const ChartPtr chart = build_chart(cfg.chart);
  Preset pre = make_preset(cfg, chart);
  const ExternalFields fields = make_fields(cfg);
  const SolverParams params = resolved_params(cfg, *chart);
  const std::size_t n = physical_axes(cfg);
  const bool reference = params.scheme == Scheme::reference_linear;

  std::optional<CqgStepper> cqg;
  std::optional<ReferenceStepper> ref;
  if (reference)
    ref.emplace(to_wavefunction(pre.state), fields, params);
  else
    cqg.emplace(pre.state, fields, params);

  auto density = [&]() -> ScalarField {
    if (cqg) return cqg->state().rho;
    ScalarField r(chart);
    const auto& psi = ref->state().psi.values;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::norm(psi[i]);
    return r;
  };

  auto ts = ctx.out.open("timeseries.csv");
  ts << "t,norm";
  for (std::size_t a = 0; a < n; ++a) ts << ",mean_" << chart->axis(a).name;
  for (std::size_t a = 0; a < n; ++a) ts << ",width_" << chart->axis(a).name;
  ts << ",energy,max_discrepancy\n";

  const double rho0 = pre.uniform_oracle ? 1.0 / norm(make_state(ScalarField(chart, 1.0), ScalarField(chart, 0.0)))
                                         : 0.0;
  double worst = pre.oracle == "none" ? std::nan("") : 0.0;
  double norm0 = 0.0, drift = 0.0;
  for (std::size_t k = 0; k <= cfg.solver.samples; ++k) {
    const double t = params.t_end * static_cast<double>(k) / static_cast<double>(cfg.solver.samples);
    if (cqg)
      cqg->advance_to(t);
    else
      ref->advance_to(t);
    const Observables o = cqg ? cqg->observe() : ref->observe();
    if (k == 0) norm0 = o.norm;
    drift = std::max(drift, std::abs(o.norm - norm0) / norm0);
    double disc = std::nan("");
    if (pre.gaussian) {
      disc = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        double mean, w;
        pre.gaussian->at(o.t, a, mean, w);
        disc = std::max({disc, std::abs(o.width[a] - w) / w, std::abs(o.mean[a] - mean) / w});
      }
    } else if (pre.uniform_oracle) {
      disc = 0.0;
      for (double v : density().values) disc = std::max(disc, std::abs(v - rho0) / rho0);
    }
    if (!std::isnan(disc)) worst = std::max(worst, disc);
    ts << num(o.t) << ',' << num(o.norm);
    for (std::size_t a = 0; a < n; ++a) ts << ',' << num(o.mean[a]);
    for (std::size_t a = 0; a < n; ++a) ts << ',' << num(o.width[a]);
    ts << ',' << num(o.energy) << ',' << num(disc) << '\n';
    if (cfg.solver.snapshots) {
      char name[32];
      std::snprintf(name, sizeof name, "density_%04zu.csv", k);
      ctx.out.field_csv(name, density());
    }
  }
  ts.close();
  ctx.out.field_csv("density_final.csv", density());
  if (cqg)
    for (const auto& w : cqg->warnings()) ctx.warnings.push_back(w);

  ctx.metrics["oracle"] = pre.oracle;
  ctx.metrics["steps"] = cqg ? cqg->steps_taken() : ref->steps_taken();
  ctx.metrics["dt"] = params.dt;
  ctx.metrics["t_end"] = params.t_end;
  ctx.metrics["norm_drift"] = drift;
  ctx.metrics["max_discrepancy"] = worst;
  ctx.check("norm_conserved", drift < 1e-6, drift, 1e-6);
  if (pre.oracle != "none")
    ctx.check("matches_" + std::string(pre.gaussian ? "gaussian_law" : "uniform_density"),
              worst <= cfg.solver.tolerance, worst, cfg.solver.tolerance);
  ctx.note("evolve: " + std::to_string(ctx.metrics["steps"].get<std::size_t>()) + " steps, max discrepancy " +
           num(worst));
}

// Random smooth log-density, separable over the physical axes: three
// sinusoids per axis with wave numbers up to two periods per box, plus a
// Gaussian envelope on nonperiodic axes. Derivatives are exact.
struct LogDensity {
  struct Term {
    double amp, k, phase;
  };
  std::vector<std::vector<Term>> terms;
  std::vector<double> mu, inv_var;

  LogDensity(const MetricChart& chart, std::size_t n, std::uint64_t& rng) {
    terms.resize(n);
    mu.assign(n, 0.0);
    inv_var.assign(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
      const Axis& ax = chart.axis(a);
      for (int t = 0; t < 3; ++t) {
        const double amp = 0.1 + 0.4 * uniform01(rng);
        const double k = 2.0 * pi * static_cast<double>(1 + uniform_below(rng, 2)) / ax.length();
        terms[a].push_back({amp, k, 2.0 * pi * uniform01(rng)});
      }
      if (!ax.periodic()) {
        mu[a] = ax.lo + ax.length() * (0.4 + 0.2 * uniform01(rng));
        const double sd = ax.length() * (0.15 + 0.1 * uniform01(rng));
        inv_var[a] = 1.0 / (sd * sd);
      }
    }
  }
  double value(std::span<const double> q) const {
    double v = 0.0;
    for (std::size_t a = 0; a < terms.size(); ++a) {
      v -= 0.5 * inv_var[a] * (q[a] - mu[a]) * (q[a] - mu[a]);
      for (const auto& t : terms[a]) v += t.amp * std::sin(t.k * q[a] + t.phase);
    }
    return v;
  }
  // -(1/2)(Laplacian f / 2 + |grad f|^2 / 4): the Bohm potential of e^f for hbar = m = 1.
  double bohm(std::span<const double> q) const {
    double lap = 0.0, grad2 = 0.0;
    for (std::size_t a = 0; a < terms.size(); ++a) {
      double d1 = -inv_var[a] * (q[a] - mu[a]), d2 = -inv_var[a];
      for (const auto& t : terms[a]) {
        d1 += t.amp * t.k * std::cos(t.k * q[a] + t.phase);
        d2 -= t.amp * t.k * t.k * std::sin(t.k * q[a] + t.phase);
      }
      lap += d2;
      grad2 += d1 * d1;
    }
    return -0.5 * (0.5 * lap + 0.25 * grad2);
  }
};

void run_curvature(Context& ctx) {
  const ScenarioConfig& cfg = ctx.cfg;
  const json& sec = cfg.curvature;
  const ChartPtr chart = build_chart(cfg.chart);
  const Exec exec = cfg.solver.params.exec;
  const ScalarField R = riemann_scalar(chart, exec);
  ctx.out.field_csv("curvature.csv", R);

  std::optional<double> expected;
  const std::string& kind = cfg.chart.kind;
  if (kind == "euclidean" || kind == "polar") expected = 0.0;
  if (kind == "sphere" || kind == "flat-x-sphere") expected = 2.0 / (cfg.chart.radius * cfg.chart.radius);
  double rmin = R.size() ? R[0] : 0.0, rmax = rmin;
  for (double v : R.values) {
    rmin = std::min(rmin, v);
    rmax = std::max(rmax, v);
  }
  ctx.metrics["riemann_min"] = rmin;
  ctx.metrics["riemann_max"] = rmax;
  if (expected) {
    double err = 0.0;
    for (double v : R.values) err = std::max(err, std::abs(v - *expected));
    err /= std::max(1.0, std::abs(*expected));
    ctx.metrics["riemann_expected"] = *expected;
    ctx.metrics["riemann_error"] = err;
    const double tol = sec["curvature_tolerance"].get<double>();
    ctx.check("riemann_scalar_matches", err <= tol, err, tol);
  }

  if (kind != "euclidean") return;
  // Curvature coupling against the Bohm potential on random smooth densities.
  const std::size_t n = physical_axes(cfg);
  const std::size_t dim = chart->dim();
  const SolverParams& sp = cfg.solver.params;
  const double xi = resolve_xi(sp, dim);
  const double scale = xi * sp.units.hbar * sp.units.hbar / sp.units.mass;
  const double bohm_scale = sp.units.hbar * sp.units.hbar / sp.units.mass;
  std::uint64_t rng = cfg.seed;
  const auto samples = sec["samples"].get<std::int64_t>();
  auto os = ctx.out.open("pinning.csv");
  os << "sample,max_abs_error,max_bohm,relative_error\n";
  double worst = 0.0;
  std::vector<double> q(dim);
  for (std::int64_t k = 0; k < samples; ++k) {
    const LogDensity f(*chart, n, rng);
    const ScalarField rho = ScalarField::sample(chart, [&](std::span<const double> x) { return std::exp(f.value(x)); });
    WeylOptions wo;
    wo.exec = exec;
    wo.rho_floor_rel = 0.0;
    const ScalarField rw = weyl_curvature(rho, wo);
    double err = 0.0, big = 0.0;
    for (std::size_t i = 0; i < chart->size(); ++i) {
      chart->coords(i, q);
      const double qb = bohm_scale * f.bohm(q);
      big = std::max(big, std::abs(qb));
      err = std::max(err, std::abs(scale * rw[i] - qb));
    }
    const double rel = err / big;
    worst = std::max(worst, rel);
    os << k << ',' << num(err) << ',' << num(big) << ',' << num(rel) << '\n';
  }
  ctx.metrics["xi"] = xi;
  ctx.metrics["pinning_samples"] = samples;
  ctx.metrics["pinning_max_relative_error"] = worst;
  const double tol = sec["tolerance"].get<double>();
  ctx.check("curvature_term_equals_bohm_potential", worst <= tol, worst, tol);
  ctx.note("curvature: pinning error " + num(worst) + " over " + std::to_string(samples) + " densities");
}

void run_spin_rate(Context& ctx) {
  const json& sec = ctx.cfg.spin;
  const Exec exec = ctx.cfg.solver.params.exec;
  SpinConfig base;
  base.mass = sec["mass"].get<double>();
  base.lambda = sec["lambda"].get<double>();
  base.hbar = sec["hbar"].get<double>();
  if (!(base.mass > 0.0) || !(base.lambda > 0.0) || !(base.hbar > 0.0))
    throw ConfigError("spin: mass, lambda and hbar must be positive");
  const auto nz = sec["grid"][0].get<std::size_t>(), nb = sec["grid"][1].get<std::size_t>();
  const auto nrand = sec["random"].get<std::size_t>();
  const auto pz = sec["plot_grid"][0].get<std::size_t>(), pb = sec["plot_grid"][1].get<std::size_t>();
  std::uint64_t rng = ctx.cfg.seed;
  json per_spin = json::array();
  auto plot = ctx.out.open("rate.csv");
  plot << "s,sz,beta,rate\n";
  for (const auto& sj : sec["s"]) {
    const SpinValue s = validate_spin(sj.get<std::string>());
    std::vector<RatchetSample> samples = ratchet_grid(s, nz, nb, base.hbar);
    const std::size_t grid = samples.size();
    for (std::size_t k = 0; k < nrand; ++k) {
      RatchetSample r;
      r.sz = base.hbar * s.s() * (2.0 * uniform01(rng) - 1.0);
      do r.beta = pi * uniform01(rng);
      while (r.beta < 1e-9 || r.beta > pi - 1e-9);
      samples.push_back(r);
    }
    json entry{{"s", s.str()}, {"grid_samples", grid}, {"random_samples", nrand}};
    bool ok = true;
    try {
      const RatchetReport rep = ratchet_check(samples, s, base, exec);
      entry["violations"] = rep.violations;
      entry["min_rate"] = rep.min_rate;
      entry["argmin"] = {{"sz", rep.at_min.sz}, {"beta", rep.at_min.beta}};
    } catch (const InvariantViolation& e) {
      ok = false;
      entry["violation"] = e.what();
    }
    ctx.check("ratchet_nonnegative_s=" + s.str(), ok, entry.value("violations", json(nullptr)), 0);

    // Rate from the inverse of the top metric, on a subset of the samples.
    // The inverse loses precision like 1/sin^2 beta near the poles, so the
    // deviation is weighted by sin^2 beta.
    double dev = 0.0;
    const std::size_t stride = std::max<std::size_t>(1, samples.size() / 4096);
    for (std::size_t k = 0; k < samples.size(); k += stride) {
      SpinConfig c = base;
      c.sz = samples[k].sz;
      c.beta = samples[k].beta;
      const auto g = top_metric(c.beta, c.mass, c.lambda);
      const Eigen::Matrix3d G = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(g.data());
      const Eigen::Vector3d p(c.sz, 0.0, c.hbar * s.s());
      const double oracle = G.inverse().row(2).dot(p);
      const double rate = gamma_rate(c, s);
      const double sb = std::sin(c.beta);
      dev = std::max(dev, std::abs(rate - oracle) * sb * sb / std::max(1.0, std::abs(oracle)));
    }
    entry["top_metric_deviation"] = dev;
    ctx.check("rate_matches_top_metric_s=" + s.str(), dev < 1e-12, dev, 1e-12);
    per_spin.push_back(entry);

    for (const auto& r : ratchet_grid(s, pz, pb, base.hbar)) {
      SpinConfig c = base;
      c.sz = r.sz;
      c.beta = r.beta;
      plot << s.str() << ',' << num(r.sz) << ',' << num(r.beta) << ',' << num(gamma_rate(c, s)) << '\n';
    }
    ctx.note("spin-rate: s = " + s.str() + ", " + std::to_string(samples.size()) + " samples");
  }
  ctx.metrics["spins"] = per_spin;
  ctx.out.json_file("ratchet.json", per_spin);
}

void run_spin_validate(Context& ctx) {
  const json& sec = ctx.cfg.spin_validate;
  json values = json::array();
  for (const auto& v : sec["values"]) {
    const std::string text = v.get<std::string>();
    json e{{"input", text}};
    try {
      e["accepted"] = true;
      e["spin"] = validate_spin(text).str();
    } catch (const QuantizationError& err) {
      e["accepted"] = false;
      e["error"] = err.what();
    } catch (const Error& err) {
      e["accepted"] = false;
      e["error"] = err.what();
    }
    values.push_back(e);
  }
  const auto max_den = sec["max_denominator"].get<std::int64_t>();
  const auto max_num = sec["max_numerator"].get<std::int64_t>();
  std::size_t tested = 0, mismatches = 0;
  std::set<std::int64_t> accepted_two_s;
  json mismatch_list = json::array();
  for (std::int64_t den = 1; den <= max_den; ++den)
    for (std::int64_t num_ = -max_num; num_ <= max_num; ++num_) {
      ++tested;
      // num/den is a nonnegative half-integer iff den divides 2 num.
      const bool expect = num_ >= 0 && (2 * num_) % den == 0;
      bool got = true;
      try {
        const SpinValue s = validate_spin(num_, den);
        accepted_two_s.insert(s.two_s);
        if (2 * num_ != static_cast<std::int64_t>(s.two_s) * den) got = false;
      } catch (const QuantizationError&) {
        got = false;
      }
      if (got != expect) {
        ++mismatches;
        if (mismatch_list.size() < 20) mismatch_list.push_back(std::to_string(num_) + "/" + std::to_string(den));
      }
    }
  json acc = json::array();
  for (auto t : accepted_two_s) acc.push_back(SpinValue{static_cast<int>(t)}.str());
  const json report{{"values", values},
                    {"sweep", {{"max_denominator", max_den}, {"max_numerator", max_num}, {"tested", tested},
                               {"accepted", acc}, {"mismatches", mismatches}, {"mismatch_examples", mismatch_list}}}};
  ctx.out.json_file("validate.json", report);
  ctx.metrics["tested"] = tested;
  ctx.metrics["accepted"] = acc;
  ctx.metrics["mismatches"] = mismatches;
  ctx.check("accepts_exactly_half_integers", mismatches == 0, mismatches, 0);
  ctx.note("spin-validate: " + std::to_string(tested) + " rationals, " + std::to_string(mismatches) + " mismatches");
}

json path_json(const ExchangePath& p) {
  json v = json::array();
  for (const auto& x : p.vertices) v.push_back({x.i, x.j});
  return v;
}

void run_exchange(Context& ctx) {
  const json& sec = ctx.cfg.exchange;
  const auto K = sec["K"].get<std::int64_t>();
  const LatticePoint a{sec["start"][0].get<std::int64_t>(), sec["start"][1].get<std::int64_t>()};
  ExchangeRules rules;
  rules.allow_touching = sec["allow_touching"].get<bool>();
  const ExchangeEnumeration e = enumerate_exchange_paths(K, a, rules);
  json sums = json::array();
  for (auto u : e.winding_units) sums.push_back(Winding{u, 0, K}.str());
  const ExchangePath example = staircase_path(K, a);
  const PathStatus example_status = is_valid_exchange_path(example, a, e.end, rules);
  const ExchangePath direct = direct_path(K, a);
  json report{{"K", K},
              {"start", {a.i, a.j}},
              {"end", {e.end.i, e.end.j}},
              {"rules", rules.allow_touching ? "allow-touching" : "strict"},
              {"counts", {{"valid", e.n_valid}, {"full_turn", e.n_full_turn}, {"boundary", e.n_boundary}}},
              {"winding_sums", sums},
              {"winding_units", e.winding_units},
              {"direct", {{"status", to_string(e.direct)}, {"vertices", path_json(direct)}}},
              {"example", {{"status", to_string(example_status)},
                           {"winding", winding_sum(example).str()},
                           {"vertices", path_json(example)}}}};
  const bool winding_ok = e.winding_units == std::vector<std::int64_t>{K};
  ctx.check("winding_sums_equal_2pi", winding_ok, sums, json::array({"2pi"}));
  ctx.check("valid_path_exists", e.n_valid != "0", e.n_valid, ">0");
  ctx.check("direct_path_rejected", e.direct != PathStatus::valid, to_string(e.direct), "rejected");
  ctx.check("example_path_valid", example_status == PathStatus::valid && winding_sum(example).units() == K,
            to_string(example_status), "valid");
  if (sec["census"].get<bool>()) {
    const ExchangeCensus c = exchange_census(K, rules, ctx.cfg.solver.params.exec);
    report["census"] = {{"starts", c.starts},
                        {"starts_without_valid", c.starts_without_valid},
                        {"direct_accepted", c.direct_accepted},
                        {"total_valid", c.total_valid},
                        {"min_valid", c.min_valid},
                        {"winding_units", c.winding_units}};
    ctx.check("census_every_start_has_valid_path", c.starts_without_valid == 0, c.starts_without_valid, 0);
    ctx.check("census_direct_paths_rejected", c.direct_accepted == 0, c.direct_accepted, 0);
    ctx.check("census_winding_2pi", c.winding_units == std::vector<std::int64_t>{K}, c.winding_units,
              json::array({K}));
  }
  ctx.out.json_file("exchange.json", report);
  ctx.metrics["winding_sums"] = sums;
  ctx.metrics["valid_paths"] = e.n_valid;
  ctx.metrics["direct"] = to_string(e.direct);
  ctx.note("exchange-paths: K = " + std::to_string(K) + ", " + e.n_valid + " valid paths");
}

std::vector<SpinorState> random_states(std::size_t count, SpinValue s, std::size_t d, std::uint64_t& rng) {
  std::vector<SpinorState> out;
  const std::size_t dim = static_cast<std::size_t>(s.multiplicity()) * d;
  for (std::size_t k = 0; k < count; ++k) {
    SpinorState st{s, d, {}};
    double nrm = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const std::complex<double> z(2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0);
      st.values.push_back(z);
      nrm += std::norm(z);
    }
    for (auto& z : st.values) z /= std::sqrt(nrm);
    out.push_back(std::move(st));
  }
  return out;
}

void run_symmetrize(Context& ctx) {
  const json& sec = ctx.cfg.symmetrize;
  const auto n = sec["n"].get<std::size_t>();
  const SpinValue s = validate_spin(sec["s"].get<std::string>());
  const auto d = sec["basis"].get<std::size_t>();
  const bool duplicate = sec["duplicate"].get<bool>();
  std::uint64_t rng = ctx.cfg.seed;
  std::vector<SpinorState> states =
      sec["states"].is_null() ? random_states(duplicate ? 1 : n, s, d, rng) : states_from_json(sec["states"]);
  if (duplicate) states.assign(n, states.front());
  MultiSpinor psi;
  try {
    psi = symmetrize(states, ctx.cfg.solver.params.exec);
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("symmetrize: ") + e.what());
  }
  const double nrm = psi.norm();
  const bool pauli_zero = nrm < 1e-12;
  const int expected = s.fermion() ? -1 : 1;
  json report{{"n", n}, {"s", s.str()}, {"basis", d}, {"duplicate", duplicate}, {"norm", nrm},
              {"pauli_zero", pauli_zero}, {"expected_phase", expected}};
  if (duplicate && n > 1)
    ctx.check("pauli_zero_iff_fermion", pauli_zero == s.fermion(), pauli_zero, s.fermion());
  if (!pauli_zero) {
    json ex = json::array();
    bool all_ok = true;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const Permutation p = Permutation::transposition(n, i, j);
        const ExchangeResult r = exchange_test(psi, p);
        const ActionJump jump = action_jump(s, p);
        all_ok = all_ok && r.eigen && r.phase() == expected && jump.phase == expected;
        worst = std::max(worst, r.residual);
        ex.push_back({{"swap", {i + 1, j + 1}},
                      {"lambda", {r.lambda.real(), r.lambda.imag()}},
                      {"residual", r.residual},
                      {"action_jump_phase", jump.phase}});
      }
    report["transpositions"] = ex;
    ctx.check("exchange_phase_on_transpositions", all_ok, worst, json{{"phase", expected}, {"tol", 1e-10}});
    const auto samples = sec["equivalence_samples"].get<std::size_t>();
    const EquivalenceCheck eq = permutation_equivalence_check(psi, samples, splitmix64(rng));
    report["equivalence"] = {{"samples", eq.samples}, {"max_deviation", eq.max_deviation}};
    ctx.check("permutation_equivalence", eq.max_deviation < 1e-12, eq.max_deviation, 1e-12);
  }
  ctx.out.json_file("symmetrize.json", report);
  if (sec["write_tensor"].get<bool>()) ctx.out.json_file("state.json", to_json(psi));
  ctx.metrics["norm"] = nrm;
  ctx.metrics["pauli_zero"] = pauli_zero;
  ctx.note("symmetrize: N = " + std::to_string(n) + ", s = " + s.str() + ", norm " + num(nrm));
}

void run_equivalence(Context& ctx) {
  const ScenarioConfig& cfg = ctx.cfg;
  const json& sec = cfg.equivalence;
  const ChartPtr chart = build_chart(cfg.chart);
  const Preset pre = make_preset(cfg, chart);
  const ExternalFields fields = make_fields(cfg);
  const SolverParams base = resolved_params(cfg, *chart);
  EquivalenceOptions opts;
  opts.phase_region_rel = sec["phase_region_rel"].get<double>();
  opts.sample_every = sec["sample_every"].get<std::size_t>();
  const auto levels = sec["levels"].get<int>();

  auto os = ctx.out.open("equivalence.csv");
  os << "level,dt,steps,density_l2,density_max,phase_max,norm_drift_cqg,norm_drift_reference,self_difference\n";
  std::vector<std::vector<double>> finals;
  std::vector<double> self_diff;
  json lv = json::array();
  for (int l = 0; l < levels; ++l) {
    SolverParams p = base;
    p.dt = base.dt / static_cast<double>(1 << l);
    const EquivalenceReport r = equivalence_report(pre.state, fields, p, p.t_end, opts);
    CqgStepper st(pre.state, fields, p);
    st.advance_to(p.t_end);
    finals.push_back(st.state().rho.values);
    double sd = std::nan("");
    if (l > 0) {
      const ScalarField diff(chart, [&] {
        std::vector<double> v(finals[l].size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::pow(finals[l][i] - finals[l - 1][i], 2);
        return v;
      }());
      sd = std::sqrt(integrate(diff));
      self_diff.push_back(sd);
    }
    os << l << ',' << num(p.dt) << ',' << r.steps << ',' << num(r.max_density_l2) << ',' << num(r.max_density_max)
       << ',' << num(r.max_phase) << ',' << num(r.norm_drift_cqg) << ',' << num(r.norm_drift_reference) << ','
       << num(sd) << '\n';
    lv.push_back({{"dt", p.dt}, {"density_l2", r.max_density_l2}, {"phase_max", r.max_phase},
                  {"phase_compared", r.phase_compared}, {"norm_drift_cqg", r.norm_drift_cqg},
                  {"norm_drift_reference", r.norm_drift_reference}});
    if (l == 0) {
      const double tol = sec["tolerance"].get<double>();
      ctx.check("density_l2_discrepancy", r.max_density_l2 < tol, r.max_density_l2, tol);
      ctx.check("norm_conserved_cqg", r.norm_drift_cqg < 1e-6, r.norm_drift_cqg, 1e-6);
      ctx.check("norm_conserved_reference", r.norm_drift_reference < 1e-6, r.norm_drift_reference, 1e-6);
    }
    ctx.note("equivalence: level " + std::to_string(l) + " dt " + num(p.dt) + " l2 " + num(r.max_density_l2));
  }
  ctx.metrics["levels"] = lv;
  if (self_diff.size() >= 2) {
    const double order = std::log2(self_diff[0] / self_diff[1]);
    ctx.metrics["observed_order"] = order;
    const double lo = sec["order_min"].get<double>(), hi = sec["order_max"].get<double>();
    ctx.check("time_order", order >= lo && order <= hi, order, json::array({lo, hi}));
  }
}

json versions() {
  json v;
  v["cqg"] = version_string;
  v["compiler"] = __VERSION__;
  v["openmp"] = openmp_version();
  v["fftw"] = std::string(fftw_version);
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["boost"] = BOOST_LIB_VERSION;
  v["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                       "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  return v;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw Error("emit_plot_data: missing artifact '" + p.string() + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  return out;
}

void write_polyline(std::ostream& os, const json& vertices, std::int64_t K) {
  // Wrapped angles; a blank line where the path crosses an edge of the square.
  const double step = 2.0 * pi / static_cast<double>(K);
  std::int64_t pi_ = -1, pj = -1;
  for (const auto& v : vertices) {
    const auto i = v[0].get<std::int64_t>(), j = v[1].get<std::int64_t>();
    if (pi_ >= 0 && (std::abs(i - pi_) > 1 || std::abs(j - pj) > 1)) os << '\n';
    os << num(step * static_cast<double>(i)) << ' ' << num(step * static_cast<double>(j)) << '\n';
    pi_ = i;
    pj = j;
  }
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"evolve",         "curvature",  "spin-rate",  "spin-validate",
                                              "exchange-paths", "symmetrize", "equivalence"};
  return names;
}

ScenarioConfig parse_config(const json& input, const ConfigOverrides& ov) {
  json doc = input.is_null() ? json::object() : input;
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  if (ov.scenario) doc["scenario"] = *ov.scenario;
  if (ov.seed) doc["seed"] = *ov.seed;
  if (ov.out_dir) set_override(doc, "output", "dir", *ov.out_dir);
  for (const auto& [sec, key, value] : ov.fields) set_override(doc, sec, key, value);
  check_keys(doc,
             {"scenario", "seed", "chart", "state", "fields", "solver", "curvature", "spin", "spin_validate",
              "exchange", "symmetrize", "equivalence", "output"},
             "config");

  ScenarioConfig cfg;
  cfg.scenario = field<std::string>(doc, "scenario", "", "config");
  if (cfg.scenario.empty()) throw ConfigError("config.scenario: missing (one of evolve, curvature, ...)");
  const auto& names = scenario_names();
  if (std::find(names.begin(), names.end(), cfg.scenario) == names.end())
    throw ConfigError("config.scenario: unknown '" + cfg.scenario + "'");
  if (doc.contains("seed") && !(doc["seed"].is_number_unsigned() || (doc["seed"].is_number_integer() && doc["seed"].get<std::int64_t>() >= 0)))
    throw ConfigError("config.seed: expected a nonnegative integer");
  cfg.seed = field<std::uint64_t>(doc, "seed", 1, "config");
  const json out = section(doc, "output");
  check_keys(out, {"dir"}, "output");
  cfg.out_dir = field<std::string>(out, "dir", "out", "output");

  cfg.chart = doc.contains("chart") && !doc["chart"].is_null() ? chart_spec_from_json(doc["chart"])
                                                                : default_chart(cfg.scenario);
  if (!(cfg.chart.kind == "euclidean" || cfg.chart.kind == "sphere" || cfg.chart.kind == "flat-x-sphere" ||
        cfg.chart.kind == "polar" || cfg.chart.kind == "sampled"))
    throw ConfigError("chart.kind: unknown '" + cfg.chart.kind + "'");
  cfg.state = parse_state(section(doc, "state"));
  cfg.fields = parse_fields(section(doc, "fields"));
  cfg.solver = parse_solver(section(doc, "solver"));
  cfg.curvature = parse_curvature(section(doc, "curvature"));
  cfg.spin = parse_spin(section(doc, "spin"));
  cfg.spin_validate = parse_spin_validate(section(doc, "spin_validate"));
  cfg.exchange = parse_exchange(section(doc, "exchange"));
  cfg.symmetrize = parse_symmetrize(section(doc, "symmetrize"));
  cfg.equivalence = parse_equivalence(section(doc, "equivalence"));
  return cfg;
}

json config_to_json(const ScenarioConfig& cfg) {
  json j{{"scenario", cfg.scenario}, {"seed", cfg.seed}};
  if (uses_chart(cfg.scenario)) j["chart"] = to_json(cfg.chart);
  if (cfg.scenario == "evolve" || cfg.scenario == "equivalence") {
    const StateSpec& s = cfg.state;
    j["state"] = {{"preset", s.preset}, {"center", s.center}, {"width", s.width}, {"momentum", s.momentum},
                  {"wave_number", s.wave_number}};
    const FieldSpec& f = cfg.fields;
    j["fields"] = {{"kind", f.kind}, {"omega", f.omega}, {"center", f.center}, {"force", f.force},
                   {"offset", f.offset}};
  }
  const SolverSpec& s = cfg.solver;
  const SolverParams& p = s.params;
  json solver{{"exec", p.exec == Exec::serial ? "serial" : "parallel"}};
  if (cfg.scenario == "evolve" || cfg.scenario == "equivalence") {
    solver["dt"] = s.dt_given ? json(p.dt) : json(nullptr);
    solver["dt_factor"] = s.dt_factor;
    solver["t_end"] = p.t_end;
    solver["scheme"] = to_string(p.scheme);
    solver["kinetic"] = to_string(p.kinetic);
    solver["curvature_refresh"] = p.curvature_refresh;
    solver["cfl"] = p.cfl;
    solver["filter"] = p.filter;
    solver["filter_time"] = p.filter_time ? json(*p.filter_time) : json(nullptr);
    solver["rho_floor_rel"] = p.rho_floor_rel;
    solver["max_clipped_mass"] = p.max_clipped_mass;
    solver["samples"] = s.samples;
    solver["tolerance"] = s.tolerance;
    solver["snapshots"] = s.snapshots;
  }
  if (uses_chart(cfg.scenario)) {
    solver["xi"] = p.xi ? json(*p.xi) : json(nullptr);
    solver["mass"] = p.units.mass;
    solver["hbar"] = p.units.hbar;
  }
  j["solver"] = solver;
  if (cfg.scenario == "curvature") j["curvature"] = cfg.curvature;
  if (cfg.scenario == "spin-rate") j["spin"] = cfg.spin;
  if (cfg.scenario == "spin-validate") j["spin_validate"] = cfg.spin_validate;
  if (cfg.scenario == "exchange-paths") j["exchange"] = cfg.exchange;
  if (cfg.scenario == "symmetrize") j["symmetrize"] = cfg.symmetrize;
  if (cfg.scenario == "equivalence") j["equivalence"] = cfg.equivalence;
  j["output"] = {{"dir", cfg.out_dir}};
  return j;
}

RunResult run(const ScenarioConfig& cfg, std::ostream* log) {
  const auto t0 = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw Error("cannot create '" + cfg.out_dir + "': " + ec.message());
  Writer out{cfg.out_dir, {}};
  Context ctx{cfg, out, log};

  if (cfg.scenario == "evolve") run_evolve(ctx);
  else if (cfg.scenario == "curvature") run_curvature(ctx);
  else if (cfg.scenario == "spin-rate") run_spin_rate(ctx);
  else if (cfg.scenario == "spin-validate") run_spin_validate(ctx);
  else if (cfg.scenario == "exchange-paths") run_exchange(ctx);
  else if (cfg.scenario == "symmetrize") run_symmetrize(ctx);
  else if (cfg.scenario == "equivalence") run_equivalence(ctx);
  else throw ConfigError("config.scenario: unknown '" + cfg.scenario + "'");

  for (const auto& f : emit_plot_data(cfg.scenario, cfg.out_dir))
    if (std::find(out.files.begin(), out.files.end(), f) == out.files.end()) out.files.push_back(f);

  RunResult res;
  res.metrics = ctx.metrics;
  res.assertions = ctx.assertions;
  bool pass = true;
  json asserts = json::array();
  for (const auto& a : ctx.assertions) {
    pass = pass && a.pass;
    asserts.push_back({{"name", a.name}, {"pass", a.pass}, {"value", a.value}, {"limit", a.limit}});
  }
  res.exit_code = pass ? 0 : 1;
  std::vector<std::string> files = out.files;
  std::sort(files.begin(), files.end());
  const json manifest{{"scenario", cfg.scenario},
                      {"seed", cfg.seed},
                      {"status", pass ? "pass" : "fail"},
                      {"config", config_to_json(cfg)},
                      {"versions", versions()},
                      {"metrics", ctx.metrics},
                      {"assertions", asserts},
                      {"warnings", ctx.warnings},
                      {"artifacts", files}};
  out.json_file("manifest.json", manifest);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json_file(json{{"wall_seconds", wall}, {"threads", max_threads()}}, (fs::path(cfg.out_dir) / "timing.json").string());
  res.artifacts = files;
  res.artifacts.push_back("manifest.json");
  res.artifacts.push_back("timing.json");
  return res;
}

std::vector<std::string> emit_plot_data(const std::string& scenario, const std::string& dir_name) {
  const fs::path dir(dir_name);
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw Error("cannot write '" + (dir / name).string() + "'");
    written.push_back(name);
    return os;
  };
  if (scenario == "evolve") {
    const auto lines = read_lines(dir / "timeseries.csv");
    if (lines.empty()) throw Error("emit_plot_data: empty timeseries.csv");
    const auto head = split(lines[0]);
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < head.size(); ++c)
      if (head[c].rfind("width_", 0) == 0) cols.push_back(c);
    auto os = open("width.dat");
    os << "# t";
    for (auto c : cols) os << " sigma_" << head[c].substr(6);
    os << '\n';
    for (std::size_t r = 1; r < lines.size(); ++r) {
      const auto cells = split(lines[r]);
      os << cells.at(0);
      for (auto c : cols) os << ' ' << cells.at(c);
      os << '\n';
    }
  } else if (scenario == "exchange-paths") {
    std::ifstream is(dir / "exchange.json");
    if (!is) throw Error("emit_plot_data: missing artifact '" + (dir / "exchange.json").string() + "'");
    const json j = json::parse(is);
    const auto K = j.at("K").get<std::int64_t>();
    {
      auto os = open("path_valid.dat");
      os << "# gamma_a gamma_b (" << j["example"]["status"].get<std::string>() << " exchange path, K = " << K << ")\n";
      write_polyline(os, j["example"]["vertices"], K);
    }
    auto os = open("path_direct.dat");
    os << "# gamma_a gamma_b (direct path, " << j["direct"]["status"].get<std::string>() << ", K = " << K << ")\n";
    write_polyline(os, j["direct"]["vertices"], K);
  } else if (scenario == "spin-rate") {
    const auto lines = read_lines(dir / "rate.csv");
    auto os = open("rate.dat");
    os << "# s_z beta rate  (blocks per spin and s_z row)\n";
    std::string last_s, last_z;
    for (std::size_t r = 1; r < lines.size(); ++r) {
      const auto c = split(lines[r]);
      if (c.size() != 4) throw Error("emit_plot_data: malformed rate.csv row " + std::to_string(r + 1));
      if (r > 1 && c[0] != last_s) os << "\n\n# s = " << c[0] << '\n';
      else if (r > 1 && c[1] != last_z) os << '\n';
      if (r == 1) os << "# s = " << c[0] << '\n';
      os << c[1] << ' ' << c[2] << ' ' << c[3] << '\n';
      last_s = c[0];
      last_z = c[1];
    }
  }
  return written;
}

}  // namespace cqg
