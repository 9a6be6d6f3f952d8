#include "cqg/io.hpp"

#include <cmath>
#include <fstream>

#include "cqg/error.hpp"

namespace cqg {

namespace {

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return get<T>(j, key, where);
}

std::complex<double> complex_from_json(const json& v, const std::string& where) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError(where + ": expected a number or [re, im]");
}

json complex_to_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

void expect_axes(const ChartSpec& spec, std::size_t n) {
  if (spec.axes.size() != n)
    throw ConfigError("chart." + spec.kind + ": expected " + std::to_string(n) + " axes, got " +
                      std::to_string(spec.axes.size()));
}

}  // namespace

ChartPtr build_chart(const ChartSpec& spec) {
  if (spec.axes.empty()) throw ConfigError("chart: no axes");
  std::vector<Axis> axes = spec.axes;
  const std::size_t base = axes.size();
  const std::size_t padded = spec.pad && base < 3 ? 3 : base;
  for (std::size_t k = base; k < padded; ++k)
    axes.push_back(Axis{"pad" + std::to_string(k - base + 1), 0.0, 1.0, 1, Boundary::periodic});
  const double r2 = spec.radius * spec.radius;
  if (!(spec.radius > 0.0)) throw ConfigError("chart.radius must be positive");

  // Metric of the first `base` axes; the padding block is the identity.
  MetricFn core;
  if (spec.kind == "euclidean") {
    core = [base](std::span<const double>, std::span<double> g) {
      for (std::size_t i = 0; i < base; ++i) g[i * base + i] = 1.0;
    };
  } else if (spec.kind == "sphere") {
    expect_axes(spec, 2);
    core = [r2](std::span<const double> q, std::span<double> g) {
      const double s = std::sin(q[0]);
      g[0] = r2;
      g[3] = r2 * s * s;
    };
  } else if (spec.kind == "flat-x-sphere") {
    expect_axes(spec, 3);
    core = [r2](std::span<const double> q, std::span<double> g) {
      const double s = std::sin(q[1]);
      g[0] = 1.0;
      g[4] = r2;
      g[8] = r2 * s * s;
    };
  } else if (spec.kind == "polar") {
    expect_axes(spec, 2);
    core = [](std::span<const double> q, std::span<double> g) {
      g[0] = 1.0;
      g[3] = q[0] * q[0];
    };
  } else if (spec.kind == "sampled") {
    std::size_t size = 1;
    for (const auto& ax : spec.axes) size *= ax.count;
    if (spec.metric.size() != size * base * base)
      throw ConfigError("chart.metric: expected " + std::to_string(size * base * base) + " values, got " +
                        std::to_string(spec.metric.size()));
    if (padded == base) return MetricChart::sampled(std::move(axes), spec.metric);
    std::vector<double> samples(size * padded * padded, 0.0);
    for (std::size_t p = 0; p < size; ++p) {
      for (std::size_t i = 0; i < base; ++i)
        for (std::size_t j = 0; j < base; ++j)
          samples[p * padded * padded + i * padded + j] = spec.metric[p * base * base + i * base + j];
      for (std::size_t i = base; i < padded; ++i) samples[p * padded * padded + i * padded + i] = 1.0;
    }
    return MetricChart::sampled(std::move(axes), std::move(samples));
  } else {
    throw ConfigError("chart.kind: unknown '" + spec.kind +
                      "' (expected euclidean|sphere|flat-x-sphere|polar|sampled)");
  }
  if (spec.kind == "euclidean") return MetricChart::euclidean(std::move(axes));
  return MetricChart::analytic(std::move(axes), [core, base, padded](std::span<const double> q, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    std::vector<double> block(base * base, 0.0);
    core(q.first(base), block);
    for (std::size_t i = 0; i < base; ++i)
      for (std::size_t j = 0; j < base; ++j) g[i * padded + j] = block[i * base + j];
    for (std::size_t i = base; i < padded; ++i) g[i * padded + i] = 1.0;
  });
}

json to_json(const Axis& ax) {
  return json{{"name", ax.name}, {"lo", ax.lo}, {"hi", ax.hi}, {"count", ax.count}, {"boundary", to_string(ax.boundary)}};
}

Axis axis_from_json(const json& j) {
  const std::string where = "chart.axes[" + get_or<std::string>(j, "name", "?", "axis") + "]";
  if (!j.is_object()) throw ConfigError("chart.axes: each axis must be an object");
  Axis ax;
  ax.name = get<std::string>(j, "name", where);
  ax.lo = get<double>(j, "lo", where);
  ax.hi = get<double>(j, "hi", where);
  const auto count = get<std::int64_t>(j, "count", where);
  if (count < 1) throw ConfigError(where + ".count must be positive");
  ax.count = static_cast<std::size_t>(count);
  ax.boundary = boundary_from_string(get_or<std::string>(j, "boundary", "open", where));
  if (!(ax.hi > ax.lo)) throw ConfigError(where + ": hi must exceed lo");
  return ax;
}

json to_json(const ChartSpec& spec) {
  json j{{"kind", spec.kind}, {"axes", json::array()}};
  for (const auto& ax : spec.axes) j["axes"].push_back(to_json(ax));
  if (spec.kind == "sphere" || spec.kind == "flat-x-sphere") j["radius"] = spec.radius;
  if (spec.kind == "sampled") j["metric"] = spec.metric;
  j["pad"] = spec.pad;
  return j;
}

ChartSpec chart_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("chart: expected an object");
  ChartSpec s;
  s.kind = get_or<std::string>(j, "kind", "euclidean", "chart");
  if (!j.contains("axes") || !j["axes"].is_array()) throw ConfigError("chart: missing field 'axes'");
  for (const auto& a : j["axes"]) s.axes.push_back(axis_from_json(a));
  s.radius = get_or<double>(j, "radius", 1.0, "chart");
  s.metric = get_or<std::vector<double>>(j, "metric", {}, "chart");
  s.pad = get_or<bool>(j, "pad", true, "chart");
  return s;
}

json to_json(const CqgState& state) {
  json shape = json::array();
  for (const auto& ax : state.chart()->axes()) shape.push_back(ax.count);
  return json{{"time", state.time},         {"hbar", state.hbar},           {"winding", state.winding},
              {"shape", shape},             {"rho", state.rho.values},      {"action", state.action.values}};
}

CqgState state_from_json(const ChartPtr& chart, const json& j) {
  const std::string where = "state";
  auto rho = get<std::vector<double>>(j, "rho", where);
  auto action = get<std::vector<double>>(j, "action", where);
  if (rho.size() != chart->size() || action.size() != chart->size())
    throw ConfigError("state: rho/action sizes do not match the chart (" + std::to_string(chart->size()) + " points)");
  return make_state(ScalarField(chart, std::move(rho)), ScalarField(chart, std::move(action)),
                    get_or<double>(j, "time", 0.0, where), get_or<double>(j, "hbar", 1.0, where),
                    get_or<std::vector<double>>(j, "winding", {}, where));
}

namespace {

json nest(const MultiSpinor& psi, std::size_t level, std::size_t offset, std::size_t stride) {
  const std::size_t n = psi.particles();
  const std::size_t m = static_cast<std::size_t>(psi.spin().multiplicity());
  const std::size_t extent = level < n ? m : psi.basis();
  const std::size_t sub = stride / extent;
  json arr = json::array();
  for (std::size_t k = 0; k < extent; ++k) {
    if (level + 1 == 2 * n)
      arr.push_back(complex_to_json(psi.data()[offset + k]));
    else
      arr.push_back(nest(psi, level + 1, offset + k * sub, sub));
  }
  return arr;
}

void unnest(const json& j, MultiSpinor& psi, std::size_t level, std::size_t offset, std::size_t stride) {
  const std::size_t n = psi.particles();
  const std::size_t m = static_cast<std::size_t>(psi.spin().multiplicity());
  const std::size_t extent = level < n ? m : psi.basis();
  if (!j.is_array() || j.size() != extent)
    throw ConfigError("multispinor.data: level " + std::to_string(level) + " must have " + std::to_string(extent) +
                      " entries");
  const std::size_t sub = stride / extent;
  for (std::size_t k = 0; k < extent; ++k) {
    if (level + 1 == 2 * n)
      psi.data()[offset + k] = complex_from_json(j[k], "multispinor.data");
    else
      unnest(j[k], psi, level + 1, offset + k * sub, sub);
  }
}

}  // namespace

json to_json(const MultiSpinor& psi) {
  return json{{"particles", psi.particles()},
              {"s", psi.spin().str()},
              {"basis", psi.basis()},
              {"layout", "sigma_1..sigma_N (sigma = -s..s), then r_1..r_N; leaves [re, im]"},
              {"data", nest(psi, 0, 0, psi.size())}};
}

MultiSpinor multispinor_from_json(const json& j) {
  const std::string where = "multispinor";
  const auto n = get<std::int64_t>(j, "particles", where);
  const auto d = get<std::int64_t>(j, "basis", where);
  if (n < 1 || d < 1) throw ConfigError("multispinor: particles and basis must be positive");
  MultiSpinor psi(static_cast<std::size_t>(n), validate_spin(get<std::string>(j, "s", where)),
                  static_cast<std::size_t>(d));
  if (!j.contains("data")) throw ConfigError("multispinor: missing field 'data'");
  unnest(j["data"], psi, 0, 0, psi.size());
  return psi;
}

std::vector<SpinorState> states_from_json(const json& j) {
  const std::string where = "states";
  if (!j.is_object()) throw ConfigError("states: expected an object");
  const json& sj = j.contains("s") ? j["s"] : json();
  const SpinValue s = validate_spin(sj.is_string() ? sj.get<std::string>() : sj.dump());
  const auto d = get_or<std::int64_t>(j, "basis", 1, where);
  if (d < 1) throw ConfigError("states.basis must be positive");
  if (!j.contains("states") || !j["states"].is_array()) throw ConfigError("states: missing field 'states'");
  std::vector<SpinorState> out;
  const std::size_t dim = static_cast<std::size_t>(s.multiplicity()) * static_cast<std::size_t>(d);
  for (std::size_t k = 0; k < j["states"].size(); ++k) {
    const json& v = j["states"][k];
    const std::string w = "states[" + std::to_string(k) + "]";
    if (!v.is_array() || v.size() != dim)
      throw ConfigError(w + ": expected " + std::to_string(dim) + " values ((2s+1) * basis)");
    SpinorState st{s, static_cast<std::size_t>(d), {}};
    for (const auto& x : v) st.values.push_back(complex_from_json(x, w));
    out.push_back(std::move(st));
  }
  return out;
}

json states_to_json(const std::vector<SpinorState>& states) {
  json j{{"s", states.empty() ? "0" : states[0].s.str()},
         {"basis", states.empty() ? 1 : states[0].basis},
         {"states", json::array()}};
  for (const auto& st : states) {
    json v = json::array();
    for (const auto& z : st.values) v.push_back(complex_to_json(z));
    j["states"].push_back(std::move(v));
  }
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path + "'");
  os << j.dump(2) << '\n';
}

}  // namespace cqg
