#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cqg/chart.hpp"
#include "cqg/qstate.hpp"
#include "cqg/statistics.hpp"

namespace cqg {

using json = nlohmann::ordered_json;

// Chart description as it appears in scenario configs.
//   euclidean      any axes, identity metric
//   sphere         (theta, phi): radius^2 diag(1, sin^2 theta)
//   flat-x-sphere  (x, theta, phi): diag(1, radius^2, radius^2 sin^2 theta)
//   polar          (r, theta): diag(1, r^2)
//   sampled        `metric` holds size * n * n values (row-major blocks)
// With pad = true, charts of dimension < 3 get singleton periodic axes
// "pad1", "pad2" on [0, 1] with a flat metric block, so the Weyl formulas
// (which need n > 2) apply to line and surface problems.
struct ChartSpec {
  std::string kind = "euclidean";
  std::vector<Axis> axes;
  double radius = 1.0;
  std::vector<double> metric;
  bool pad = true;
};

ChartPtr build_chart(const ChartSpec& spec);

json to_json(const Axis& ax);
Axis axis_from_json(const json& j);
json to_json(const ChartSpec& spec);
// ConfigError with the offending field on malformed input.
ChartSpec chart_spec_from_json(const json& j);

// {"time", "hbar", "winding", "shape", "rho", "action"}
json to_json(const CqgState& state);
CqgState state_from_json(const ChartPtr& chart, const json& j);

// {"particles", "s", "basis", "layout", "data"}: data is nested arrays, one
// level per sigma_1..sigma_N then r_1..r_N, with [re, im] leaves.
json to_json(const MultiSpinor& psi);
MultiSpinor multispinor_from_json(const json& j);

// States file: {"s": "1/2", "basis": d, "states": [[v, ...], ...]} where each
// state lists (2s+1) d values sigma-major and v is a number or [re, im].
std::vector<SpinorState> states_from_json(const json& j);
json states_to_json(const std::vector<SpinorState>& states);

json read_json_file(const std::string& path);
// Pretty-printed (2 spaces) with a trailing newline.
void write_json_file(const json& j, const std::string& path);

}  // namespace cqg
