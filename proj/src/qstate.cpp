#include "cqg/qstate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>

#include "cqg/error.hpp"
#include "cqg/geometry.hpp"

namespace cqg {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double wrap_phase(double a) {
  a = std::remainder(a, two_pi);
  return a;
}

// Neighbour of p one step along axis d (dir = +-1); false past an open end.
bool step(const MetricChart& chart, std::size_t p, std::span<const std::size_t> idx, std::size_t d, int dir,
          std::size_t& q) {
  const Axis& ax = chart.axis(d);
  const auto cnt = static_cast<std::int64_t>(ax.count);
  std::int64_t j = static_cast<std::int64_t>(idx[d]) + dir;
  if (j < 0 || j >= cnt) {
    if (!ax.periodic()) return false;
    j = (j + cnt) % cnt;
  }
  q = p - idx[d] * chart.stride(d) + static_cast<std::size_t>(j) * chart.stride(d);
  return true;
}

}  // namespace

std::vector<double> CqgState::seam_offsets() const {
  std::vector<double> s(winding.size());
  for (std::size_t d = 0; d < winding.size(); ++d) s[d] = two_pi * hbar * winding[d];
  return s;
}

void validate(const CqgState& state) {
  if (!state.rho.chart || state.rho.chart != state.action.chart)
    throw PreconditionError("state: rho and S must live on the same chart");
  if (state.winding.size() != state.rho.chart->dim())
    throw PreconditionError("state: winding needs one entry per axis");
  if (!(state.hbar > 0.0)) throw PreconditionError("state: hbar must be positive");
  for (std::size_t p = 0; p < state.rho.size(); ++p) {
    if (!(state.rho.values[p] >= 0.0) || !std::isfinite(state.rho.values[p])) {
      std::ostringstream os;
      os << "state: rho must be finite and >= 0; rho[" << p << "] = " << state.rho.values[p];
      throw DomainError(os.str());
    }
    if (!std::isfinite(state.action.values[p])) throw DomainError("state: S must be finite");
  }
  for (std::size_t d = 0; d < state.winding.size(); ++d)
    if (state.winding[d] != 0.0 && !state.rho.chart->axis(d).periodic())
      throw PreconditionError("state: winding only allowed on periodic axes");
}

CqgState make_state(ScalarField rho, ScalarField action, double time, double hbar, std::vector<double> winding) {
  if (winding.empty() && rho.chart) winding.assign(rho.chart->dim(), 0.0);
  CqgState s{std::move(rho), std::move(action), time, hbar, std::move(winding)};
  validate(s);
  return s;
}

WaveField to_wavefunction(const CqgState& state) {
  validate(state);
  WaveField w{ComplexField(state.rho.chart), state.time};
  for (std::size_t p = 0; p < state.rho.size(); ++p)
    w.psi.values[p] = std::polar(std::sqrt(state.rho.values[p]), state.action.values[p] / state.hbar);
  return w;
}

CqgState from_wavefunction(const WaveField& w, double hbar, const UnwrapOptions& opts) {
  const ChartPtr& chart = w.psi.chart;
  const std::size_t size = chart->size(), n = chart->dim();
  const std::vector<char>* region = opts.region;
  if (region && region->size() != size) throw PreconditionError("from_wavefunction: region mask size mismatch");
  auto inside = [&](std::size_t p) { return !region || (*region)[p] != 0; };

  ScalarField rho(chart), action(chart, 0.0);
  std::vector<double> arg(size);
  double rmax = 0.0;
  for (std::size_t p = 0; p < size; ++p) {
    rho.values[p] = std::norm(w.psi.values[p]);
    arg[p] = std::arg(w.psi.values[p]);
    if (inside(p)) rmax = std::max(rmax, rho.values[p]);
  }
  const double floor = opts.rho_floor_rel * rmax;
  std::vector<std::size_t> nodal;
  for (std::size_t p = 0; p < size; ++p)
    if (inside(p) && !(rho.values[p] > floor)) nodal.push_back(p);
  if (!nodal.empty()) {
    std::ostringstream os;
    os << "phase undefined at " << nodal.size() << " nodal point(s), first at flat index " << nodal.front();
    throw BranchAmbiguityError(os.str(), std::move(nodal), {});
  }

  std::vector<char> done(size, 0);
  std::vector<std::size_t> idx(n);
  for (std::size_t p = 0; p < size; ++p) {
    if (!inside(p)) continue;
    chart->unravel(p, idx);
    bool linked = false;
    for (std::size_t dd = n; dd-- > 0;) {
      if (idx[dd] == 0) continue;
      const std::size_t q = p - chart->stride(dd);
      if (!done[q]) continue;
      action.values[p] = action.values[q] + hbar * wrap_phase(arg[p] - arg[q]);
      linked = true;
      break;
    }
    if (!linked) action.values[p] = hbar * arg[p];
    done[p] = 1;
  }

  std::vector<std::size_t> vortices;
  std::vector<std::size_t> idx2(n);
  for (std::size_t p = 0; p < size; ++p) {
    if (!inside(p)) continue;
    chart->unravel(p, idx);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        std::size_t pa, pb, pab;
        if (!step(*chart, p, idx, a, 1, pa) || !step(*chart, p, idx, b, 1, pb)) continue;
        chart->unravel(pa, idx2);
        if (!step(*chart, pa, idx2, b, 1, pab)) continue;
        if (!inside(pa) || !inside(pb) || !inside(pab)) continue;
        const double circ = wrap_phase(arg[pa] - arg[p]) + wrap_phase(arg[pab] - arg[pa]) +
                            wrap_phase(arg[pb] - arg[pab]) + wrap_phase(arg[p] - arg[pb]);
        if (std::abs(circ) > std::numbers::pi) vortices.push_back(p);
      }
  }
  if (!vortices.empty()) {
    std::ostringstream os;
    os << "phase has " << vortices.size() << " vortex plaquette(s), first at flat index " << vortices.front();
    throw BranchAmbiguityError(os.str(), {}, std::move(vortices));
  }

  std::vector<double> winding(n, 0.0);
  std::size_t first = 0;
  while (first < size && !inside(first)) ++first;
  if (first < size) {
    chart->unravel(first, idx);
    for (std::size_t d = 0; d < n; ++d) {
      if (!chart->axis(d).periodic()) continue;
      double total = 0.0;
      bool full = true;
      std::size_t p = first;
      for (std::size_t k = 0; k < chart->axis(d).count; ++k) {
        chart->unravel(p, idx2);
        std::size_t q;
        step(*chart, p, idx2, d, 1, q);
        if (!inside(q)) {
          full = false;
          break;
        }
        total += wrap_phase(arg[q] - arg[p]);
        p = q;
      }
      if (full) winding[d] = std::round(total / two_pi);
    }
  }
  CqgState s{std::move(rho), std::move(action), w.time, hbar, std::move(winding)};
  return s;
}

double norm(const CqgState& state) { return integrate(state.rho); }

double norm(const WaveField& w) {
  const auto wts = quadrature_weights(*w.psi.chart);
  double s = 0.0;
  for (std::size_t p = 0; p < w.psi.size(); ++p) s += wts[p] * std::norm(w.psi.values[p]);
  return s;
}

double loop_integral(const CqgState& state, std::span<const GridIndex> loop) {
  validate(state);
  const auto& chart = *state.chart();
  const std::size_t n = chart.dim();
  if (loop.size() < 2 || loop.front() != loop.back())
    throw PreconditionError("loop_integral: path is not closed (last vertex must equal the first)");
  for (const auto& v : loop) {
    if (v.size() != n) throw PreconditionError("loop_integral: vertex has wrong dimension");
    for (std::size_t d = 0; d < n; ++d)
      if (v[d] >= chart.axis(d).count) throw PreconditionError("loop_integral: vertex outside grid");
  }
  const auto seams = state.seam_offsets();
  const auto grad = gradient(state.action, seams);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < loop.size(); ++k) {
    const auto& a = loop[k];
    const auto& b = loop[k + 1];
    std::size_t axis = n;
    int dir = 0;
    for (std::size_t d = 0; d < n; ++d) {
      if (a[d] == b[d]) continue;
      if (axis != n) throw PreconditionError("loop_integral: step changes more than one axis");
      axis = d;
      const std::size_t cnt = chart.axis(d).count;
      if (b[d] == a[d] + 1) dir = 1;
      else if (a[d] == b[d] + 1) dir = -1;
      else if (chart.axis(d).periodic() && a[d] == cnt - 1 && b[d] == 0) dir = 1;
      else if (chart.axis(d).periodic() && a[d] == 0 && b[d] == cnt - 1) dir = -1;
      else throw PreconditionError("loop_integral: step is not between neighbouring grid points");
    }
    if (axis == n) throw PreconditionError("loop_integral: repeated vertex");
    const double h = chart.axis(axis).spacing();
    const double ga = grad[axis].values[chart.ravel(a)];
    const double gb = grad[axis].values[chart.ravel(b)];
    total += dir * h * 0.5 * (ga + gb);
  }
  return total;
}

}  // namespace cqg
