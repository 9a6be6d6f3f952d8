#include "cqg/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "cqg/error.hpp"
#include "cqg/geometry.hpp"
#include "cqg/spectral.hpp"
#include "cqg/stencil.hpp"

namespace cqg {

namespace {

// Depth of ln rho below its maximum beyond which the coupled solver is
// unreliable: perturbations of relative size e grow to about
// e * exp(depth / 2) in the tails, and stencil errors are near 1e-10.
constexpr double deep_tail = 46.0;

std::vector<double> chart_scratch(const MetricChart& chart) { return std::vector<double>(chart.size(), 0.0); }

// Multilinear interpolation of value(p) at q.
template <class Value>
double interpolate_grid(const MetricChart& chart, std::span<const double> q, Value value) {
  const std::size_t n = chart.dim();
  if (q.size() != n) throw PreconditionError("interpolate: coordinate has wrong dimension");
  std::vector<std::size_t> lo(n), hi(n);
  std::vector<double> frac(n);
  for (std::size_t d = 0; d < n; ++d) {
    const Axis& ax = chart.axis(d);
    if (ax.count == 1) {
      lo[d] = hi[d] = 0;
      frac[d] = 0.0;
      continue;
    }
    double x = (q[d] - ax.lo) / ax.spacing();
    const auto cnt = static_cast<double>(ax.count);
    if (ax.periodic()) {
      x = std::fmod(x, cnt);
      if (x < 0) x += cnt;
      const double f = std::floor(x);
      lo[d] = static_cast<std::size_t>(f) % ax.count;
      hi[d] = (lo[d] + 1) % ax.count;
      frac[d] = x - f;
    } else {
      x = std::clamp(x, 0.0, cnt - 1.0);
      const double f = std::min(std::floor(x), cnt - 2.0);
      lo[d] = static_cast<std::size_t>(f);
      hi[d] = lo[d] + 1;
      frac[d] = x - f;
    }
  }
  double acc = 0.0;
  std::vector<std::size_t> idx(n);
  for (std::size_t corner = 0; corner < (std::size_t{1} << n); ++corner) {
    double w = 1.0;
    for (std::size_t d = 0; d < n; ++d) {
      const bool up = (corner >> d) & 1U;
      idx[d] = up ? hi[d] : lo[d];
      w *= up ? frac[d] : 1.0 - frac[d];
    }
    if (w != 0.0) acc += w * value(chart.ravel(idx));
  }
  return acc;
}

Observables moments(const MetricChart& chart, const std::vector<double>& w, const std::vector<double>& rho) {
  const std::size_t n = chart.dim(), size = chart.size();
  Observables o;
  o.mean.assign(n, 0.0);
  o.width.assign(n, 0.0);
  std::vector<double> q(n);
  for (std::size_t p = 0; p < size; ++p) {
    const double m = w[p] * rho[p];
    o.norm += m;
    chart.coords(p, q);
    for (std::size_t d = 0; d < n; ++d) o.mean[d] += m * q[d];
  }
  for (std::size_t d = 0; d < n; ++d) o.mean[d] /= o.norm;
  for (std::size_t p = 0; p < size; ++p) {
    const double m = w[p] * rho[p];
    chart.coords(p, q);
    for (std::size_t d = 0; d < n; ++d) o.width[d] += m * (q[d] - o.mean[d]) * (q[d] - o.mean[d]);
  }
  for (std::size_t d = 0; d < n; ++d) o.width[d] = std::sqrt(o.width[d] / o.norm);
  return o;
}

}  // namespace

SampledFields sample_fields(const ExternalFields& fields, const ChartPtr& chart, double t) {
  SampledFields s{ScalarField(chart, 0.0), {}};
  const std::size_t n = chart->dim(), size = chart->size();
  std::vector<double> q(n);
  if (fields.potential)
    for (std::size_t p = 0; p < size; ++p) {
      chart->coords(p, q);
      s.potential.values[p] = fields.potential(q, t);
    }
  if (fields.vector_potential) {
    s.vector_potential.assign(n, ScalarField(chart, 0.0));
    std::vector<double> a(n);
    for (std::size_t p = 0; p < size; ++p) {
      chart->coords(p, q);
      std::fill(a.begin(), a.end(), 0.0);
      fields.vector_potential(q, t, a);
      for (std::size_t d = 0; d < n; ++d) s.vector_potential[d].values[p] = a[d];
    }
  }
  return s;
}

std::string to_string(Scheme s) { return s == Scheme::cqg_coupled ? "cqg-coupled" : "reference-linear"; }

Scheme scheme_from_string(const std::string& s) {
  if (s == "cqg-coupled") return Scheme::cqg_coupled;
  if (s == "reference-linear") return Scheme::reference_linear;
  throw ConfigError("unknown scheme '" + s + "' (expected cqg-coupled or reference-linear)");
}

std::string to_string(Kinetic k) { return k == Kinetic::spectral ? "spectral" : "laplace-beltrami"; }

Kinetic kinetic_from_string(const std::string& s) {
  if (s == "spectral") return Kinetic::spectral;
  if (s == "laplace-beltrami") return Kinetic::laplace_beltrami;
  throw ConfigError("unknown kinetic operator '" + s + "' (expected spectral or laplace-beltrami)");
}

double resolve_xi(const SolverParams& params, std::size_t n) { return params.xi ? *params.xi : default_xi(n); }

void check_params(const MetricChart& chart, const SolverParams& params) {
  if (!(params.dt > 0.0) || !std::isfinite(params.dt)) throw PreconditionError("solver: dt must be positive");
  if (params.curvature_refresh < 1) throw PreconditionError("solver: curvature_refresh must be >= 1");
  if (!(params.filter >= 0.0 && params.filter <= 1.0 / 64.0))
    throw PreconditionError("solver: filter strength must be in [0, 1/64]");
  if (params.filter_time && !(*params.filter_time > 0.0))
    throw PreconditionError("solver: filter_time must be positive");
  if (!(params.units.mass > 0.0) || !(params.units.hbar > 0.0))
    throw PreconditionError("solver: hbar and mass must be positive");
  const double h = chart.min_spacing();
  if (h == 0.0) return;
  const double limit = params.cfl * h * h * params.units.mass / params.units.hbar;
  if (!(params.dt < limit)) {
    std::ostringstream os;
    os << "dt = " << params.dt << " violates the stability bound dt < " << limit << " (cfl " << params.cfl
       << ", min spacing " << h << ")";
    throw CflError(os.str(), 0.9 * limit);
  }
}

std::size_t step_count(double t_end, double dt) {
  if (!(t_end >= 0.0) || !(dt > 0.0)) throw PreconditionError("step_count: need t_end >= 0 and dt > 0");
  const double r = t_end / dt;
  auto k = static_cast<std::size_t>(std::ceil(r - 1e-9 * std::max(1.0, r)));
  return k;
}

ScalarField hamiltonian_density(const CqgState& state, const ExternalFields& fields, double xi, double mass,
                                double rho_floor_rel, Exec exec) {
  validate(state);
  const ChartPtr& chart = state.chart();
  const std::size_t n = chart->dim(), size = chart->size();
  const auto rw = weyl_curvature(state.rho, {rho_floor_rel, exec});
  const auto seams = state.seam_offsets();
  const auto grad = gradient(state.action, seams, exec);
  const auto f = sample_fields(fields, chart, state.time);
  ScalarField h(chart);
  std::vector<double> w(n);
  const double c = xi * state.hbar * state.hbar / mass;
  for (std::size_t p = 0; p < size; ++p) {
    for (std::size_t d = 0; d < n; ++d)
      w[d] = grad[d].values[p] - (f.vector_potential.empty() ? 0.0 : f.vector_potential[d].values[p]);
    const auto gi = chart->inverse_metric(p);
    double kin = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) kin += gi[i * n + j] * w[i] * w[j];
    h.values[p] = kin / (2.0 * mass) + f.potential.values[p] + c * rw.values[p];
  }
  return h;
}

// ---------------------------------------------------------------------------
// Coupled solver

struct CqgStepper::Impl {
  ChartPtr chart;
  std::size_t n = 0, size = 0;
  ExternalFields fields;
  SolverParams params;
  double xi = 0.0, kappa = 0.0, hbar = 1.0, mass = 1.0;
  std::vector<double> winding;
  std::vector<double> seams;
  std::vector<double> u, S;
  double t = 0.0;
  double filter_time = 1.0;
  std::size_t steps = 0;
  std::vector<double> riemann;
  SampledFields static_fields;
  std::vector<double> weights;
  std::vector<std::string> warnings;

  // R_W from the most recent refresh.
  std::vector<double> rw;

  // scratch
  std::vector<std::vector<double>> gu, gs, flux_v, flux_u;
  std::vector<double> dflux, divv, lapu, ones;
  std::vector<char> wall;  // reflecting axes: zero normal flux imposed weakly
  std::vector<double> k1u, k1s, k2u, k2s, k3u, k3s, k4u, k4s, tu, ts;

  // Right-hand sides in density-ratio form: with phi = sqrt(rho),
  //   du/dt = -(1/(rho sqrt g)) d_i (sqrt g rho v^i)
  //   dS/dt = -[(1/2m) g^ij w_i w_j + V + (xi hbar^2/m) (R_g - 4 kappa LB(phi)/phi)]
  // where every neighbour ratio rho_k/rho_p is exp(u_k - u_p).
  void rhs(const std::vector<double>& uu, const std::vector<double>& ss, double time, bool refresh,
           std::vector<double>& du, std::vector<double>& ds, bool damp = true) {
    const Exec exec = params.exec;
    SampledFields dyn;
    const SampledFields* f = &static_fields;
    if (fields.time_dependent) {
      dyn = sample_fields(fields, chart, time);
      f = &dyn;
    }
    const bool has_a = !f->vector_potential.empty();
    for (std::size_t d = 0; d < n; ++d)
      kernels::derivative(*chart, ss, d, seams[d], gs[d], exec, kernels::Closure::sbp);
    std::vector<double> w(n);
    for (std::size_t p = 0; p < size; ++p) {
      const auto gi = chart->inverse_metric(p);
      const double sg = chart->sqrt_det(p);
      for (std::size_t d = 0; d < n; ++d) w[d] = gs[d][p] - (has_a ? f->vector_potential[d].values[p] : 0.0);
      double kin = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double vi = 0.0;
        for (std::size_t j = 0; j < n; ++j) vi += gi[i * n + j] * w[j];
        vi /= mass;
        kin += 0.5 * w[i] * vi;
        flux_v[i][p] = sg * vi;
      }
      ds[p] = -(kin + f->potential.values[p]);
    }
    std::fill(divv.begin(), divv.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      kernels::weighted_derivative(*chart, flux_v[i], uu, 1.0, i, wall[i], dflux, exec);
      for (std::size_t p = 0; p < size; ++p) divv[p] += dflux[p];
    }
    if (refresh) {
      // grad(phi)/phi, then LB(phi)/phi
      for (std::size_t d = 0; d < n; ++d) kernels::weighted_derivative(*chart, ones, uu, 0.5, d, false, gu[d], exec);
      for (std::size_t p = 0; p < size; ++p) {
        const auto gi = chart->inverse_metric(p);
        const double sg = chart->sqrt_det(p);
        for (std::size_t i = 0; i < n; ++i) {
          double a = 0.0;
          for (std::size_t j = 0; j < n; ++j) a += gi[i * n + j] * gu[j][p];
          flux_u[i][p] = sg * a;
        }
      }
      std::fill(lapu.begin(), lapu.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        kernels::weighted_derivative(*chart, flux_u[i], uu, 0.5, i, wall[i], dflux, exec);
        for (std::size_t p = 0; p < size; ++p) lapu[p] += dflux[p];
      }
      for (std::size_t p = 0; p < size; ++p) rw[p] = riemann[p] - 4.0 * kappa * lapu[p] / chart->sqrt_det(p);
    }
    const double c = xi * hbar * hbar / mass;
    for (std::size_t p = 0; p < size; ++p) {
      ds[p] -= c * rw[p];
      du[p] = -divv[p] / chart->sqrt_det(p);
    }
    if (damp && params.filter > 0.0) {
      // Sixth-difference damping at rate filter / filter_time.
      const double rate = 1.0 / filter_time;
      for (std::size_t d = 0; d < n; ++d) {
        kernels::filter(*chart, uu, d, 0.0, params.filter, dflux, exec);
        for (std::size_t p = 0; p < size; ++p) du[p] += rate * (dflux[p] - uu[p]);
        kernels::filter(*chart, ss, d, seams[d], params.filter, dflux, exec);
        for (std::size_t p = 0; p < size; ++p) ds[p] += rate * (dflux[p] - ss[p]);
      }
    }
  }

  // Open ends: the first/last `edge` points of every line are replaced by the
  // least-squares quadratic through the next `window` interior points.
  static constexpr std::size_t edge = 4, window = 12;
  std::vector<std::array<double, window>> extrap;  // weights per edge point

  void init_extrapolation() {
    // Quadratic least squares on t = 0..window-1, evaluated at t = -(edge - j).
    double m[3][3] = {}, inv[3][3];
    for (std::size_t k = 0; k < window; ++k) {
      const double t = static_cast<double>(k);
      const double b[3] = {1.0, t, t * t};
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m[r][c] += b[r] * b[c];
    }
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        const int r1 = (c + 1) % 3, r2 = (c + 2) % 3, c1 = (r + 1) % 3, c2 = (r + 2) % 3;
        inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
      }
    extrap.assign(edge, {});
    for (std::size_t j = 0; j < edge; ++j) {
      const double te = -static_cast<double>(edge - j);
      const double be[3] = {1.0, te, te * te};
      for (std::size_t k = 0; k < window; ++k) {
        const double t = static_cast<double>(k);
        const double b[3] = {1.0, t, t * t};
        double w = 0.0;
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) w += be[r] * inv[r][c] * b[c];
        extrap[j][k] = w;
      }
    }
  }

  void extrapolate_open_ends(std::vector<double>& f) const {
    for (std::size_t d = 0; d < n; ++d) {
      const Axis& ax = chart->axis(d);
      if (ax.boundary != Boundary::open) continue;
      const std::size_t stride = chart->stride(d), cnt = ax.count;
      for (std::size_t p = 0; p < size; ++p) {
        if ((p / stride) % cnt != 0) continue;  // line start
        for (std::size_t j = 0; j < edge; ++j) {
          double lo = 0.0, hi = 0.0;
          for (std::size_t k = 0; k < window; ++k) {
            lo += extrap[j][k] * f[p + (edge + k) * stride];
            hi += extrap[j][k] * f[p + (cnt - 1 - edge - k) * stride];
          }
          f[p + j * stride] = lo;
          f[p + (cnt - 1 - j) * stride] = hi;
        }
      }
    }
  }

  void rk4(double dt) {
    const bool refresh = steps % static_cast<std::size_t>(params.curvature_refresh) == 0;
    rhs(u, S, t, refresh, k1u, k1s);
    for (std::size_t p = 0; p < size; ++p) {
      tu[p] = u[p] + 0.5 * dt * k1u[p];
      ts[p] = S[p] + 0.5 * dt * k1s[p];
    }
    extrapolate_open_ends(tu);
    extrapolate_open_ends(ts);
    rhs(tu, ts, t + 0.5 * dt, refresh, k2u, k2s);
    for (std::size_t p = 0; p < size; ++p) {
      tu[p] = u[p] + 0.5 * dt * k2u[p];
      ts[p] = S[p] + 0.5 * dt * k2s[p];
    }
    extrapolate_open_ends(tu);
    extrapolate_open_ends(ts);
    rhs(tu, ts, t + 0.5 * dt, refresh, k3u, k3s);
    for (std::size_t p = 0; p < size; ++p) {
      tu[p] = u[p] + dt * k3u[p];
      ts[p] = S[p] + dt * k3s[p];
    }
    extrapolate_open_ends(tu);
    extrapolate_open_ends(ts);
    rhs(tu, ts, t + dt, refresh, k4u, k4s);
    for (std::size_t p = 0; p < size; ++p) {
      u[p] += dt / 6.0 * (k1u[p] + 2.0 * k2u[p] + 2.0 * k3u[p] + k4u[p]);
      S[p] += dt / 6.0 * (k1s[p] + 2.0 * k2s[p] + 2.0 * k3s[p] + k4s[p]);
    }
    extrapolate_open_ends(u);
    extrapolate_open_ends(S);
    t += dt;
    ++steps;
    for (std::size_t p = 0; p < size; ++p)
      if (!std::isfinite(u[p]) || !std::isfinite(S[p])) {
        std::ostringstream os;
        os << "coupled solver: non-finite state at t = " << t << " (step " << steps
           << "); refine the grid or shrink the box so the density tails stay resolved";
        throw InvariantViolation(os.str());
      }
  }
};

CqgStepper::CqgStepper(const CqgState& initial, ExternalFields fields, SolverParams params)
    : impl_(std::make_unique<Impl>()) {
  validate(initial);
  auto& m = *impl_;
  m.chart = initial.chart();
  check_params(*m.chart, params);
  m.n = m.chart->dim();
  m.size = m.chart->size();
  for (std::size_t d = 0; d < m.n; ++d) kernels::require_stencil(m.chart->axis(d));
  m.xi = resolve_xi(params, m.n);
  m.kappa = weyl_ratio(m.n);
  m.hbar = params.units.hbar;
  m.mass = params.units.mass;
  if (std::abs(initial.hbar - m.hbar) > 1e-15 * m.hbar)
    throw PreconditionError("solver: state hbar differs from solver units");
  m.fields = std::move(fields);
  m.params = params;
  m.winding = initial.winding;
  m.seams = initial.seam_offsets();
  m.t = initial.time;
  m.weights = quadrature_weights(*m.chart);

  // Entry limiter: clip below the floor, renormalize, fail on large clipped mass.
  std::vector<double> rho = initial.rho.values;
  const double rmax = *std::max_element(rho.begin(), rho.end());
  if (!(rmax > 0.0)) throw DomainError("solver: density vanishes everywhere");
  const double floor = params.rho_floor_rel * rmax;
  double mass0 = 0.0, added = 0.0;
  std::size_t clipped = 0;
  for (std::size_t p = 0; p < m.size; ++p) {
    mass0 += m.weights[p] * rho[p];
    if (rho[p] < floor) {
      added += m.weights[p] * (floor - rho[p]);
      rho[p] = floor;
      ++clipped;
    }
  }
  if (clipped > 0) {
    if (added > params.max_clipped_mass * mass0) {
      std::ostringstream os;
      os << "limiter: clipping " << clipped << " point(s) adds mass " << added << " (limit "
         << params.max_clipped_mass * mass0 << ")";
      throw InvariantViolation(os.str());
    }
    const double scale = mass0 / (mass0 + added);
    for (double& r : rho) r *= scale;
    std::ostringstream os;
    os << "limiter: clipped " << clipped << " point(s) to the density floor, added mass " << added
       << ", renormalized";
    m.warnings.push_back(os.str());
  }
  m.u.resize(m.size);
  for (std::size_t p = 0; p < m.size; ++p) m.u[p] = std::log(rho[p]);
  {
    const auto [lo, hi] = std::minmax_element(m.u.begin(), m.u.end());
    if (*hi - *lo > deep_tail) {
      std::ostringstream os;
      os << "density spans " << (*hi - *lo) / std::log(10.0)
         << " decades; tails deeper than about 20 decades tend to go unstable (shrink the box)";
      m.warnings.push_back(os.str());
    }
  }
  m.S = initial.action.values;

  m.riemann = riemann_scalar(m.chart, params.exec).values;
  m.static_fields = sample_fields(m.fields, m.chart, m.t);
  m.rw.assign(m.size, 0.0);
  m.gu.assign(m.n, chart_scratch(*m.chart));
  m.gs = m.flux_v = m.flux_u = m.gu;
  m.ones.assign(m.size, 1.0);
  m.init_extrapolation();
  const double hmin = m.chart->min_spacing();
  m.filter_time = params.filter_time ? *params.filter_time : 0.45 * hmin * hmin * m.mass / m.hbar;
  if (!(m.filter_time > 0.0)) m.filter_time = params.dt;
  m.wall.resize(m.n);
  for (std::size_t d = 0; d < m.n; ++d) {
    const Axis& ax = m.chart->axis(d);
    m.wall[d] = ax.boundary == Boundary::reflecting;
    if (ax.boundary == Boundary::open && ax.count < Impl::edge + Impl::window + 8)
      throw StencilError("open axis '" + ax.name + "' is too short for the coupled solver (needs " +
                         std::to_string(Impl::edge + Impl::window + 8) + " points)");
  }
  for (auto* v : {&m.dflux, &m.divv, &m.lapu, &m.k1u, &m.k1s, &m.k2u, &m.k2s, &m.k3u, &m.k3s, &m.k4u, &m.k4s,
                  &m.tu, &m.ts})
    v->assign(m.size, 0.0);
}

CqgStepper::~CqgStepper() = default;
CqgStepper::CqgStepper(CqgStepper&&) noexcept = default;
CqgStepper& CqgStepper::operator=(CqgStepper&&) noexcept = default;

void CqgStepper::step() { impl_->rk4(impl_->params.dt); }

void CqgStepper::advance_to(double t) {
  auto& m = *impl_;
  while (m.t < t) {
    const double remaining = t - m.t;
    if (remaining <= 1e-12 * std::max(1.0, std::abs(t))) break;
    m.rk4(std::min(m.params.dt, remaining));
  }
}

double CqgStepper::time() const { return impl_->t; }
std::size_t CqgStepper::steps_taken() const { return impl_->steps; }
const std::vector<double>& CqgStepper::log_density() const { return impl_->u; }
const std::vector<std::string>& CqgStepper::warnings() const { return impl_->warnings; }

CqgState CqgStepper::state() const {
  const auto& m = *impl_;
  ScalarField rho(m.chart);
  for (std::size_t p = 0; p < m.size; ++p) rho.values[p] = std::exp(m.u[p]);
  return CqgState{std::move(rho), ScalarField(m.chart, m.S), m.t, m.hbar, m.winding};
}

Observables CqgStepper::observe() const {
  auto& m = *impl_;
  std::vector<double> rho(m.size);
  for (std::size_t p = 0; p < m.size; ++p) rho[p] = std::exp(m.u[p]);
  Observables o = moments(*m.chart, m.weights, rho);
  o.t = m.t;
  // Evaluate H = -dS/dt with a fresh curvature, leaving the cached one intact.
  const auto saved = m.rw;
  std::vector<double> du(m.size), ds(m.size);
  m.rhs(m.u, m.S, m.t, true, du, ds, false);
  m.rw = saved;
  double e = 0.0;
  for (std::size_t p = 0; p < m.size; ++p) e += m.weights[p] * rho[p] * -ds[p];
  o.energy = e / o.norm;
  return o;
}

CqgState step_cqg(const CqgState& state, const ExternalFields& fields, const SolverParams& params) {
  CqgStepper s(state, fields, params);
  s.step();
  return s.state();
}

// ---------------------------------------------------------------------------
// Linear reference solver

struct ReferenceStepper::Impl {
  ChartPtr chart;
  std::size_t n = 0, size = 0;
  ExternalFields fields;
  SolverParams params;
  double hbar = 1.0, mass = 1.0, xi = 0.0;
  WaveField w;
  std::size_t steps = 0;
  std::vector<double> curvature_potential;  // (xi hbar^2 / m) R_g
  SampledFields static_fields;
  std::vector<double> weights;
  std::unique_ptr<SpectralOps> spectral;

  std::vector<double> re, im, dre, dim, fre, fim;
  std::vector<std::vector<cplx>> dpsi;
  std::vector<cplx> k1, k2, k3, k4, tmp, buf, lap;

  // -(hbar^2) LB(psi) by the grid stencil.
  void lb_fd(const std::vector<cplx>& psi, std::vector<cplx>& out) {
    for (std::size_t p = 0; p < size; ++p) {
      re[p] = psi[p].real();
      im[p] = psi[p].imag();
    }
    std::vector<std::vector<double>> gr(n, std::vector<double>(size)), gim(n, std::vector<double>(size));
    for (std::size_t d = 0; d < n; ++d) {
      kernels::derivative(*chart, re, d, 0.0, gr[d], params.exec, kernels::Closure::vanishing);
      kernels::derivative(*chart, im, d, 0.0, gim[d], params.exec, kernels::Closure::vanishing);
    }
    std::fill(out.begin(), out.end(), cplx{});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < size; ++p) {
        const auto gi = chart->inverse_metric(p);
        double a = 0.0, b = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          a += gi[i * n + j] * gr[j][p];
          b += gi[i * n + j] * gim[j][p];
        }
        fre[p] = chart->sqrt_det(p) * a;
        fim[p] = chart->sqrt_det(p) * b;
      }
      kernels::derivative(*chart, fre, i, 0.0, dre, params.exec, kernels::Closure::vanishing);
      kernels::derivative(*chart, fim, i, 0.0, dim, params.exec, kernels::Closure::vanishing);
      for (std::size_t p = 0; p < size; ++p) out[p] += cplx{dre[p], dim[p]};
    }
    for (std::size_t p = 0; p < size; ++p) out[p] /= chart->sqrt_det(p);
  }

  void first_derivative(const std::vector<cplx>& f, std::size_t d, std::vector<cplx>& out) {
    if (spectral) {
      spectral->derivative(f, d, out);
      return;
    }
    for (std::size_t p = 0; p < size; ++p) {
      re[p] = f[p].real();
      im[p] = f[p].imag();
    }
    kernels::derivative(*chart, re, d, 0.0, dre, params.exec, kernels::Closure::vanishing);
    kernels::derivative(*chart, im, d, 0.0, dim, params.exec, kernels::Closure::vanishing);
    for (std::size_t p = 0; p < size; ++p) out[p] = {dre[p], dim[p]};
  }

  void apply_h(const std::vector<cplx>& psi, double time, std::vector<cplx>& out) {
    SampledFields dyn;
    const SampledFields* f = &static_fields;
    if (fields.time_dependent) {
      dyn = sample_fields(fields, chart, time);
      f = &dyn;
    }
    if (spectral)
      spectral->laplacian(psi, lap);
    else
      lb_fd(psi, lap);
    const double inv2m = 1.0 / (2.0 * mass);
    for (std::size_t p = 0; p < size; ++p)
      out[p] = -hbar * hbar * inv2m * lap[p] + (f->potential.values[p] + curvature_potential[p]) * psi[p];
    if (f->vector_potential.empty()) return;
    // (1/2m)[ i hbar (div(A psi) + A^i d_i psi) + A_i A^i psi ],  A^i = g^ij a_j
    const cplx ih{0.0, hbar};
    std::vector<double> aup(n);
    for (std::size_t i = 0; i < n; ++i) first_derivative(psi, i, dpsi[i]);
    std::vector<cplx> div(size, cplx{});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < size; ++p) {
        const auto gi = chart->inverse_metric(p);
        double ai = 0.0;
        for (std::size_t j = 0; j < n; ++j) ai += gi[i * n + j] * f->vector_potential[j].values[p];
        buf[p] = chart->sqrt_det(p) * ai * psi[p];
      }
      first_derivative(buf, i, tmp);
      for (std::size_t p = 0; p < size; ++p) div[p] += tmp[p];
    }
    for (std::size_t p = 0; p < size; ++p) {
      const auto gi = chart->inverse_metric(p);
      cplx adv{};
      double a2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double ai = 0.0;
        for (std::size_t j = 0; j < n; ++j) ai += gi[i * n + j] * f->vector_potential[j].values[p];
        adv += ai * dpsi[i][p];
        a2 += ai * f->vector_potential[i].values[p];
      }
      out[p] += inv2m * (ih * (div[p] / chart->sqrt_det(p) + adv) + a2 * psi[p]);
    }
  }

  void rk4(double dt) {
    const cplx c{0.0, -1.0 / hbar};
    auto& psi = w.psi.values;
    const double t = w.time;
    apply_h(psi, t, k1);
    for (std::size_t p = 0; p < size; ++p) {
      k1[p] *= c;
      tmp[p] = psi[p] + 0.5 * dt * k1[p];
    }
    apply_h(tmp, t + 0.5 * dt, k2);
    for (std::size_t p = 0; p < size; ++p) {
      k2[p] *= c;
      tmp[p] = psi[p] + 0.5 * dt * k2[p];
    }
    apply_h(tmp, t + 0.5 * dt, k3);
    for (std::size_t p = 0; p < size; ++p) {
      k3[p] *= c;
      tmp[p] = psi[p] + dt * k3[p];
    }
    apply_h(tmp, t + dt, k4);
    for (std::size_t p = 0; p < size; ++p) {
      k4[p] *= c;
      psi[p] += dt / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
    }
    w.time = t + dt;
    ++steps;
  }
};

ReferenceStepper::ReferenceStepper(const WaveField& initial, ExternalFields fields, SolverParams params)
    : impl_(std::make_unique<Impl>()) {
  auto& m = *impl_;
  m.chart = initial.psi.chart;
  if (!m.chart) throw PreconditionError("reference solver: wave field has no chart");
  check_params(*m.chart, params);
  m.n = m.chart->dim();
  m.size = m.chart->size();
  m.fields = std::move(fields);
  m.params = params;
  m.hbar = params.units.hbar;
  m.mass = params.units.mass;
  m.xi = resolve_xi(params, m.n);
  m.w = initial;
  m.weights = quadrature_weights(*m.chart);
  if (params.kinetic == Kinetic::spectral) {
    m.spectral = std::make_unique<SpectralOps>(*m.chart);
  } else {
    for (std::size_t d = 0; d < m.n; ++d) kernels::require_stencil(m.chart->axis(d));
  }
  const auto rg = riemann_scalar(m.chart, params.exec);
  m.curvature_potential.resize(m.size);
  for (std::size_t p = 0; p < m.size; ++p) m.curvature_potential[p] = m.xi * m.hbar * m.hbar / m.mass * rg.values[p];
  m.static_fields = sample_fields(m.fields, m.chart, initial.time);
  for (auto* v : {&m.re, &m.im, &m.dre, &m.dim, &m.fre, &m.fim}) v->assign(m.size, 0.0);
  for (auto* v : {&m.k1, &m.k2, &m.k3, &m.k4, &m.tmp, &m.buf, &m.lap}) v->assign(m.size, cplx{});
  m.dpsi.assign(m.n, std::vector<cplx>(m.size));
}

ReferenceStepper::~ReferenceStepper() = default;
ReferenceStepper::ReferenceStepper(ReferenceStepper&&) noexcept = default;
ReferenceStepper& ReferenceStepper::operator=(ReferenceStepper&&) noexcept = default;

void ReferenceStepper::step() { impl_->rk4(impl_->params.dt); }

void ReferenceStepper::advance_to(double t) {
  auto& m = *impl_;
  while (m.w.time < t) {
    const double remaining = t - m.w.time;
    if (remaining <= 1e-12 * std::max(1.0, std::abs(t))) break;
    m.rk4(std::min(m.params.dt, remaining));
  }
}

double ReferenceStepper::time() const { return impl_->w.time; }
std::size_t ReferenceStepper::steps_taken() const { return impl_->steps; }
const WaveField& ReferenceStepper::state() const { return impl_->w; }

Observables ReferenceStepper::observe() const {
  auto& m = *impl_;
  const auto& psi = m.w.psi.values;
  std::vector<double> rho(m.size);
  for (std::size_t p = 0; p < m.size; ++p) rho[p] = std::norm(psi[p]);
  Observables o = moments(*m.chart, m.weights, rho);
  o.t = m.w.time;
  std::vector<cplx> hpsi(m.size);
  m.apply_h(psi, m.w.time, hpsi);
  double e = 0.0;
  for (std::size_t p = 0; p < m.size; ++p) e += m.weights[p] * (std::conj(psi[p]) * hpsi[p]).real();
  o.energy = e / o.norm;
  return o;
}

WaveField step_reference(const WaveField& w, const ExternalFields& fields, const SolverParams& params) {
  ReferenceStepper s(w, fields, params);
  s.step();
  return s.state();
}

// ---------------------------------------------------------------------------

double interpolate(const ScalarField& f, std::span<const double> q) {
  return interpolate_grid(*f.chart, q, [&](std::size_t p) { return f.values[p]; });
}

LagrangianContext make_lagrangian_context(const CqgState& state, const ExternalFields& fields, double xi,
                                          double mass, double rho_floor_rel) {
  validate(state);
  return LagrangianContext{state.chart(), weyl_curvature(state.rho, {rho_floor_rel, Exec::parallel}),
                           sample_fields(fields, state.chart(), state.time), xi, mass, state.hbar};
}

double lagrangian(const LagrangianContext& ctx, std::span<const double> q, std::span<const double> qdot) {
  const auto& chart = *ctx.chart;
  const std::size_t n = chart.dim(), nn = n * n;
  if (q.size() != n || qdot.size() != n) throw PreconditionError("lagrangian: q and qdot need one entry per axis");
  std::vector<double> g(nn);
  if (chart.has_analytic_metric()) {
    chart.metric_at(q, g);
  } else {
    const auto& samples = chart.metric_samples();
    for (std::size_t c = 0; c < nn; ++c)
      g[c] = interpolate_grid(chart, q, [&](std::size_t p) { return samples[p * nn + c]; });
  }
  double kin = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) kin += g[i * n + j] * qdot[i] * qdot[j];
  double coupling = 0.0;
  for (std::size_t i = 0; i < ctx.fields.vector_potential.size(); ++i)
    coupling += interpolate(ctx.fields.vector_potential[i], q) * qdot[i];
  const double rw = interpolate(ctx.weyl_curvature, q);
  const double v = interpolate(ctx.fields.potential, q);
  return 0.5 * ctx.mass * kin + coupling - ctx.xi * ctx.hbar * ctx.hbar / ctx.mass * rw - v;
}

// ---------------------------------------------------------------------------

namespace {
// Like std::max, but a NaN in either argument is kept.
double nan_max(double a, double b) { return std::isnan(a) || std::isnan(b) ? std::nan("") : std::max(a, b); }
}  // namespace

EquivalenceReport equivalence_report(const CqgState& initial, const ExternalFields& fields,
                                     const SolverParams& params, double t_end, const EquivalenceOptions& opts) {
  EquivalenceReport rep;
  const std::size_t nsteps = step_count(t_end, params.dt);
  SolverParams p = params;
  if (nsteps > 0) p.dt = t_end / static_cast<double>(nsteps);
  rep.steps = nsteps;
  rep.dt = p.dt;

  CqgStepper cqg(initial, fields, p);
  ReferenceStepper ref(to_wavefunction(initial), fields, p);
  const ChartPtr& chart = initial.chart();
  const std::size_t size = chart->size();
  const auto w = quadrature_weights(*chart);
  const double hbar = p.units.hbar;
  const double norm0 = norm(initial);

  auto compare = [&]() {
    const CqgState a = cqg.state();
    const WaveField& b = ref.state();
    EquivalenceSample s;
    s.t = a.time;
    double num = 0.0, den = 0.0, dmax = 0.0, rmax = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t q = 0; q < size; ++q) {
      const double ra = a.rho.values[q], rb = std::norm(b.psi.values[q]);
      num += w[q] * (ra - rb) * (ra - rb);
      den += w[q] * ra * ra;
      dmax = nan_max(dmax, std::abs(ra - rb));
      rmax = nan_max(rmax, ra);
      na += w[q] * ra;
      nb += w[q] * rb;
    }
    s.density_l2 = std::sqrt(num / den);
    s.density_max = dmax / rmax;
    rep.norm_drift_cqg = nan_max(rep.norm_drift_cqg, std::abs(na - norm0) / norm0);
    rep.norm_drift_reference = nan_max(rep.norm_drift_reference, std::abs(nb - norm0) / norm0);
    if (rep.phase_compared) {
      std::vector<char> region(size, 0);
      std::size_t first = size;
      for (std::size_t q = 0; q < size; ++q)
        if (a.rho.values[q] >= opts.phase_region_rel * rmax) {
          region[q] = 1;
          if (first == size) first = q;
        }
      try {
        UnwrapOptions uo{opts.phase_region_rel * 1e-3, &region};
        const CqgState bs = from_wavefunction(b, hbar, uo);
        const double offset = a.action.values[first] - bs.action.values[first];
        // The two branches may differ by a constant multiple of 2 pi hbar
        // plus the shared global phase; remove it at the first region point.
        double m = 0.0;
        for (std::size_t q = 0; q < size; ++q)
          if (region[q]) m = nan_max(m, std::abs(a.action.values[q] - bs.action.values[q] - offset) / hbar);
        s.phase_max = m;
      } catch (const BranchAmbiguityError& e) {
        s.phase_ok = false;
        rep.phase_compared = false;
        rep.phase_error = e.what();
      }
    }
    rep.max_density_l2 = nan_max(rep.max_density_l2, s.density_l2);
    rep.max_density_max = nan_max(rep.max_density_max, s.density_max);
    if (s.phase_ok) rep.max_phase = nan_max(rep.max_phase, s.phase_max);
    rep.samples.push_back(s);
  };

  compare();
  const std::size_t every = std::max<std::size_t>(1, opts.sample_every);
  for (std::size_t k = 1; k <= nsteps; ++k) {
    cqg.step();
    ref.step();
    if (k % every == 0 || k == nsteps) compare();
  }
  rep.final_cqg = cqg.observe();
  rep.final_reference = ref.observe();
  return rep;
}

}  // namespace cqg
