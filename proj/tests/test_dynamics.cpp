#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cqg/dynamics.hpp"
#include "cqg/error.hpp"
#include "cqg/geometry.hpp"

using namespace cqg;

namespace {

constexpr double pi = std::numbers::pi;

ChartPtr flat(std::size_t n, double lo, double hi, Boundary b = Boundary::open) {
  return MetricChart::euclidean(
      {Axis{"x", lo, hi, n, b}, Axis{"y", 0, 1, 1, Boundary::periodic}, Axis{"z", 0, 1, 1, Boundary::periodic}});
}

CqgState gaussian(const ChartPtr& c, double x0, double sigma, double p0 = 0.0) {
  const auto rho = ScalarField::sample(c, [&](std::span<const double> q) {
    return std::exp(-(q[0] - x0) * (q[0] - x0) / (2 * sigma * sigma)) / std::sqrt(2 * pi * sigma * sigma);
  });
  const auto S = ScalarField::sample(c, [&](std::span<const double> q) { return p0 * (q[0] - x0); });
  return make_state(rho, S);
}

SolverParams params_for(const MetricChart& c, double t_end) {
  SolverParams p;
  const double h = c.min_spacing();
  p.dt = 0.45 * h * h;
  p.t_end = t_end;
  return p;
}

ExternalFields harmonic(double offset = 0.0) {
  ExternalFields f;
  f.potential = [offset](std::span<const double> q, double) { return offset + 0.5 * q[0] * q[0]; };
  return f;
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("free Gaussian spreads by the analytic law") {
    const auto c = flat(256, -6, 6);
    const double s0 = 0.5;
    CqgStepper st(gaussian(c, 0.0, s0), {}, params_for(*c, 0.4));
    for (double t : {0.1, 0.2, 0.4}) {
      st.advance_to(t);
      const double exact = s0 * std::sqrt(1 + std::pow(t / (2 * s0 * s0), 2));
      CHECK(st.observe().width[0] == doctest::Approx(exact).epsilon(1e-4));
    }
    CHECK(st.time() == 0.4);
  }

  TEST_CASE("moving packet drifts at p/m") {
    const auto c = flat(256, -6, 6);
    CqgStepper st(gaussian(c, -1.0, 0.6, 1.5), {}, params_for(*c, 0.5));
    st.advance_to(0.5);
    CHECK(st.observe().mean[0] == doctest::Approx(-1.0 + 0.75).epsilon(1e-5));
  }

  TEST_CASE("oscillator ground state is stationary") {
    const auto c = flat(128, -5, 5);
    const auto init = gaussian(c, 0.0, std::sqrt(0.5));
    CqgStepper st(init, harmonic(), params_for(*c, 1.0));
    st.advance_to(1.0);
    const auto rho = st.state().rho;
    double d = 0.0, m = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      d = std::max(d, std::abs(rho[i] - init.rho[i]));
      m = std::max(m, init.rho[i]);
    }
    CHECK(d / m < 5e-5);
    CHECK(st.observe().energy == doctest::Approx(0.5).epsilon(1e-5));
  }

  TEST_CASE("a constant potential shift leaves the density trajectory unchanged") {
    const auto c = flat(128, -5, 5);
    const auto init = gaussian(c, 1.0, std::sqrt(0.5));
    const auto p = params_for(*c, 0.3);
    CqgStepper a(init, harmonic(0.0), p), b(init, harmonic(3.25), p);
    a.advance_to(0.3);
    b.advance_to(0.3);
    const auto ra = a.state(), rb = b.state();
    double d = 0.0;
    for (std::size_t i = 0; i < ra.rho.size(); ++i) d = std::max(d, std::abs(ra.rho[i] - rb.rho[i]));
    CHECK(d < 1e-12);
    // S picks up -offset * t (up to the phase reference).
    const std::size_t mid = c->size() / 2;
    CHECK(rb.action[mid] - ra.action[mid] == doctest::Approx(-3.25 * 0.3).epsilon(1e-9));
  }

  TEST_CASE("reference solver is unitary per step") {
    const auto c = flat(128, -5, 5);
    const auto w = to_wavefunction(gaussian(c, 1.0, std::sqrt(0.5)));
    for (Kinetic k : {Kinetic::laplace_beltrami, Kinetic::spectral}) {
      auto p = params_for(*c, 1.0);
      p.kinetic = k;
      ReferenceStepper st(w, harmonic(), p);
      double prev = st.observe().norm;
      for (int i = 0; i < 50; ++i) {
        st.step();
        const double now = st.observe().norm;
        CHECK(std::abs(now - prev) < 1e-9);
        prev = now;
      }
    }
  }

  TEST_CASE("time step above the stability limit raises CflError") {
    const auto c = flat(64, -5, 5);
    SolverParams p;
    p.dt = 1.0;
    try {
      CqgStepper st(gaussian(c, 0.0, 1.0), {}, p);
      FAIL("expected CflError");
    } catch (const CflError& e) {
      const double h = c->min_spacing();
      // A margin below the bound 0.5 h^2.
      CHECK(e.suggested_dt() == doctest::Approx(0.9 * 0.5 * h * h));
    }
    p.dt = -1.0;
    CHECK_THROWS_AS(check_params(*c, p), PreconditionError);
  }

  TEST_CASE("step count covers t_end") {
    CHECK(step_count(1.0, 0.25) == 4);
    CHECK(step_count(1.0, 0.3) == 4);
    CHECK(step_count(0.0, 0.3) == 0);
  }

  TEST_CASE("serial and OpenMP steppers agree bitwise") {
    const auto c = flat(96, -5, 5);
    const auto init = gaussian(c, 0.5, 0.8, 0.3);
    auto p = params_for(*c, 0.05);
    p.exec = Exec::serial;
    CqgStepper a(init, harmonic(), p);
    p.exec = Exec::parallel;
    CqgStepper b(init, harmonic(), p);
    a.advance_to(0.05);
    b.advance_to(0.05);
    CHECK(a.log_density() == b.log_density());
    CHECK(a.state().action.values == b.state().action.values);
  }

  TEST_CASE("Hamiltonian density of a plane wave") {
    const auto c = MetricChart::euclidean({Axis{"x", 0, 2 * pi, 32, Boundary::periodic},
                                           Axis{"y", 0, 1, 1, Boundary::periodic}, Axis{"z", 0, 1, 1, Boundary::periodic}});
    const auto S = ScalarField::sample(c, [](std::span<const double> q) { return 2.0 * q[0]; });
    const CqgState st = make_state(ScalarField(c, 1.0), S, 0.0, 1.0, {2.0, 0.0, 0.0});
    ExternalFields f;
    f.potential = [](std::span<const double>, double) { return 0.25; };
    const auto H = hamiltonian_density(st, f, default_xi(3));
    for (double v : H.values) CHECK(v == doctest::Approx(2.0 + 0.25).epsilon(1e-12));
  }

  TEST_CASE("Lagrangian of a free particle on a uniform density") {
    const auto c = flat(32, -1, 1);
    const CqgState st = make_state(ScalarField(c, 1.0), ScalarField(c, 0.0));
    const auto ctx = make_lagrangian_context(st, {}, default_xi(3), 2.0);
    const double q[3] = {0.1, 0.5, 0.5}, v[3] = {0.3, 0.0, 0.0};
    CHECK(lagrangian(ctx, q, v) == doctest::Approx(0.5 * 2.0 * 0.09));
  }

  TEST_CASE("multilinear interpolation reproduces linear fields") {
    const auto c = MetricChart::euclidean({Axis{"x", 0, 1, 11, Boundary::open}, Axis{"y", 0, 2, 5, Boundary::open}});
    const auto f = ScalarField::sample(c, [](std::span<const double> q) { return 1.0 + 2.0 * q[0] - 0.5 * q[1]; });
    const double q[2] = {0.333, 1.27};
    CHECK(interpolate(f, q) == doctest::Approx(1.0 + 0.666 - 0.635));
  }

  TEST_CASE("coupled and linear solvers agree on a short run") {
    const auto c = flat(128, -5, 5);
    auto p = params_for(*c, 0.5);
    p.kinetic = Kinetic::spectral;
    EquivalenceOptions o;
    o.sample_every = 50;
    const auto r = equivalence_report(gaussian(c, 1.0, std::sqrt(0.5)), harmonic(), p, 0.5, o);
    CHECK(r.max_density_l2 < 1e-4);
    CHECK(r.phase_compared);
    CHECK(r.max_phase < 1e-2);
    CHECK(r.norm_drift_cqg < 1e-6);
    CHECK(r.norm_drift_reference < 1e-8);
  }
}
