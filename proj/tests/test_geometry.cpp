#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cqg/error.hpp"
#include "cqg/geometry.hpp"
#include "cqg/io.hpp"
#include "cqg/permutation.hpp"
#include "cqg/stencil.hpp"

using namespace cqg;

namespace {

constexpr double pi = std::numbers::pi;

ChartPtr line(std::size_t n, double lo, double hi, Boundary b) {
  ChartSpec s;
  s.axes = {Axis{"x", lo, hi, n, b}};
  return build_chart(s);
}

ChartPtr sphere(double r, std::size_t nt, std::size_t np) {
  ChartSpec s;
  s.kind = "sphere";
  s.radius = r;
  s.pad = false;
  s.axes = {Axis{"theta", 0.4, pi - 0.4, nt, Boundary::open}, Axis{"phi", 0.0, 2.0 * pi, np, Boundary::periodic}};
  return build_chart(s);
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("flat charts have exactly vanishing connection and curvature") {
    const auto c = MetricChart::euclidean({Axis{"x", -1, 1, 9, Boundary::open}, Axis{"y", -1, 1, 9, Boundary::open},
                                           Axis{"z", 0, 1, 8, Boundary::periodic}});
    const std::size_t p[3] = {4, 2, 5};
    const auto g = christoffel(*c, p);
    for (double v : g.data) CHECK(v == 0.0);
    const auto R = riemann_scalar(c);
    for (double v : R.values) CHECK(v == 0.0);
  }

  TEST_CASE("sphere Christoffel symbols match the closed form") {
    const auto c = sphere(1.5, 33, 16);
    for (std::size_t i : {3u, 16u, 29u}) {
      const std::size_t p[2] = {i, 5};
      const double th = c->coords(c->ravel(p))[0];
      const auto G = christoffel(*c, p);
      CHECK(G(0, 1, 1) == doctest::Approx(-std::sin(th) * std::cos(th)).epsilon(1e-7));
      CHECK(G(1, 0, 1) == doctest::Approx(std::cos(th) / std::sin(th)).epsilon(1e-7));
      CHECK(G(1, 1, 0) == doctest::Approx(G(1, 0, 1)));
      CHECK(std::abs(G(0, 0, 0)) < 1e-12);
      CHECK(std::abs(G(1, 1, 1)) < 1e-12);
    }
  }

  TEST_CASE("scalar curvature of a round sphere is 2/r^2") {
    for (double r : {0.5, 1.0, 3.0}) {
      const auto R = riemann_scalar(sphere(r, 48, 24));
      for (double v : R.values) CHECK(v == doctest::Approx(2.0 / (r * r)).epsilon(1e-6));
    }
  }

  TEST_CASE("padding adds flat axes and keeps the curvature") {
    ChartSpec s;
    s.kind = "sphere";
    s.axes = {Axis{"theta", 0.5, 2.5, 40, Boundary::open}, Axis{"phi", 0.0, 2.0 * pi, 16, Boundary::periodic}};
    const auto c = build_chart(s);
    REQUIRE(c->dim() == 3);
    CHECK(c->axis(2).count == 1);
    const auto R = riemann_scalar(c);
    for (double v : R.values) CHECK(v == doctest::Approx(2.0).epsilon(1e-6));
  }

  TEST_CASE("polar chart is flat") {
    ChartSpec s;
    s.kind = "polar";
    s.axes = {Axis{"r", 1.0, 3.0, 40, Boundary::open}, Axis{"theta", 0.0, 2.0 * pi, 32, Boundary::periodic}};
    const auto R = riemann_scalar(build_chart(s));
    for (double v : R.values) CHECK(std::abs(v) < 1e-6);
  }

  TEST_CASE("sampled metric agrees with the analytic chart") {
    const auto a = sphere(1.0, 40, 16);
    ChartSpec s;
    s.kind = "sampled";
    s.pad = false;
    s.axes = a->axes();
    s.metric = a->metric_samples();
    const auto b = build_chart(s);
    const auto Ra = riemann_scalar(a), Rb = riemann_scalar(b);
    // Interior points: the sampled chart differentiates with the grid stencil.
    for (std::size_t i = 6; i < 34; ++i) {
      const std::size_t p[2] = {i, 3};
      CHECK(Rb[b->ravel(p)] == doctest::Approx(Ra[a->ravel(p)]).epsilon(1e-4));
    }
  }

  TEST_CASE("indefinite metric is rejected") {
    ChartSpec s;
    s.kind = "sampled";
    s.pad = false;
    s.axes = {Axis{"x", 0, 1, 2, Boundary::open}};
    s.metric = {1.0, -1.0};
    CHECK_THROWS_AS(build_chart(s), DefinitenessError);
  }

  TEST_CASE("Laplace-Beltrami of spherical harmonics") {
    // Y = cos(theta) is an eigenfunction with eigenvalue -2/r^2.
    const double r = 2.0;
    const auto c = sphere(r, 64, 16);
    const auto f = ScalarField::sample(c, [](std::span<const double> q) { return std::cos(q[0]); });
    const auto lb = laplace_beltrami(f);
    for (std::size_t i = 0; i < c->size(); ++i) CHECK(lb[i] == doctest::Approx(-2.0 / (r * r) * f[i]).epsilon(1e-5));
  }

  TEST_CASE("Weyl vector is -(1/(n-2)) grad ln rho") {
    const auto c = line(64, -3, 3, Boundary::open);
    const auto rho = ScalarField::sample(c, [](std::span<const double> q) { return std::exp(-q[0] * q[0]); });
    const auto w = weyl_vector(rho);
    for (std::size_t i = 0; i < c->size(); ++i) {
      const double x = c->coords(i)[0];
      CHECK(w.components[0][i] == doctest::Approx(2.0 * x).epsilon(1e-8));
      CHECK(w.components[1][i] == 0.0);
    }
  }

  TEST_CASE("coupling constant and ratio") {
    CHECK(default_xi(3) == doctest::Approx(1.0 / 16.0));
    CHECK(default_xi(4) == doctest::Approx(2.0 / 24.0));
    CHECK(weyl_ratio(3) == doctest::Approx(2.0));
    CHECK_THROWS_AS(weyl_ratio(2), PreconditionError);
  }

  TEST_CASE("curvature term equals the Bohm potential on flat charts") {
    // Oracle: for rho = e^f, -(1/2) Laplacian(sqrt rho)/sqrt rho = -(f''/2 + f'^2/4)/2.
    const auto c = line(256, 0.0, 2.0 * pi, Boundary::periodic);
    std::uint64_t rng = 11;
    for (int sample = 0; sample < 5; ++sample) {
      double A[3], k[3], ph[3];
      for (int m = 0; m < 3; ++m) {
        A[m] = 0.1 + 0.4 * uniform01(rng);
        k[m] = 1.0 + static_cast<double>(uniform_below(rng, 2));
        ph[m] = 2.0 * pi * uniform01(rng);
      }
      auto fd = [&](double x, int order) {
        double v = 0.0;
        for (int m = 0; m < 3; ++m) {
          const double a = k[m] * x + ph[m];
          v += order == 0 ? A[m] * std::sin(a)
               : order == 1 ? A[m] * k[m] * std::cos(a)
                            : -A[m] * k[m] * k[m] * std::sin(a);
        }
        return v;
      };
      const auto rho = ScalarField::sample(c, [&](std::span<const double> q) { return std::exp(fd(q[0], 0)); });
      const auto R = weyl_curvature(rho);
      double err = 0.0, big = 0.0;
      for (std::size_t i = 0; i < c->size(); ++i) {
        const double x = c->coords(i)[0];
        const double bohm = -0.5 * (0.5 * fd(x, 2) + 0.25 * fd(x, 1) * fd(x, 1));
        big = std::max(big, std::abs(bohm));
        err = std::max(err, std::abs(default_xi(3) * R[i] - bohm));
      }
      CHECK(err / big < 1e-6);
    }
  }

  TEST_CASE("log form of the Weyl curvature matches the rho form") {
    // R_W = R_g + ratio (|grad rho|^2/rho^2 - 2 LB(rho)/rho), evaluated directly.
    ChartSpec s;
    s.kind = "sphere";
    s.axes = {Axis{"theta", 0.4, pi - 0.4, 48, Boundary::open}, Axis{"phi", 0.0, 2.0 * pi, 64, Boundary::periodic}};
    const auto c3 = build_chart(s);
    const auto rho3 = ScalarField::sample(
        c3, [](std::span<const double> q) { return 1.5 + std::cos(q[0]) + 0.3 * std::sin(q[1]) * std::sin(q[0]); });
    const auto rw3 = weyl_curvature(rho3);
    const auto Rg3 = riemann_scalar(c3);
    const auto grad3 = gradient(rho3);
    const auto lb3 = laplace_beltrami(rho3);
    for (std::size_t i = 0; i < c3->size(); ++i) {
      const std::size_t ix = i / 64;
      if (ix < 4 || ix > 43) continue;  // one-sided closures near open ends
      const auto gi = c3->inverse_metric(i);
      double g2 = 0.0;
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) g2 += gi[a * 3 + b] * grad3[a][i] * grad3[b][i];
      const double r = rho3[i];
      const double direct = Rg3[i] + weyl_ratio(3) * (g2 / (r * r) - 2.0 * lb3[i] / r);
      CHECK(rw3[i] == doctest::Approx(direct).epsilon(1e-4));
    }
  }

  TEST_CASE("serial and OpenMP kernels agree bitwise") {
    const auto c = MetricChart::euclidean(
        {Axis{"x", -2, 2, 40, Boundary::open}, Axis{"y", 0, 1, 24, Boundary::periodic}, Axis{"z", -1, 1, 12, Boundary::reflecting}});
    const auto f = ScalarField::sample(
        c, [](std::span<const double> q) { return std::exp(-q[0] * q[0]) * (2.0 + std::sin(2 * pi * q[1])) + q[2] * q[2]; });
    for (std::size_t axis = 0; axis < 3; ++axis) {
      std::vector<double> a(c->size()), b(c->size());
      kernels::derivative(*c, f.values, axis, 0.0, a, Exec::parallel);
      kernels::reference::derivative(*c, f.values, axis, 0.0, b);
      CHECK(a == b);
      kernels::filter(*c, f.values, axis, 0.0, 1.0 / 64.0, a, Exec::parallel);
      kernels::reference::filter(*c, f.values, axis, 0.0, 1.0 / 64.0, b);
      CHECK(a == b);
    }
    CHECK(laplace_beltrami(f, {}, Exec::serial).values == laplace_beltrami(f, {}, Exec::parallel).values);
    CHECK(weyl_curvature(f, {1e-12, Exec::serial}).values == weyl_curvature(f, {1e-12, Exec::parallel}).values);
  }

  TEST_CASE("short axes raise StencilError") {
    const auto c = MetricChart::euclidean({Axis{"x", 0, 1, 3, Boundary::open}});
    const ScalarField f(c, 1.0);
    CHECK_THROWS_AS(gradient(f), StencilError);
  }
}
