#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cqg/error.hpp"
#include "cqg/qstate.hpp"

using namespace cqg;

namespace {

constexpr double pi = std::numbers::pi;

ChartPtr flat(std::size_t n, double lo, double hi, Boundary b) {
  return MetricChart::euclidean(
      {Axis{"x", lo, hi, n, b}, Axis{"y", 0, 1, 1, Boundary::periodic}, Axis{"z", 0, 1, 1, Boundary::periodic}});
}

}  // namespace

TEST_SUITE("qstate") {
  TEST_CASE("wave function round trip") {
    const auto c = flat(128, -6, 6, Boundary::open);
    const auto rho = ScalarField::sample(c, [](std::span<const double> q) { return std::exp(-q[0] * q[0]); });
    const auto S = ScalarField::sample(c, [](std::span<const double> q) { return 0.7 * q[0] + 0.1 * q[0] * q[0]; });
    const CqgState st = make_state(rho, S, 0.0, 1.0);
    const WaveField w = to_wavefunction(st);
    for (std::size_t i = 0; i < c->size(); ++i) CHECK(std::norm(w.psi[i]) == doctest::Approx(rho[i]));
    const CqgState back = from_wavefunction(w, 1.0, {0.0, nullptr});
    for (std::size_t i = 0; i < c->size(); ++i) {
      CHECK(back.rho[i] == doctest::Approx(rho[i]).epsilon(1e-12));
      // Unwrapped from the first point, so S is recovered up to a multiple of 2 pi.
      const double shift = back.action[0] - S[0];
      CHECK(std::abs(std::remainder(shift, 2 * pi)) < 1e-9);
      CHECK(back.action[i] - shift == doctest::Approx(S[i]).epsilon(1e-9));
    }
  }

  TEST_CASE("negative or non-finite density is rejected") {
    const auto c = flat(16, 0, 1, Boundary::open);
    ScalarField rho(c, 1.0), S(c, 0.0);
    rho[3] = -1e-3;
    CHECK_THROWS_AS(make_state(rho, S), DomainError);
    rho[3] = std::nan("");
    CHECK_THROWS(make_state(rho, S));
  }

  TEST_CASE("a node makes the phase ambiguous") {
    // 65 points on [-1, 1] put a grid point on the zero of psi = x.
    const auto c = flat(65, -1, 1, Boundary::open);
    const auto psi = ComplexField::sample(c, [](std::span<const double> q) { return cplx(q[0], 0.0); });
    try {
      (void)from_wavefunction(WaveField{psi, 0.0}, 1.0, {1e-12, nullptr});
      FAIL("expected BranchAmbiguityError");
    } catch (const BranchAmbiguityError& e) {
      REQUIRE(e.nodal_points().size() == 1);
      CHECK(e.nodal_points()[0] == 32);
    }
  }

  TEST_CASE("norm of a normalized Gaussian") {
    const auto c = flat(256, -8, 8, Boundary::open);
    const auto rho = ScalarField::sample(
        c, [](std::span<const double> q) { return std::exp(-q[0] * q[0] / 2.0) / std::sqrt(2 * pi); });
    CHECK(norm(make_state(rho, ScalarField(c, 0.0))) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("loop integral counts windings on a periodic axis") {
    const std::size_t n = 32;
    const auto c = MetricChart::euclidean({Axis{"x", 0, 2 * pi, n, Boundary::periodic},
                                           Axis{"y", 0, 1, 8, Boundary::open}, Axis{"z", 0, 1, 1, Boundary::periodic}});
    for (int k : {-2, 1, 3}) {
      const auto S = ScalarField::sample(c, [&](std::span<const double> q) { return k * q[0]; });
      const CqgState st = make_state(ScalarField(c, 1.0), S, 0.0, 1.0, {static_cast<double>(k), 0.0, 0.0});
      std::vector<GridIndex> loop;
      for (std::size_t i = 0; i <= n; ++i) loop.push_back({i % n, 3, 0});
      CHECK(loop_integral(st, loop) == doctest::Approx(2 * pi * k).epsilon(1e-12));
      // A contractible loop encloses nothing.
      std::vector<GridIndex> square{{2, 1, 0}, {3, 1, 0}, {3, 2, 0}, {2, 2, 0}, {2, 1, 0}};
      CHECK(std::abs(loop_integral(st, square)) < 1e-12);
    }
  }

  TEST_CASE("loop integral validates the path") {
    const auto c = flat(16, 0, 1, Boundary::open);
    const CqgState st = make_state(ScalarField(c, 1.0), ScalarField(c, 0.0));
    std::vector<GridIndex> open_path{{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(loop_integral(st, open_path), PreconditionError);
    std::vector<GridIndex> jump{{0, 0, 0}, {2, 0, 0}, {0, 0, 0}};
    CHECK_THROWS_AS(loop_integral(st, jump), PreconditionError);
  }
}
