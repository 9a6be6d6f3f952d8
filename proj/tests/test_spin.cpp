#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "cqg/error.hpp"
#include "cqg/io.hpp"
#include "cqg/permutation.hpp"
#include "cqg/spin.hpp"

using namespace cqg;

namespace {

constexpr double pi = std::numbers::pi;

// dgamma/dt from the inverse top metric with momenta (p_alpha, p_beta, p_gamma) = (s_z, 0, hbar s).
double rate_from_metric(double sz, double beta, double s, double m = 1.0, double lambda = 1.0, double hbar = 1.0) {
  const auto g = top_metric(beta, m, lambda);
  const Eigen::Matrix3d G = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(g.data());
  return G.inverse().row(2).dot(Eigen::Vector3d(sz, 0.0, hbar * s));
}

}  // namespace

TEST_SUITE("spin") {
  TEST_CASE("quantization gate") {
    CHECK(validate_spin(0).two_s == 0);
    CHECK(validate_spin(1, 2).two_s == 1);
    CHECK(validate_spin(3, 2).str() == "3/2");
    CHECK(validate_spin(4, 2).str() == "2");
    CHECK(validate_spin(6, 4).str() == "3/2");
    CHECK_THROWS_AS(validate_spin(1, 3), QuantizationError);
    CHECK_THROWS_AS(validate_spin(1, 4), QuantizationError);
    CHECK_THROWS_AS(validate_spin(-1, 2), QuantizationError);
    CHECK_THROWS_AS(validate_spin(1, 0), PreconditionError);
    CHECK(validate_spin("0.5").str() == "1/2");
    CHECK(validate_spin("1.5").str() == "3/2");
    CHECK(validate_spin(" 5/2 ").str() == "5/2");
    CHECK_THROWS_AS(validate_spin("0.3"), QuantizationError);
    CHECK_THROWS_AS(validate_spin("abc"), ConfigError);
    // Sweep: accepted iff den divides 2 num and num >= 0.
    for (std::int64_t den = 1; den <= 10; ++den)
      for (std::int64_t num = -30; num <= 30; ++num) {
        const bool expect = num >= 0 && (2 * num) % den == 0;
        bool got = true;
        try {
          const SpinValue s = validate_spin(num, den);
          CHECK(s.two_s * den == 2 * num);
        } catch (const QuantizationError&) {
          got = false;
        }
        CHECK(got == expect);
      }
  }

  TEST_CASE("spin value helpers") {
    const SpinValue s = validate_spin(3, 2);
    CHECK(s.s() == 1.5);
    CHECK(s.fermion());
    CHECK(s.multiplicity() == 4);
    CHECK(s.helicity(2.0) == 3.0);
    CHECK_FALSE(validate_spin(1).fermion());
  }

  TEST_CASE("gamma rate matches the inverse top metric") {
    std::uint64_t rng = 3;
    for (int k = 0; k < 500; ++k) {
      const SpinValue s{1 + static_cast<int>(uniform_below(rng, 4))};
      SpinConfig c;
      c.mass = 0.5 + uniform01(rng);
      c.lambda = 0.5 + uniform01(rng);
      c.hbar = 0.5 + uniform01(rng);
      c.beta = 0.05 + (pi - 0.1) * uniform01(rng);
      c.sz = c.hbar * s.s() * (2 * uniform01(rng) - 1);
      const double oracle = rate_from_metric(c.sz, c.beta, s.s(), c.mass, c.lambda, c.hbar);
      CHECK(gamma_rate(c, s) == doctest::Approx(oracle).epsilon(1e-10));
    }
  }

  TEST_CASE("gamma rate examples") {
    SpinConfig c;
    c.beta = pi / 2;
    c.sz = 0.25;
    // cos(pi/2) = 0: rate = s_zeta / (m lambda^2).
    CHECK(gamma_rate(c, validate_spin(1, 2)) == doctest::Approx(0.5));
    c.beta = pi / 3;
    c.sz = 0.5;
    CHECK(gamma_rate(c, validate_spin(1, 2)) == doctest::Approx((0.5 - 0.25) / 0.75));
    c.sz = 0.75;
    CHECK_THROWS_AS(gamma_rate(c, validate_spin(1, 2)), PreconditionError);  // |s_z| > hbar s
  }

  TEST_CASE("poles of the Euler chart") {
    SpinConfig c;
    c.beta = 0.0;
    c.sz = 0.5;
    try {
      (void)gamma_rate(c, validate_spin(1, 2));
      FAIL("expected PoleError");
    } catch (const PoleError& e) {
      CHECK(e.kind() == PoleError::Kind::finite);
      CHECK(e.limit() == doctest::Approx(0.25));
      // One-sided limit from the formula itself.
      c.beta = 1e-5;
      CHECK(gamma_rate(c, validate_spin(1, 2)) == doctest::Approx(e.limit()).epsilon(1e-6));
    }
    c.beta = 0.0;
    c.sz = -0.5;
    try {
      (void)gamma_rate(c, validate_spin(1, 2));
      FAIL("expected PoleError");
    } catch (const PoleError& e) {
      CHECK(e.kind() == PoleError::Kind::divergent);
      CHECK(std::isinf(e.limit()));
    }
    c.beta = pi;
    c.sz = -0.5;
    try {
      (void)gamma_rate(c, validate_spin(1, 2));
      FAIL("expected PoleError");
    } catch (const PoleError& e) {
      CHECK(e.kind() == PoleError::Kind::finite);
    }
  }

  TEST_CASE("ratchet holds on a grid and at random") {
    for (int two_s : {1, 2, 3}) {
      const SpinValue s{two_s};
      const auto grid = ratchet_grid(s, 101, 100);
      CHECK(grid.size() == 10100);
      CHECK(grid.front().sz == doctest::Approx(-s.s()));
      CHECK(grid.back().sz == doctest::Approx(s.s()));
      const auto rep = ratchet_check(grid, s);
      CHECK(rep.violations == 0);
      CHECK(rep.min_rate > 0.0);
      const auto serial = ratchet_check(grid, s, {}, Exec::serial);
      CHECK(serial.min_rate == rep.min_rate);
      CHECK(serial.argmin == rep.argmin);
    }
  }

  TEST_CASE("pole samples are not admissible in the ratchet check") {
    const std::vector<RatchetSample> bad{{0.1, 0.5}, {0.5, 0.0}};
    CHECK_THROWS_AS(ratchet_check(bad, validate_spin(1, 2)), PreconditionError);
  }

  TEST_CASE("Wigner small d, highest-weight column") {
    const double b = 0.7;
    const SpinValue half{1}, one{2};
    CHECK(wigner_small_d(half, 1, b) == doctest::Approx(std::cos(b / 2)));
    CHECK(wigner_small_d(half, -1, b) == doctest::Approx(std::sin(b / 2)));
    CHECK(wigner_small_d(one, 2, b) == doctest::Approx((1 + std::cos(b)) / 2));
    CHECK(wigner_small_d(one, 0, b) == doctest::Approx(std::sin(b) / std::sqrt(2.0)));
    CHECK(wigner_small_d(one, -2, b) == doctest::Approx((1 - std::cos(b)) / 2));
    // Each column of a unitary matrix has unit norm.
    for (int two_s = 0; two_s <= 7; ++two_s) {
      double sum = 0.0;
      for (int t = -two_s; t <= two_s; t += 2) sum += std::pow(wigner_small_d(SpinValue{two_s}, t, b), 2);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
    }
    CHECK_THROWS_AS(wigner_small_d(half, 0, b), PreconditionError);
    CHECK_THROWS_AS(wigner_small_d(one, 4, b), PreconditionError);
  }

  TEST_CASE("single spin assembly carries e^{i s gamma}") {
    const SpinValue s{1};
    const std::vector<std::complex<double>> comp{{0.3, 0.1}, {-0.2, 0.5}};
    const auto a = assemble_single_spin(comp, s, 0.4, 1.1, 0.0);
    const auto b = assemble_single_spin(comp, s, 0.4, 1.1, 2 * pi);
    // Half-integer spin: a full turn of gamma flips the sign.
    CHECK(std::abs(a + b) < 1e-14);
    const auto c = assemble_single_spin(comp, s, 0.4, 1.1, 4 * pi);
    CHECK(std::abs(a - c) < 1e-13);
    const std::complex<double> expect =
        spin_coefficient(s, -1, 0.4, 1.1) * comp[0] + spin_coefficient(s, 1, 0.4, 1.1) * comp[1];
    CHECK(std::abs(a - expect) < 1e-15);
  }

  TEST_CASE("action splits into hbar s gamma plus a gamma-free part") {
    ChartSpec spec;
    spec.axes = {Axis{"x", -1, 1, 9, Boundary::open}, Axis{"beta", 0.5, 2.5, 7, Boundary::open},
                 Axis{"gamma", 0, 4 * pi, 16, Boundary::periodic}};
    const auto c = build_chart(spec);
    const SpinValue s{3};
    const auto S = ScalarField::sample(
        c, [&](std::span<const double> q) { return 1.5 * q[2] + q[0] * q[0] - std::cos(q[1]); });
    const auto split = decompose_action(S, s, 2);
    CHECK(split.residual < 1e-12);
    CHECK(split.s0.chart->dim() == 2);
    const std::size_t idx[2] = {3, 2};
    const double x = split.s0.chart->coords(split.s0.chart->ravel(idx))[0];
    const double beta = split.s0.chart->coords(split.s0.chart->ravel(idx))[1];
    CHECK(split.s0[split.s0.chart->ravel(idx)] == doctest::Approx(x * x - std::cos(beta)));
    const auto bad = ScalarField::sample(c, [&](std::span<const double> q) { return 1.5 * q[2] + std::sin(q[2]); });
    CHECK(decompose_action(bad, s, 2).residual > 0.5);
  }
}
