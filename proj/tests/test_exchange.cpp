#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <string>

#include "cqg/error.hpp"
#include "cqg/exchange.hpp"

using namespace cqg;

namespace {

// Brute-force oracle: depth-first search over every monotone walk in the
// unwrapped plane, written independently of the library's rules.
struct Dfs {
  std::int64_t K;
  std::int64_t ai, aj;
  bool touching;
  std::uint64_t valid = 0, full_turn = 0, boundary = 0;
  std::vector<std::int64_t> units;

  static std::int64_t md(std::int64_t x, std::int64_t k) { return ((x % k) + k) % k; }

  void walk(std::int64_t di, std::int64_t dj) {
    const std::int64_t step[3][2] = {{1, 0}, {0, 1}, {1, 1}};
    const std::int64_t d0 = ai - aj;
    const std::int64_t lo = d0 >= 0 ? (d0 / K) * K : -((-d0 + K - 1) / K) * K;
    for (const auto& s : step) {
      const std::int64_t ni = di + s[0], nj = dj + s[1];
      if (ni >= K || nj >= K) {
        ++full_turn;
        continue;
      }
      const std::int64_t d = (ai + ni) - (aj + nj);
      const bool hit = touching ? (d < lo || d > lo + K) : md(d, K) == 0;
      if (hit) {
        ++boundary;
        continue;
      }
      if (md(ai + ni, K) == aj && md(aj + nj, K) == ai) {
        ++valid;
        if (std::find(units.begin(), units.end(), ni + nj) == units.end()) units.push_back(ni + nj);
        continue;
      }
      walk(ni, nj);
    }
  }
};

ExchangePath path(std::int64_t K, std::vector<LatticePoint> v) { return ExchangePath{K, std::move(v)}; }

}  // namespace

TEST_SUITE("exchange") {
  TEST_CASE("enumeration matches brute-force search") {
    for (std::int64_t K : {2, 3, 4, 5, 6, 8})
      for (bool touching : {false, true})
        for (std::int64_t i = 0; i < K; ++i)
          for (std::int64_t j = 0; j < K; ++j) {
            if (i == j) continue;
            Dfs d{K, i, j, touching, 0, 0, 0, {}};
            d.walk(0, 0);
            std::sort(d.units.begin(), d.units.end());
            const auto e = enumerate_exchange_paths(K, {i, j}, ExchangeRules{touching});
            CHECK(e.n_valid == std::to_string(d.valid));
            CHECK(e.n_full_turn == std::to_string(d.full_turn));
            CHECK(e.n_boundary == std::to_string(d.boundary));
            CHECK(e.winding_units == d.units);
          }
  }

  TEST_CASE("winding of every valid path is 2 pi") {
    for (std::int64_t K : {4, 8, 16, 32}) {
      const auto c = exchange_census(K);
      CHECK(c.starts == static_cast<std::size_t>(K * (K - 1)));
      CHECK(c.starts_without_valid == 0);
      CHECK(c.direct_accepted == 0);
      CHECK(c.winding_units == std::vector<std::int64_t>{K});
    }
  }

  TEST_CASE("census is identical in serial and parallel") {
    const auto a = exchange_census(12, {}, Exec::serial);
    const auto b = exchange_census(12, {}, Exec::parallel);
    CHECK(a.total_valid == b.total_valid);
    CHECK(a.min_valid == b.min_valid);
    CHECK(a.winding_units == b.winding_units);
  }

  TEST_CASE("counts beyond 64 bits stay exact") {
    const auto e = enumerate_exchange_paths(128, {1, 100});
    CHECK(e.n_valid.size() > 20);
    CHECK(e.winding_units == std::vector<std::int64_t>{128});
  }

  TEST_CASE("direct path is rejected, staircase path is valid") {
    for (std::int64_t K : {4, 8, 16}) {
      for (std::int64_t i = 0; i < K; ++i)
        for (std::int64_t j = 0; j < K; ++j) {
          if (i == j) continue;
          const LatticePoint a{i, j};
          CHECK(is_valid_exchange_path(direct_path(K, a), a, swapped(a)) != PathStatus::valid);
          const auto st = staircase_path(K, a);
          CHECK(is_valid_exchange_path(st, a, swapped(a)) == PathStatus::valid);
          const auto w = winding_sum(st);
          CHECK(w.units() == K);
          CHECK(w.str() == "2pi");
          CHECK(w.radians() == doctest::Approx(2 * std::numbers::pi));
        }
    }
  }

  TEST_CASE("rejection reasons") {
    const std::int64_t K = 8;
    const LatticePoint a{1, 3}, b{3, 1};
    CHECK(is_valid_exchange_path(path(K, {a, {2, 3}}), a, b) == PathStatus::rejected_endpoints);
    CHECK(is_valid_exchange_path(path(K, {{2, 2}, {3, 3}}), {2, 2}, {2, 2}) == PathStatus::rejected_endpoints);
    CHECK(is_valid_exchange_path(path(K, {a, {2, 2}, {3, 1}}), a, b) == PathStatus::rejected_monotonicity);
    // Through the diagonal point (3, 3), then around the j circle to B.
    CHECK(is_valid_exchange_path(path(K, {a, {2, 3}, {3, 3}, {3, 4}, {3, 5}, {3, 6}, {3, 7}, {3, 0}, {3, 1}}), a, b) ==
          PathStatus::rejected_boundary);
    // Touching the diagonal is allowed only in the permissive rule.
    const auto touch = path(K, {a, {2, 3}, {3, 3}, {3, 4}, {3, 5}, {3, 6}, {3, 7}, {3, 0}, {3, 1}});
    CHECK(is_valid_exchange_path(touch, a, b, ExchangeRules{true}) == PathStatus::valid);
    // A closed loop back to A winds a full turn.
    std::vector<LatticePoint> loop{a};
    for (std::int64_t k = 1; k <= K; ++k) loop.push_back({(1 + k) % K, (3 + k) % K});
    CHECK(is_valid_exchange_path(path(K, loop), a, b) == PathStatus::rejected_full_turn);
    CHECK(winding_sum(path(K, loop)).str() == "4pi");
  }

  TEST_CASE("winding sum formatting") {
    CHECK((Winding{3, 0, 8}).str() == "3pi/4");
    CHECK((Winding{0, 0, 8}).str() == "0");
    CHECK((Winding{2, 2, 4}).str() == "2pi");
    CHECK((Winding{4, 4, 4}).str() == "4pi");
    CHECK((Winding{1, 0, 2}).str() == "pi");
    CHECK_THROWS_AS(winding_sum(path(8, {{0, 0}, {2, 0}})), PreconditionError);
  }

  TEST_CASE("action jump and phase") {
    const auto p = Permutation::from_one_based({3, 1, 2});
    const auto j = action_jump(validate_spin(1, 2), p);
    CHECK(j.transpositions == 2);
    CHECK(j.phase == 1);
    CHECK(j.delta_s0 == doctest::Approx(-2 * std::numbers::pi));
    CHECK(action_jump(validate_spin(3, 2), Permutation::transposition(4, 0, 3)).phase == -1);
    CHECK(action_jump(validate_spin(1), Permutation::transposition(4, 0, 3)).phase == 1);
  }

  TEST_CASE("preconditions") {
    CHECK_THROWS_AS(enumerate_exchange_paths(1, {0, 0}), PreconditionError);
    CHECK_THROWS_AS(enumerate_exchange_paths(300, {0, 1}), PreconditionError);
    CHECK_THROWS_AS(enumerate_exchange_paths(8, {9, 1}), PreconditionError);
    CHECK(enumerate_exchange_paths(8, {2, 2}).n_valid == "0");
  }
}
