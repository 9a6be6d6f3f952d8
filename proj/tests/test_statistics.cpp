#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "cqg/error.hpp"
#include "cqg/permutation.hpp"
#include "cqg/statistics.hpp"

using namespace cqg;

namespace {

std::vector<SpinorState> random_states(std::size_t n, SpinValue s, std::size_t d, std::uint64_t seed) {
  std::vector<SpinorState> out;
  for (std::size_t k = 0; k < n; ++k) {
    SpinorState st{s, d, {}};
    for (std::size_t i = 0; i < static_cast<std::size_t>(s.multiplicity()) * d; ++i)
      st.values.emplace_back(2 * uniform01(seed) - 1, 2 * uniform01(seed) - 1);
    out.push_back(std::move(st));
  }
  return out;
}

}  // namespace

TEST_SUITE("statistics") {
  TEST_CASE("permutation algebra") {
    const auto p = Permutation::from_one_based({2, 3, 1, 5, 4});
    CHECK(p.str() == "[2, 3, 1, 5, 4]");
    CHECK((p * p.inverse()).is_identity());
    CHECK(parity(p).inversions == 3);
    CHECK(sign(p) == -1);
    CHECK_THROWS_AS(Permutation::from_one_based({1, 1, 2}), PreconditionError);
    CHECK(all_permutations(4).size() == 24);
    CHECK(all_permutations(3)[1] == Permutation::from_one_based({1, 3, 2}));
  }

  TEST_CASE("sign is a homomorphism and the decomposition multiplies back") {
    std::uint64_t rng = 17;
    for (int k = 0; k < 200; ++k) {
      const std::size_t n = 1 + uniform_below(rng, 7);
      const auto p = Permutation::random(n, splitmix64(rng));
      const auto q = Permutation::random(n, splitmix64(rng));
      CHECK(sign(p * q) == sign(p) * sign(q));
      const auto info = parity(p);
      Permutation prod = Permutation::identity(n);
      for (const auto& [a, b] : info.decomposition) {
        CHECK(b == a + 1);
        prod = prod * Permutation::transposition(n, a, b);
      }
      CHECK(prod == p);
      CHECK(info.decomposition.size() == info.inversions);
    }
  }

  TEST_CASE("random permutations are uniform") {
    std::map<std::vector<std::size_t>, int> counts;
    for (std::uint64_t seed = 0; seed < 60000; ++seed) ++counts[Permutation::random(3, seed).image()];
    CHECK(counts.size() == 6);
    for (const auto& [img, c] : counts) CHECK(std::abs(c - 10000) < 500);
  }

  TEST_CASE("two-particle symmetrization against the explicit formula") {
    for (int two_s : {0, 1, 2, 3}) {
      const SpinValue s{two_s};
      const auto f = random_states(2, s, 3, 5 + two_s);
      const auto psi = symmetrize(f);
      const std::size_t dim = f[0].values.size();
      const double sgn = s.fermion() ? -1.0 : 1.0;
      std::vector<std::size_t> slot(2);
      for (std::size_t k = 0; k < psi.size(); ++k) {
        psi.slots(k, slot);
        const auto expect = (f[0].values[slot[0]] * f[1].values[slot[1]] +
                             sgn * f[1].values[slot[0]] * f[0].values[slot[1]]) /
                            std::sqrt(2.0);
        CHECK(std::abs(psi.data()[k] - expect) < 1e-15);
      }
      CHECK(slot.size() == 2);
      CHECK(dim == static_cast<std::size_t>(s.multiplicity()) * 3);
    }
  }

  TEST_CASE("exchange eigenvalue is (-1)^{2s} on every transposition") {
    for (int two_s : {0, 1, 2, 3})
      for (std::size_t n = 2; n <= 4; ++n) {
        const SpinValue s{two_s};
        const auto psi = symmetrize(random_states(n, s, 2, 40 + n));
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = a + 1; b < n; ++b) {
            const auto r = exchange_test(psi, Permutation::transposition(n, a, b));
            CHECK(r.eigen);
            CHECK(r.phase() == (s.fermion() ? -1 : 1));
          }
        // Any permutation: eigenvalue sign(p)^{2s}.
        const auto p = Permutation::random(n, 99);
        CHECK(exchange_test(psi, p).phase() == (s.fermion() ? sign(p) : 1));
      }
  }

  TEST_CASE("product states are not exchange eigenstates") {
    const auto f = random_states(2, SpinValue{1}, 2, 8);
    const auto r = exchange_test(product_state(f), Permutation::transposition(2, 0, 1));
    CHECK_FALSE(r.eigen);
    CHECK(r.phase() == 0);
  }

  TEST_CASE("duplicate states vanish exactly for half-odd spin") {
    for (int two_s : {0, 1, 2, 3}) {
      const SpinValue s{two_s};
      const auto one = random_states(1, s, 2, 3);
      const std::vector<SpinorState> dup(3, one[0]);
      const double nrm = symmetrize(dup).norm();
      CHECK((nrm < 1e-12) == s.fermion());
    }
  }

  TEST_CASE("serial and parallel symmetrization agree bitwise") {
    const auto f = random_states(4, SpinValue{3}, 2, 21);
    CHECK(symmetrize(f, Exec::serial).data() == symmetrize(f, Exec::parallel).data());
    const auto psi = symmetrize(f);
    const auto p = Permutation::from_one_based({4, 1, 3, 2});
    CHECK(permute(psi, p, Exec::serial).data() == permute(psi, p, Exec::parallel).data());
  }

  TEST_CASE("permutation acts as a group action on tensors") {
    const auto psi = product_state(random_states(3, SpinValue{1}, 2, 77));
    const auto p = Permutation::from_one_based({2, 3, 1});
    const auto q = Permutation::from_one_based({1, 3, 2});
    // (P psi)(x) = psi(x_{p(1)}, ...): applying Q and then P is applying p * q.
    const auto lhs = permute(permute(psi, q), p);
    const auto rhs = permute(psi, p * q);
    CHECK(lhs.data() == rhs.data());
  }

  TEST_CASE("permutation equivalence holds for product coefficients") {
    for (int two_s : {0, 1, 2, 3}) {
      const auto psi = symmetrize(random_states(3, SpinValue{two_s}, 2, 60 + two_s));
      const auto r = permutation_equivalence_check(psi, 200, 5);
      CHECK(r.samples == 200);
      CHECK(r.max_deviation < 1e-12);
    }
  }

  TEST_CASE("negative control: non-product coefficients break the equivalence") {
    const auto psi = product_state(random_states(2, SpinValue{1}, 2, 61));
    const CoefficientFn skewed = [](SpinValue s, std::span<const int> ts, std::span<const AngleArgs> ang) {
      // Depends on the first particle's angles twice: not covariant under relabelling.
      return spin_coefficient(s, ts[0], ang[0].alpha, ang[0].beta) *
             spin_coefficient(s, ts[1], ang[0].alpha + 0.5 * ang[1].alpha, ang[1].beta);
    };
    CHECK(permutation_equivalence_check(psi, 50, 9, skewed).max_deviation > 1e-3);
  }

  TEST_CASE("full assembly carries e^{i s sum gamma}") {
    const SpinValue s{1};
    const auto psi = symmetrize(random_states(2, s, 2, 4));
    const std::vector<AngleArgs> ang{{0.3, 1.0}, {1.2, 2.0}};
    const std::size_t pos[2] = {0, 1};
    const double g0[2] = {0.0, 0.0}, g1[2] = {2 * std::numbers::pi, 0.0};
    CHECK(std::abs(assemble_full(psi, ang, g0, pos) + assemble_full(psi, ang, g1, pos)) < 1e-14);
  }

  TEST_CASE("multispinor layout and limits") {
    const MultiSpinor m(2, SpinValue{1}, 3);
    CHECK(m.size() == 36);
    const std::size_t sig[2] = {1, 0}, r[2] = {2, 1};
    CHECK(m.index(sig, r) == ((1 * 2 + 0) * 3 + 2) * 3 + 1);
    std::vector<std::size_t> slot(2);
    m.slots(m.index(sig, r), slot);
    CHECK(slot[0] == 1 * 3 + 2);
    CHECK(slot[1] == 0 * 3 + 1);
    CHECK(m.from_slots(slot) == m.index(sig, r));
    CHECK_THROWS_AS(MultiSpinor(0, SpinValue{1}, 1), PreconditionError);
    CHECK_THROWS_AS(MultiSpinor(9, SpinValue{1}, 1), PreconditionError);
    CHECK_THROWS_AS(MultiSpinor(8, SpinValue{7}, 4), PreconditionError);
    CHECK_THROWS_AS(exchange_test(m, Permutation::transposition(2, 0, 1)), PreconditionError);
  }
}
