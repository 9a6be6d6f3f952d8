#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cqg/parallel.hpp"
#include "cqg/permutation.hpp"
#include "cqg/spin.hpp"

namespace cqg {

// Lattice model of the two-particle angle square: (gamma_a, gamma_b) =
// (2 pi i / K, 2 pi j / K) with i, j in [0, K). Opposite edges are
// identified (torus) and so are (i, j) and (j, i).
struct LatticePoint {
  std::int64_t i = 0;
  std::int64_t j = 0;
  friend bool operator==(LatticePoint, LatticePoint) = default;
};

inline LatticePoint swapped(LatticePoint p) { return {p.j, p.i}; }

// Vertices in wrapped coordinates. Consecutive vertices differ by one of the
// monotone steps (1,0), (0,1), (1,1) modulo K in a valid path.
struct ExchangePath {
  std::int64_t K = 0;
  std::vector<LatticePoint> vertices;
};

enum class PathStatus {
  valid,
  rejected_endpoints,
  rejected_monotonicity,
  rejected_full_turn,
  rejected_boundary,
};

std::string to_string(PathStatus s);

struct ExchangeRules {
  // false: any vertex on the diagonal (after the start) rejects the path.
  // true: touching is allowed, only passing to the other side rejects.
  bool allow_touching = false;
};

// Checks, in order: endpoints (starts at A off the diagonal, ends at B or at
// the identified point A, at least one step), monotonicity, full turn
// (total advance of either angle >= 2 pi), diagonal contact/crossing.
// Throws PreconditionError for an empty path or vertices outside [0, K).
PathStatus is_valid_exchange_path(const ExchangePath& path, LatticePoint a, LatticePoint b,
                                  const ExchangeRules& rules = {});

// Total advance of both angles in lattice units, tracking wraps.
struct Winding {
  std::int64_t da = 0;  // Delta i
  std::int64_t db = 0;  // Delta j
  std::int64_t K = 1;

  std::int64_t units() const noexcept { return da + db; }
  // (Delta gamma_a + Delta gamma_b) / 2 pi as a reduced fraction.
  std::int64_t turns_num() const;
  std::int64_t turns_den() const;
  double radians() const;
  // "2pi", "4pi", "3pi/2", "0"
  std::string str() const;
};

// Requires a nonempty path whose steps are all monotone (PreconditionError
// otherwise); validity as an exchange path is not required.
Winding winding_sum(const ExchangePath& path);

// Straight segment from A to B = swap(A): slope -1 in the (i, j) plane.
ExchangePath direct_path(std::int64_t K, LatticePoint a);
// A valid exchange path: diagonal steps first, then straight ones, wrapping
// once through the edge. Requires A off the diagonal.
ExchangePath staircase_path(std::int64_t K, LatticePoint a);

// Largest K accepted by the enumerations.
inline constexpr std::int64_t max_enumeration_k = 256;

// Counts are exact and can exceed 64 bits, so they are reported as decimal
// strings.
struct ExchangeEnumeration {
  std::int64_t K = 0;
  LatticePoint start;
  LatticePoint end;
  std::string n_valid = "0";
  std::string n_full_turn = "0";
  std::string n_boundary = "0";
  // Distinct Delta i + Delta j over valid paths, ascending (lattice units).
  std::vector<std::int64_t> winding_units;
  PathStatus direct = PathStatus::rejected_monotonicity;
};

// All monotone walks from A, each followed until it reaches B (valid), makes
// a full turn, or meets the diagonal. Dynamic programming over the
// displacement (Delta i, Delta j) with arbitrary-precision counts.
// PreconditionError for K < 2, K > max_enumeration_k or A outside the grid;
// a start on the diagonal yields zero valid paths.
ExchangeEnumeration enumerate_exchange_paths(std::int64_t K, LatticePoint a, const ExchangeRules& rules = {});

struct ExchangeCensus {
  std::int64_t K = 0;
  std::size_t starts = 0;              // off-diagonal starts examined
  std::size_t starts_without_valid = 0;
  std::size_t direct_accepted = 0;     // direct paths not rejected
  std::string total_valid = "0";
  std::string min_valid = "0";         // over starts
  std::vector<std::int64_t> winding_units;  // union over starts
};

// enumerate_exchange_paths for every off-diagonal start (parallel over
// starts; merged in start order).
ExchangeCensus exchange_census(std::int64_t K, const ExchangeRules& rules = {}, Exec exec = Exec::parallel);

struct ActionJump {
  std::size_t transpositions = 0;  // k_p
  double delta_s0 = 0.0;           // -2 pi hbar k_p s
  int phase = 1;                   // (-1)^{2 k_p s}
};

ActionJump action_jump(SpinValue s, const Permutation& p, double hbar = 1.0);

}  // namespace cqg
