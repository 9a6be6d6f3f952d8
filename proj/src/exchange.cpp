#include "cqg/exchange.hpp"

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <exception>
#include <numbers>
#include <numeric>

#include "cqg/error.hpp"

namespace cqg {

namespace {

using BigCount = boost::multiprecision::cpp_int;

std::int64_t mod(std::int64_t x, std::int64_t k) {
  const std::int64_t r = x % k;
  return r < 0 ? r + k : r;
}

std::int64_t floor_div(std::int64_t x, std::int64_t k) { return (x - mod(x, k)) / k; }

// Does the unwrapped difference d = I - J violate the diagonal rule, for a
// walk that started in the strip m0 K < d < (m0 + 1) K?
bool hits_boundary(std::int64_t d, std::int64_t K, std::int64_t m0, bool allow_touching) {
  if (allow_touching) return d < m0 * K || d > (m0 + 1) * K;
  return mod(d, K) == 0;
}

bool monotone_step(LatticePoint from, LatticePoint to, std::int64_t K, std::int64_t& di, std::int64_t& dj) {
  di = mod(to.i - from.i, K);
  dj = mod(to.j - from.j, K);
  if (K == 1) return false;
  return (di == 1 && dj == 0) || (di == 0 && dj == 1) || (di == 1 && dj == 1);
}

void check_point(LatticePoint p, std::int64_t K, const char* what) {
  if (p.i < 0 || p.i >= K || p.j < 0 || p.j >= K)
    throw PreconditionError(std::string(what) + ": lattice point outside [0, K)");
}

void check_k(std::int64_t K) {
  if (K < 2) throw PreconditionError("exchange: K must be at least 2");
  if (K > max_enumeration_k)
    throw PreconditionError("exchange: K = " + std::to_string(K) + " exceeds the enumeration bound " +
                            std::to_string(max_enumeration_k));
}

}  // namespace

std::string to_string(PathStatus s) {
  switch (s) {
    case PathStatus::valid: return "valid";
    case PathStatus::rejected_endpoints: return "rejected:endpoints";
    case PathStatus::rejected_monotonicity: return "rejected:monotonicity";
    case PathStatus::rejected_full_turn: return "rejected:full-turn";
    case PathStatus::rejected_boundary: return "rejected:boundary-crossing";
  }
  return "unknown";
}

PathStatus is_valid_exchange_path(const ExchangePath& path, LatticePoint a, LatticePoint b,
                                  const ExchangeRules& rules) {
  const std::int64_t K = path.K;
  if (path.vertices.empty()) throw PreconditionError("exchange path is empty");
  if (K < 1) throw PreconditionError("exchange path: K must be positive");
  for (const auto& v : path.vertices) check_point(v, K, "exchange path");
  check_point(a, K, "exchange path start");
  check_point(b, K, "exchange path end");

  const auto& vs = path.vertices;
  if (a.i == a.j || b != swapped(a) || vs.front() != a || (vs.back() != b && vs.back() != a) || vs.size() < 2)
    return PathStatus::rejected_endpoints;

  std::int64_t ti = 0, tj = 0;
  for (std::size_t k = 1; k < vs.size(); ++k) {
    std::int64_t di, dj;
    if (!monotone_step(vs[k - 1], vs[k], K, di, dj)) return PathStatus::rejected_monotonicity;
    ti += di;
    tj += dj;
  }
  if (ti >= K || tj >= K) return PathStatus::rejected_full_turn;

  const std::int64_t d0 = a.i - a.j;
  const std::int64_t m0 = floor_div(d0, K);
  std::int64_t ui = a.i, uj = a.j;
  for (std::size_t k = 1; k < vs.size(); ++k) {
    std::int64_t di, dj;
    monotone_step(vs[k - 1], vs[k], K, di, dj);
    ui += di;
    uj += dj;
    if (hits_boundary(ui - uj, K, m0, rules.allow_touching)) return PathStatus::rejected_boundary;
  }
  return PathStatus::valid;
}

std::int64_t Winding::turns_num() const { return units() / std::gcd(units(), K); }
std::int64_t Winding::turns_den() const { return units() == 0 ? 1 : K / std::gcd(units(), K); }
double Winding::radians() const { return 2.0 * std::numbers::pi * static_cast<double>(units()) / static_cast<double>(K); }

std::string Winding::str() const {
  // value = 2 pi num / den = pi (2 num) / den
  std::int64_t num = 2 * turns_num(), den = turns_den();
  const std::int64_t g = std::gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (num == 0) return "0";
  std::string s = (num == 1 ? "" : std::to_string(num)) + "pi";
  if (den != 1) s += "/" + std::to_string(den);
  return s;
}

Winding winding_sum(const ExchangePath& path) {
  if (path.vertices.empty()) throw PreconditionError("winding_sum: empty path");
  if (path.K < 1) throw PreconditionError("winding_sum: K must be positive");
  for (const auto& v : path.vertices) check_point(v, path.K, "winding_sum");
  Winding w;
  w.K = path.K;
  for (std::size_t k = 1; k < path.vertices.size(); ++k) {
    std::int64_t di, dj;
    if (!monotone_step(path.vertices[k - 1], path.vertices[k], path.K, di, dj))
      throw PreconditionError("winding_sum: step " + std::to_string(k) + " is not monotone");
    w.da += di;
    w.db += dj;
  }
  return w;
}

ExchangePath direct_path(std::int64_t K, LatticePoint a) {
  check_point(a, K, "direct_path");
  ExchangePath p{K, {}};
  const std::int64_t n = a.j - a.i;  // signed length along (1, -1)
  const std::int64_t s = n >= 0 ? 1 : -1;
  for (std::int64_t t = 0; t <= n * s; ++t) p.vertices.push_back({a.i + s * t, a.j - s * t});
  return p;
}

ExchangePath staircase_path(std::int64_t K, LatticePoint a) {
  check_point(a, K, "staircase_path");
  if (a.i == a.j) throw PreconditionError("staircase_path: start lies on the diagonal");
  const LatticePoint b = swapped(a);
  const std::int64_t ti = mod(b.i - a.i, K), tj = mod(b.j - a.j, K);
  ExchangePath p{K, {a}};
  LatticePoint cur = a;
  const std::int64_t diag = std::min(ti, tj);
  for (std::int64_t k = 0; k < diag; ++k) {
    cur = {mod(cur.i + 1, K), mod(cur.j + 1, K)};
    p.vertices.push_back(cur);
  }
  for (std::int64_t k = diag; k < ti; ++k) {
    cur = {mod(cur.i + 1, K), cur.j};
    p.vertices.push_back(cur);
  }
  for (std::int64_t k = diag; k < tj; ++k) {
    cur = {cur.i, mod(cur.j + 1, K)};
    p.vertices.push_back(cur);
  }
  return p;
}

ExchangeEnumeration enumerate_exchange_paths(std::int64_t K, LatticePoint a, const ExchangeRules& rules) {
  check_k(K);
  check_point(a, K, "enumerate_exchange_paths");
  ExchangeEnumeration out;
  out.K = K;
  out.start = a;
  out.end = swapped(a);
  out.direct = is_valid_exchange_path(direct_path(K, a), a, out.end, rules);
  if (a.i == a.j) return out;

  const std::int64_t m0 = floor_div(a.i - a.j, K);
  const std::size_t side = static_cast<std::size_t>(K);
  // live[di * K + dj]: walks currently at displacement (di, dj) < (K, K).
  std::vector<BigCount> live(side * side);
  BigCount valid = 0, full_turn = 0, boundary = 0;
  std::vector<std::int64_t> units;
  live[0] = 1;
  constexpr std::int64_t steps[3][2] = {{1, 0}, {0, 1}, {1, 1}};
  for (std::int64_t di = 0; di < K; ++di)
    for (std::int64_t dj = 0; dj < K; ++dj) {
      const BigCount& c = live[static_cast<std::size_t>(di * K + dj)];
      if (c.is_zero()) continue;
      for (const auto& st : steps) {
        const std::int64_t ni = di + st[0], nj = dj + st[1];
        if (ni >= K || nj >= K) {
          full_turn += c;
          continue;
        }
        if (hits_boundary((a.i + ni) - (a.j + nj), K, m0, rules.allow_touching)) {
          boundary += c;
          continue;
        }
        if (mod(a.i + ni, K) == out.end.i && mod(a.j + nj, K) == out.end.j) {
          valid += c;
          if (std::find(units.begin(), units.end(), ni + nj) == units.end()) units.push_back(ni + nj);
          continue;
        }
        live[static_cast<std::size_t>(ni * K + nj)] += c;
      }
    }
  std::sort(units.begin(), units.end());
  out.n_valid = valid.str();
  out.n_full_turn = full_turn.str();
  out.n_boundary = boundary.str();
  out.winding_units = std::move(units);
  return out;
}

ExchangeCensus exchange_census(std::int64_t K, const ExchangeRules& rules, Exec exec) {
  check_k(K);
  std::vector<LatticePoint> starts;
  for (std::int64_t i = 0; i < K; ++i)
    for (std::int64_t j = 0; j < K; ++j)
      if (i != j) starts.push_back({i, j});
  std::vector<ExchangeEnumeration> results(starts.size());
  if (exec == Exec::serial) {
    for (std::size_t k = 0; k < starts.size(); ++k) results[k] = enumerate_exchange_paths(K, starts[k], rules);
  } else {
    std::exception_ptr failure;
    const auto n = static_cast<std::int64_t>(starts.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t k = 0; k < n; ++k) {
      try {
        results[static_cast<std::size_t>(k)] = enumerate_exchange_paths(K, starts[static_cast<std::size_t>(k)], rules);
      } catch (...) {
#pragma omp critical(cqg_census_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  ExchangeCensus c;
  c.K = K;
  c.starts = starts.size();
  BigCount total = 0, least = -1;
  for (const auto& r : results) {
    const BigCount v(r.n_valid);
    total += v;
    if (least < 0 || v < least) least = v;
    if (v.is_zero()) ++c.starts_without_valid;
    if (r.direct == PathStatus::valid) ++c.direct_accepted;
    for (auto u : r.winding_units)
      if (std::find(c.winding_units.begin(), c.winding_units.end(), u) == c.winding_units.end())
        c.winding_units.push_back(u);
  }
  std::sort(c.winding_units.begin(), c.winding_units.end());
  c.total_valid = total.str();
  c.min_valid = least < 0 ? std::string("0") : least.str();
  return c;
}

ActionJump action_jump(SpinValue s, const Permutation& p, double hbar) {
  ActionJump j;
  j.transpositions = parity(p).inversions;
  j.delta_s0 = -2.0 * std::numbers::pi * hbar * static_cast<double>(j.transpositions) * s.s();
  j.phase = (j.transpositions * static_cast<std::size_t>(s.two_s)) % 2 ? -1 : 1;
  return j;
}

}  // namespace cqg
