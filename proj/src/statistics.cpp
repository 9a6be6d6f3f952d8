#include "cqg/statistics.hpp"

#include <cmath>
#include <numbers>

#include "cqg/error.hpp"

namespace cqg {

namespace {

constexpr std::size_t max_entries = std::size_t{1} << 24;

std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  for (std::size_t k = 0; k < e; ++k) {
    if (r > max_entries) return max_entries + 1;
    r *= b;
  }
  return r;
}

void check_factors(std::span<const SpinorState> factors) {
  if (factors.empty()) throw PreconditionError("symmetrize: no factors");
  const SpinorState& f0 = factors[0];
  for (const auto& f : factors) {
    if (f.s != f0.s || f.basis != f0.basis)
      throw PreconditionError("symmetrize: factors differ in spin or basis size");
    if (f.basis == 0 || f.values.size() != static_cast<std::size_t>(f.s.multiplicity()) * f.basis)
      throw PreconditionError("symmetrize: factor has " + std::to_string(f.values.size()) + " values, expected " +
                              std::to_string(static_cast<std::size_t>(f.s.multiplicity()) * f.basis));
  }
}

}  // namespace

MultiSpinor::MultiSpinor(std::size_t n, SpinValue s, std::size_t basis) : n_(n), s_(s), d_(basis) {
  if (n == 0) throw PreconditionError("multispinor: need at least one particle");
  if (n > max_particles)
    throw PreconditionError("multispinor: " + std::to_string(n) + " particles exceed the limit of " +
                            std::to_string(max_particles));
  if (basis == 0) throw PreconditionError("multispinor: empty basis");
  const std::size_t total = ipow(static_cast<std::size_t>(s.multiplicity()) * basis, n);
  if (total > max_entries) throw PreconditionError("multispinor: tensor too large");
  data_.assign(total, {});
}

std::size_t MultiSpinor::index(std::span<const std::size_t> sigma, std::span<const std::size_t> r) const {
  if (sigma.size() != n_ || r.size() != n_) throw PreconditionError("multispinor index: wrong rank");
  const auto m = static_cast<std::size_t>(s_.multiplicity());
  std::size_t f = 0;
  for (std::size_t a = 0; a < n_; ++a) {
    if (sigma[a] >= m) throw PreconditionError("multispinor index: sigma out of range");
    f = f * m + sigma[a];
  }
  for (std::size_t a = 0; a < n_; ++a) {
    if (r[a] >= d_) throw PreconditionError("multispinor index: basis index out of range");
    f = f * d_ + r[a];
  }
  return f;
}

void MultiSpinor::slots(std::size_t flat, std::span<std::size_t> slot) const {
  const auto m = static_cast<std::size_t>(s_.multiplicity());
  for (std::size_t a = n_; a-- > 0;) {
    slot[a] = flat % d_;
    flat /= d_;
  }
  for (std::size_t a = n_; a-- > 0;) {
    slot[a] += (flat % m) * d_;
    flat /= m;
  }
}

std::size_t MultiSpinor::from_slots(std::span<const std::size_t> slot) const {
  std::size_t hi = 0, lo = 0;
  const auto m = static_cast<std::size_t>(s_.multiplicity());
  for (std::size_t a = 0; a < n_; ++a) {
    hi = hi * m + slot[a] / d_;
    lo = lo * d_ + slot[a] % d_;
  }
  return hi * ipow(d_, n_) + lo;
}

double MultiSpinor::norm() const {
  double s = 0.0;
  for (const auto& v : data_) s += std::norm(v);
  return std::sqrt(s);
}

MultiSpinor product_state(std::span<const SpinorState> factors) {
  check_factors(factors);
  MultiSpinor out(factors.size(), factors[0].s, factors[0].basis);
  const std::size_t n = factors.size();
  std::vector<std::size_t> slot(n);
  for (std::size_t f = 0; f < out.size(); ++f) {
    out.slots(f, slot);
    std::complex<double> v{1.0, 0.0};
    for (std::size_t a = 0; a < n; ++a) v *= factors[a].values[slot[a]];
    out.data()[f] = v;
  }
  return out;
}

MultiSpinor symmetrize(std::span<const SpinorState> factors, Exec exec) {
  check_factors(factors);
  const std::size_t n = factors.size();
  MultiSpinor out(n, factors[0].s, factors[0].basis);
  const auto perms = all_permutations(n);
  const bool fermion = factors[0].s.fermion();
  std::vector<double> weight(perms.size());
  double fact = 1.0;
  for (std::size_t k = 2; k <= n; ++k) fact *= static_cast<double>(k);
  const double scale = 1.0 / std::sqrt(fact);
  for (std::size_t q = 0; q < perms.size(); ++q) weight[q] = (fermion ? sign(perms[q]) : 1) * scale;

  // Flattened images and factor tables keep the inner loop on contiguous data.
  std::vector<std::size_t> images;
  images.reserve(perms.size() * n);
  for (const auto& p : perms) images.insert(images.end(), p.image().begin(), p.image().end());
  const std::size_t dim = factors[0].values.size();
  std::vector<std::complex<double>> table;
  table.reserve(n * dim);
  for (const auto& f : factors) table.insert(table.end(), f.values.begin(), f.values.end());

  auto entry = [&](std::size_t f, std::vector<std::size_t>& slot) {
    out.slots(f, slot);
    std::complex<double> acc{};
    for (std::size_t q = 0; q < perms.size(); ++q) {
      const std::size_t* im = images.data() + q * n;
      std::complex<double> v = table[slot[im[0]]];
      for (std::size_t a = 1; a < n; ++a) v *= table[a * dim + slot[im[a]]];
      acc += weight[q] * v;
    }
    out.data()[f] = acc;
  };
  if (exec == Exec::serial) {
    std::vector<std::size_t> slot(n);
    for (std::size_t f = 0; f < out.size(); ++f) entry(f, slot);
  } else {
    const auto total = static_cast<std::int64_t>(out.size());
#pragma omp parallel
    {
      std::vector<std::size_t> slot(n);
#pragma omp for schedule(static)
      for (std::int64_t f = 0; f < total; ++f) entry(static_cast<std::size_t>(f), slot);
    }
  }
  return out;
}

MultiSpinor permute(const MultiSpinor& psi, const Permutation& p, Exec exec) {
  const std::size_t n = psi.particles();
  if (p.size() != n) throw PreconditionError("permute: permutation size differs from particle count");
  MultiSpinor out(n, psi.spin(), psi.basis());
  auto entry = [&](std::size_t f, std::vector<std::size_t>& x, std::vector<std::size_t>& y) {
    out.slots(f, x);
    for (std::size_t a = 0; a < n; ++a) y[a] = x[p(a)];
    out.data()[f] = psi.data()[psi.from_slots(y)];
  };
  if (exec == Exec::serial) {
    std::vector<std::size_t> x(n), y(n);
    for (std::size_t f = 0; f < out.size(); ++f) entry(f, x, y);
  } else {
    const auto total = static_cast<std::int64_t>(out.size());
#pragma omp parallel
    {
      std::vector<std::size_t> x(n), y(n);
#pragma omp for schedule(static)
      for (std::int64_t f = 0; f < total; ++f) entry(static_cast<std::size_t>(f), x, y);
    }
  }
  return out;
}

int ExchangeResult::phase() const {
  if (std::abs(lambda - 1.0) < 1e-9) return 1;
  if (std::abs(lambda + 1.0) < 1e-9) return -1;
  return 0;
}

ExchangeResult exchange_test(const MultiSpinor& psi, const Permutation& p, double tol) {
  const double nrm = psi.norm();
  if (!(nrm > 0.0)) throw PreconditionError("exchange_test: zero tensor");
  const MultiSpinor q = permute(psi, p);
  std::complex<double> overlap{};
  for (std::size_t f = 0; f < psi.size(); ++f) overlap += std::conj(psi.data()[f]) * q.data()[f];
  ExchangeResult r;
  r.lambda = overlap / (nrm * nrm);
  double res = 0.0;
  for (std::size_t f = 0; f < psi.size(); ++f) res += std::norm(q.data()[f] - r.lambda * psi.data()[f]);
  r.residual = std::sqrt(res) / nrm;
  r.eigen = r.residual <= tol;
  return r;
}

CoefficientFn product_coefficients() {
  return [](SpinValue s, std::span<const int> two_sigma, std::span<const AngleArgs> angles) {
    std::complex<double> c{1.0, 0.0};
    for (std::size_t a = 0; a < two_sigma.size(); ++a)
      c *= spin_coefficient(s, two_sigma[a], angles[a].alpha, angles[a].beta);
    return c;
  };
}

std::complex<double> assemble_reduced(const MultiSpinor& psi, std::span<const AngleArgs> angles,
                                      std::span<const std::size_t> positions, const CoefficientFn& coeff) {
  const std::size_t n = psi.particles();
  if (angles.size() != n || positions.size() != n)
    throw PreconditionError("assemble_reduced: need one angle pair and one position per particle");
  const SpinValue s = psi.spin();
  const auto m = static_cast<std::size_t>(s.multiplicity());
  std::vector<std::size_t> sigma(n, 0);
  std::vector<int> two_sigma(n);
  std::complex<double> phi{};
  const std::size_t combos = psi.size() / ipow(psi.basis(), n);
  for (std::size_t k = 0; k < combos; ++k) {
    std::size_t rem = k;
    for (std::size_t a = n; a-- > 0;) {
      sigma[a] = rem % m;
      rem /= m;
      two_sigma[a] = 2 * static_cast<int>(sigma[a]) - s.two_s;
    }
    phi += coeff(s, two_sigma, angles) * psi.data()[psi.index(sigma, positions)];
  }
  return phi;
}

std::complex<double> assemble_full(const MultiSpinor& psi, std::span<const AngleArgs> angles,
                                   std::span<const double> gammas, std::span<const std::size_t> positions,
                                   const CoefficientFn& coeff) {
  if (gammas.size() != psi.particles()) throw PreconditionError("assemble_full: need one gamma per particle");
  double g = 0.0;
  for (double v : gammas) g += v;
  return std::polar(1.0, psi.spin().s() * g) * assemble_reduced(psi, angles, positions, coeff);
}

EquivalenceCheck permutation_equivalence_check(const MultiSpinor& psi, std::size_t samples, std::uint64_t seed,
                                               const CoefficientFn& coeff) {
  const std::size_t n = psi.particles();
  EquivalenceCheck rep;
  rep.samples = samples;
  std::uint64_t st = seed;
  std::vector<AngleArgs> ang(n), ang_p(n);
  std::vector<std::size_t> pos(n), pos_p(n);
  for (std::size_t k = 0; k < samples; ++k) {
    for (std::size_t a = 0; a < n; ++a) {
      ang[a].alpha = 2.0 * std::numbers::pi * uniform01(st);
      ang[a].beta = std::numbers::pi * uniform01(st);
      pos[a] = static_cast<std::size_t>(uniform_below(st, psi.basis()));
    }
    const Permutation p = Permutation::random(n, splitmix64(st));
    for (std::size_t a = 0; a < n; ++a) {
      ang_p[a] = ang[p(a)];
      pos_p[a] = pos[p(a)];
    }
    const auto lhs = assemble_reduced(psi, ang_p, pos_p, coeff);
    // Contract c(q_1..q_N) with (P psi) at (r_1..r_N): the sum over sigma
    // runs over P psi's entries at the permuted slots.
    const MultiSpinor ppsi = permute(psi, p, Exec::serial);
    const auto rhs = assemble_reduced(ppsi, ang, pos, coeff);
    rep.max_deviation = std::max(rep.max_deviation, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  return rep;
}

}  // namespace cqg
