#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cqg/parallel.hpp"
#include "cqg/permutation.hpp"
#include "cqg/spin.hpp"

namespace cqg {

inline constexpr std::size_t max_particles = 8;

// Single-particle spinor over a d-dimensional spatial basis: values[k * d + r]
// with k = sigma + s (sigma = -s..s) and r the basis index.
struct SpinorState {
  SpinValue s;
  std::size_t basis = 1;
  std::vector<std::complex<double>> values;

  std::size_t dim() const noexcept { return values.size(); }
};

// psi^{sigma_1..sigma_N}(r_1..r_N), dense. Flat index order: sigma_1 slowest,
// ..., sigma_N, then r_1, ..., r_N fastest. Each sigma index runs over
// 0..2s (sigma + s).
class MultiSpinor {
 public:
  MultiSpinor() = default;
  // Zero tensor. PreconditionError for n == 0, n > max_particles, basis == 0
  // or more than 2^26 entries.
  MultiSpinor(std::size_t n, SpinValue s, std::size_t basis);

  std::size_t particles() const noexcept { return n_; }
  SpinValue spin() const noexcept { return s_; }
  std::size_t basis() const noexcept { return d_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::vector<std::complex<double>>& data() noexcept { return data_; }
  const std::vector<std::complex<double>>& data() const noexcept { return data_; }

  // Flat index of (sigma indices 0..2s, basis indices).
  std::size_t index(std::span<const std::size_t> sigma, std::span<const std::size_t> r) const;
  // Per-particle slot (k_a, r_a) of a flat index, as k_a * d + r_a.
  void slots(std::size_t flat, std::span<std::size_t> slot) const;
  std::size_t from_slots(std::span<const std::size_t> slot) const;

  double norm() const;

 private:
  std::size_t n_ = 0;
  SpinValue s_;
  std::size_t d_ = 1;
  std::vector<std::complex<double>> data_;
};

// psi_1 (x) psi_2 (x) ... (x) psi_N.
MultiSpinor product_state(std::span<const SpinorState> factors);

// (1/sqrt N!) sum_P (-1)^{2 s k_P} P(psi_1 ... psi_N): a determinant for
// half-odd-integer s, a permanent for integer s. The printed 1/sqrt N!
// factor is kept, so repeated boson factors give norm != 1.
MultiSpinor symmetrize(std::span<const SpinorState> factors, Exec exec = Exec::parallel);

// (P psi)(x_1..x_N) = psi(x_{p(1)}..x_{p(N)}), x_a = (sigma_a, r_a).
MultiSpinor permute(const MultiSpinor& psi, const Permutation& p, Exec exec = Exec::parallel);

struct ExchangeResult {
  bool eigen = false;               // P psi = lambda psi within the tolerance
  std::complex<double> lambda{};    // <psi, P psi> / <psi, psi>
  double residual = 0.0;            // |P psi - lambda psi| / |psi|
  int phase() const;                // lambda rounded to +-1 (0 if neither)
};

// PreconditionError for psi == 0 or a size mismatch.
ExchangeResult exchange_test(const MultiSpinor& psi, const Permutation& p, double tol = 1e-10);

struct AngleArgs {
  double alpha = 0.0;
  double beta = 0.0;
};

// Coefficient c_{sigma_1..sigma_N}(alpha_1, beta_1, ...): sigma passed
// doubled.
using CoefficientFn =
    std::function<std::complex<double>(SpinValue s, std::span<const int> two_sigma, std::span<const AngleArgs> angles)>;

// prod_a e^{i sigma_a alpha_a} d^s_{sigma_a,s}(beta_a)
CoefficientFn product_coefficients();

// sum_sigma c_sigma(angles) psi^sigma(r_1..r_N)
std::complex<double> assemble_reduced(const MultiSpinor& psi, std::span<const AngleArgs> angles,
                                      std::span<const std::size_t> positions,
                                      const CoefficientFn& coeff = product_coefficients());

// e^{i s sum_a gamma_a} times assemble_reduced.
std::complex<double> assemble_full(const MultiSpinor& psi, std::span<const AngleArgs> angles,
                                   std::span<const double> gammas, std::span<const std::size_t> positions,
                                   const CoefficientFn& coeff = product_coefficients());

struct EquivalenceCheck {
  std::size_t samples = 0;
  double max_deviation = 0.0;  // relative to max(1, |Phi|)
};

// For random angles, positions and permutations p: compares Phi evaluated
// with its arguments permuted, Phi(q_{p(1)}..q_{p(N)}), with the contraction
// of c(q_1..q_N) against the label-permuted spinor P psi.
EquivalenceCheck permutation_equivalence_check(const MultiSpinor& psi, std::size_t samples, std::uint64_t seed,
                                               const CoefficientFn& coeff = product_coefficients());

}  // namespace cqg
