#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cqg/field.hpp"
#include "cqg/parallel.hpp"

namespace cqg {

// Spin quantum number s = two_s / 2 (never negative). The body-frame
// helicity is s_zeta = hbar s with the zeta axis oriented so that s >= 0.
struct SpinValue {
  int two_s = 0;

  double s() const noexcept { return 0.5 * two_s; }
  double helicity(double hbar = 1.0) const noexcept { return hbar * s(); }
  bool fermion() const noexcept { return two_s % 2 == 1; }
  int multiplicity() const noexcept { return two_s + 1; }
  // "0", "1/2", "1", "3/2", ...
  std::string str() const;

  friend bool operator==(SpinValue, SpinValue) = default;
};

// Accepts num/den iff 2 num/den is a nonnegative integer; QuantizationError
// otherwise (and PreconditionError for den == 0).
SpinValue validate_spin(std::int64_t num, std::int64_t den = 1);
// Parses "3/2", "1.5", "2" exactly (decimals are read as rationals).
SpinValue validate_spin(const std::string& text);

// Point of R^3 x SO(3) with z-y-z Euler angles, lab-frame s_z and the
// constants of the spherical top (moment of inertia m lambda^2).
struct SpinConfig {
  double r[3] = {0.0, 0.0, 0.0};
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double sz = 0.0;
  double mass = 1.0;
  double lambda = 1.0;
  double hbar = 1.0;
};

// Checks the angle ranges, |s_z| <= hbar s and positive constants.
void check_config(const SpinConfig& cfg, SpinValue s);

// Metric of the spherical top on (alpha, beta, gamma):
//   m lambda^2 [[1, 0, cos b], [0, 1, 0], [cos b, 0, 1]]   (row-major 3x3)
std::vector<double> top_metric(double beta, double mass = 1.0, double lambda = 1.0);

// dgamma/dt = (s_zeta - s_z cos b) / (m lambda^2 sin^2 b).
// Within 1e-12 of b = 0 or pi it throws PoleError: finite (limit
// hbar s / (2 m lambda^2), or 0 for s = 0) when s_z = +hbar s at b = 0 or
// s_z = -hbar s at b = pi, divergent otherwise.
double gamma_rate(const SpinConfig& cfg, SpinValue s);

struct RatchetSample {
  double sz = 0.0;
  double beta = 0.0;
};

struct RatchetReport {
  std::size_t count = 0;
  std::size_t violations = 0;
  double min_rate = 0.0;
  std::size_t argmin = 0;  // index of the first sample attaining min_rate
  RatchetSample at_min;
};

// gamma_rate over all samples (constants from `base`). Throws
// InvariantViolation if any rate is negative; poles are not admissible
// samples (PreconditionError).
RatchetReport ratchet_check(std::span<const RatchetSample> samples, SpinValue s, const SpinConfig& base = {},
                            Exec exec = Exec::parallel);

// nz x nb grid: s_z = hbar s (2i/(nz-1) - 1) including both ends,
// beta = pi (j + 1/2)/nb strictly inside (0, pi). s_z varies slowest.
std::vector<RatchetSample> ratchet_grid(SpinValue s, std::size_t nz, std::size_t nb, double hbar = 1.0);

// d^s_{sigma,s}(beta) = sqrt((2s)! / ((s+sigma)! (s-sigma)!)) cos^{s+sigma}(b/2) sin^{s-sigma}(b/2),
// the highest-weight column of the Wigner small-d matrix (z-y-z convention).
// sigma is passed doubled; PreconditionError unless -2s <= two_sigma <= 2s
// with two_sigma = 2s mod 2.
double wigner_small_d(SpinValue s, int two_sigma, double beta);

// c_sigma(alpha, beta) = e^{i sigma alpha} d^s_{sigma,s}(beta).
std::complex<double> spin_coefficient(SpinValue s, int two_sigma, double alpha, double beta);

// Psi = e^{i s gamma} sum_sigma c_sigma(alpha, beta) psi^sigma, with
// components ordered sigma = -s, ..., s.
std::complex<double> assemble_single_spin(std::span<const std::complex<double>> components, SpinValue s,
                                          double alpha, double beta, double gamma);

struct ActionSplit {
  ScalarField s0;         // on the chart without the gamma axis
  double residual = 0.0;  // max |S - hbar s gamma - S0| over the grid
};

// S = hbar s gamma + S0(other coordinates): S0 is the gamma-average of
// S - hbar s gamma, the residual measures any remaining gamma dependence.
ActionSplit decompose_action(const ScalarField& action, SpinValue s, std::size_t gamma_axis, double hbar = 1.0);

}  // namespace cqg
