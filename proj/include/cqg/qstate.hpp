#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cqg/field.hpp"

namespace cqg {

struct Units {
  double hbar = 1.0;
  double mass = 1.0;
};

// Paired density/action fields. S is stored as principal values; on periodic
// axes S(q + L_a e_a) = S(q) + 2 pi hbar winding[a]. winding may be
// half-integral for angle actions of half-integer spin.
struct CqgState {
  ScalarField rho;
  ScalarField action;
  double time = 0.0;
  double hbar = 1.0;
  std::vector<double> winding;

  const ChartPtr& chart() const { return rho.chart; }
  // Seam jump of S per axis, in action units.
  std::vector<double> seam_offsets() const;
};

// Checks rho >= 0, finite values, shared chart and winding size; fills an
// empty winding vector with zeros.
CqgState make_state(ScalarField rho, ScalarField action, double time = 0.0, double hbar = 1.0,
                    std::vector<double> winding = {});
void validate(const CqgState& state);

struct WaveField {
  ComplexField psi;
  double time = 0.0;
};

// psi = sqrt(rho) exp(i S / hbar), pointwise.
WaveField to_wavefunction(const CqgState& state);

struct UnwrapOptions {
  double rho_floor_rel = 1e-12;
  // Optional region mask (nonzero = inside). Outside the region the density
  // is still |psi|^2 but S is set to 0 and zeros of psi are ignored.
  const std::vector<char>* region = nullptr;
};

// rho = |psi|^2 and S = hbar arg(psi), unwrapped axis by axis from the first
// grid point of the region. Throws BranchAmbiguityError listing the nodal
// points (|psi|^2 below the floor) or the plaquettes carrying a phase vortex.
CqgState from_wavefunction(const WaveField& w, double hbar = 1.0, const UnwrapOptions& opts = {});

// Integral of rho sqrt(g) d^n q (product trapezoid, periodic-aware).
double norm(const CqgState& state);
double norm(const WaveField& w);

using GridIndex = std::vector<std::size_t>;

// Discrete line integral of d_i S dq^i along a closed lattice path (first
// vertex repeated at the end; every step moves one axis by one point,
// wrapping on periodic axes). Trapezoid rule on the stencil gradient.
double loop_integral(const CqgState& state, std::span<const GridIndex> loop);

}  // namespace cqg
