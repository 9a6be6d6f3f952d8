#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cqg/field.hpp"
#include "cqg/parallel.hpp"
#include "cqg/qstate.hpp"

namespace cqg {

using PotentialFn = std::function<double(std::span<const double> q, double t)>;
// Writes the covector a_i(q, t) into a.
using VectorPotentialFn = std::function<void(std::span<const double> q, double t, std::span<double> a)>;

// External scalar potential V and vector potential a_i. Either may be empty
// (treated as zero). time_dependent = false lets the solvers sample once.
struct ExternalFields {
  PotentialFn potential;
  VectorPotentialFn vector_potential;
  bool time_dependent = false;
};

struct SampledFields {
  ScalarField potential;
  std::vector<ScalarField> vector_potential;  // empty when a == 0
};

SampledFields sample_fields(const ExternalFields& fields, const ChartPtr& chart, double t);

enum class Scheme { cqg_coupled, reference_linear };
enum class Kinetic { laplace_beltrami, spectral };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);
std::string to_string(Kinetic k);
Kinetic kinetic_from_string(const std::string& s);

struct SolverParams {
  double dt = 1e-3;
  double t_end = 1.0;
  std::optional<double> xi;  // unset: default_xi(n)
  Scheme scheme = Scheme::cqg_coupled;
  int curvature_refresh = 1;
  // dt must stay below cfl * h_min^2 * m / hbar.
  double cfl = 0.5;
  Units units;
  // Density floor of the coupled solver, relative to max rho. Points below
  // it are clipped on entry; the run fails if the clipped mass exceeds
  // max_clipped_mass (relative to the norm).
  double rho_floor_rel = 1e-200;
  double max_clipped_mass = 1e-6;
  // Sixth-difference damping of (ln rho, S) in the coupled solver: the
  // right-hand side gains (F f - f) / filter_time, where F is the filter of
  // strength `filter` (0 disables, at most 1/64). F keeps polynomials of
  // degree <= 5 and removes grid-scale noise, which the log-density form
  // otherwise amplifies where rho is small.
  double filter = 1.0 / 64.0;
  // Unset: 0.45 h_min^2 m / hbar.
  std::optional<double> filter_time;
  // Kinetic operator of the reference solver. spectral needs a constant
  // metric and a wave function that vanishes at open ends.
  Kinetic kinetic = Kinetic::laplace_beltrami;
  Exec exec = Exec::parallel;
};

double resolve_xi(const SolverParams& params, std::size_t n);
// Throws CflError (suggesting 0.9 times the bound) when dt is too large, and
// PreconditionError for dt <= 0 or curvature_refresh < 1.
void check_params(const MetricChart& chart, const SolverParams& params);
// Number of steps of size <= params.dt covering t_end exactly.
std::size_t step_count(double t_end, double dt);

// Right-hand side H of the Hamilton-Jacobi equation, pointwise:
//   (1/2m) g^ij (d_i S - a_i)(d_j S - a_j) + V + (xi hbar^2/m) R_W.
ScalarField hamiltonian_density(const CqgState& state, const ExternalFields& fields, double xi, double mass = 1.0,
                                double rho_floor_rel = 1e-12, Exec exec = Exec::parallel);

struct Observables {
  double t = 0.0;
  double norm = 0.0;
  std::vector<double> mean;   // <q^i>
  std::vector<double> width;  // sqrt(<(q^i - <q^i>)^2>)
  double energy = 0.0;        // <H>
};

// Coupled (rho, S) evolution with classical RK4. Internally evolves
// u = ln rho, so rho stays positive. Fluxes are differentiated in ratio
// form, d_i(f rho)/rho with rho_q/rho_p = exp(u_q - u_p):
//   du/dt = -(1/(rho sqrt g)) d_i(sqrt g rho v^i),  v^i = g^ij (d_j S - a_j) / m,
//   R_W = R_g - 4 kappa (1/(phi sqrt g)) d_i(sqrt g g^ij d_j phi),  phi = sqrt rho.
// Stencils use summation-by-parts closures at non-periodic ends, with a
// zero-flux penalty on reflecting axes; on open axes the outermost points
// are refilled from a quadratic fit to the interior after every stage.
class CqgStepper {
 public:
  CqgStepper(const CqgState& initial, ExternalFields fields, SolverParams params);
  ~CqgStepper();
  CqgStepper(CqgStepper&&) noexcept;
  CqgStepper& operator=(CqgStepper&&) noexcept;

  void step();
  // Steps until time() == t (the last step is shortened if needed).
  void advance_to(double t);
  double time() const;
  std::size_t steps_taken() const;
  CqgState state() const;
  const std::vector<double>& log_density() const;
  Observables observe() const;
  const std::vector<std::string>& warnings() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Linear reference solver:
//   i hbar dPsi/dt = (1/2m)(-i hbar grad - a)^2 Psi + (V + (xi hbar^2/m) R_g) Psi
// with the Laplace-Beltrami kinetic operator, classical RK4 in time.
class ReferenceStepper {
 public:
  ReferenceStepper(const WaveField& initial, ExternalFields fields, SolverParams params);
  ~ReferenceStepper();
  ReferenceStepper(ReferenceStepper&&) noexcept;
  ReferenceStepper& operator=(ReferenceStepper&&) noexcept;

  void step();
  void advance_to(double t);
  double time() const;
  std::size_t steps_taken() const;
  const WaveField& state() const;
  Observables observe() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One step of size params.dt.
CqgState step_cqg(const CqgState& state, const ExternalFields& fields, const SolverParams& params);
WaveField step_reference(const WaveField& w, const ExternalFields& fields, const SolverParams& params);

// Interpolated fields for evaluating the Lagrangian off the grid.
struct LagrangianContext {
  ChartPtr chart;
  ScalarField weyl_curvature;
  SampledFields fields;
  double xi = 0.0;
  double mass = 1.0;
  double hbar = 1.0;
};

LagrangianContext make_lagrangian_context(const CqgState& state, const ExternalFields& fields, double xi,
                                          double mass = 1.0, double rho_floor_rel = 1e-12);

// L = (m/2) g_ij qdot^i qdot^j + a_i qdot^i - (xi hbar^2/m) R_W(q) - V(q).
// Grid fields are interpolated multilinearly; the metric is exact for
// analytic charts.
double lagrangian(const LagrangianContext& ctx, std::span<const double> q, std::span<const double> qdot);

// Multilinear interpolation of a grid field at q (periodic axes wrap, other
// axes clamp to the grid).
double interpolate(const ScalarField& f, std::span<const double> q);

struct EquivalenceSample {
  double t = 0.0;
  double density_l2 = 0.0;   // ||rho - |Psi|^2||_2 / ||rho||_2 (quadrature norms)
  double density_max = 0.0;  // max |rho - |Psi|^2| / max rho
  double phase_max = 0.0;    // max |S_cqg - S_ref - c| / hbar on the phase region
  bool phase_ok = true;
};

struct EquivalenceReport {
  std::vector<EquivalenceSample> samples;
  double max_density_l2 = 0.0;
  double max_density_max = 0.0;
  double max_phase = 0.0;
  bool phase_compared = true;
  std::string phase_error;  // first branch error met, if any
  double norm_drift_cqg = 0.0;
  double norm_drift_reference = 0.0;
  std::size_t steps = 0;
  double dt = 0.0;
  Observables final_cqg;
  Observables final_reference;
};

struct EquivalenceOptions {
  std::size_t sample_every = 1;         // compare every k-th step (and the last)
  double phase_region_rel = 1e-4;       // phases compared where rho >= this * max
};

// Runs both solvers from the same initial data up to t_end.
EquivalenceReport equivalence_report(const CqgState& initial, const ExternalFields& fields,
                                     const SolverParams& params, double t_end,
                                     const EquivalenceOptions& opts = {});

}  // namespace cqg
