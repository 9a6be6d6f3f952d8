#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cqg/field.hpp"
#include "cqg/parallel.hpp"

namespace cqg {

// Christoffel symbols of the second kind at one point, Gamma^k_ij stored at
// data[k*n*n + i*n + j].
struct ChristoffelSymbols {
  std::size_t n = 0;
  std::vector<double> data;

  double operator()(std::size_t k, std::size_t i, std::size_t j) const { return data[(k * n + i) * n + j]; }
};

// At a grid point. Analytic charts differentiate the metric callback with a
// fourth-order central difference about the point; sampled charts use the
// grid stencil (one-sided near open boundaries).
ChristoffelSymbols christoffel(const MetricChart& chart, std::span<const std::size_t> point);
// At arbitrary coordinates; analytic charts only.
ChristoffelSymbols christoffel_at(const MetricChart& chart, std::span<const double> q);

// Scalar curvature R = g^ij R_ij of the metric. Identically zero (exactly) for
// charts whose metric is constant.
ScalarField riemann_scalar(const ChartPtr& chart, Exec exec = Exec::parallel);

// Coordinate gradient d_i f. `seam_offsets[d]` is the jump of f across the
// periodic seam of axis d (empty: all zero).
std::vector<ScalarField> gradient(const ScalarField& f, std::span<const double> seam_offsets = {},
                                  Exec exec = Exec::parallel);

// (1/sqrt g) d_i (sqrt g V^i) for a contravariant vector field.
ScalarField divergence(const std::vector<ScalarField>& v, Exec exec = Exec::parallel);

// (1/sqrt g) d_i (sqrt g g^ij d_j f), built from the same first-derivative
// stencil as gradient and divergence.
ScalarField laplace_beltrami(const ScalarField& f, std::span<const double> seam_offsets = {},
                             Exec exec = Exec::parallel);

struct WeylOptions {
  // Points with rho < rho_floor_rel * max(rho) are masked out of the
  // evaluation and take the value of the nearest unmasked point.
  double rho_floor_rel = 1e-12;
  Exec exec = Exec::parallel;
};

struct WeylVector {
  ChartPtr chart;
  std::vector<ScalarField> components;  // phi_i
};

// phi_i = -(1/(n-2)) d_i ln rho.
WeylVector weyl_vector(const ScalarField& rho, const WeylOptions& opts = {});

// R_W = R_g + (n-1)/(n-2) [ g^ij d_i rho d_j rho / rho^2
//                           - (2/(rho sqrt g)) d_i (sqrt g g^ij d_j rho) ].
// Evaluated in the equivalent log form R_g - (n-1)/(n-2) (2 LB(u) + |grad u|^2)
// with u = ln rho, which never divides by rho.
ScalarField weyl_curvature(const ScalarField& rho, const WeylOptions& opts = {});

// Same formula given u = ln rho directly and a precomputed R_g field.
ScalarField weyl_curvature_from_log(const ScalarField& log_rho, const ScalarField& riemann,
                                    Exec exec = Exec::parallel);

// (n-1)/(n-2)
double weyl_ratio(std::size_t n);
// Curvature coupling that turns (xi hbar^2/m) R_W into the Bohm potential in
// flat space: xi = (n-2)/(8(n-1)).
double default_xi(std::size_t n);

// Nearest unmasked grid point (BFS over axis neighbours, ties broken by flat
// index) for every point; unmasked points map to themselves.
std::vector<std::size_t> nearest_unmasked(const MetricChart& chart, const std::vector<char>& masked);

}  // namespace cqg
