#pragma once

#include <cstddef>
#include <span>

#include "cqg/chart.hpp"
#include "cqg/parallel.hpp"

namespace cqg::kernels {

enum class Closure {
  one_sided,  // fourth-order one-sided rows at open ends; reflecting ends mirror
  sbp,        // diagonal-norm summation-by-parts rows at every nonperiodic end
  vanishing,  // open ends: the field is zero beyond the grid (skew-symmetric)
};

// Fourth-order first derivative along `axis` of the grid function f.
//
// Periodic axes wrap; `seam_offset` is the jump f(q + L e_axis) - f(q) added
// every time the stencil crosses the seam (zero for single-valued fields).
// Open axes use one-sided fourth-order closures and need at least 5 points;
// reflecting axes mirror about the end points and need at least 3.
//
// Every stencil is written in difference form sum_k w_k (f_k - f_0), so the
// derivative of a constant is exactly zero.
void derivative(const MetricChart& chart, std::span<const double> f, std::size_t axis,
                double seam_offset, std::span<double> out, Exec exec = Exec::parallel,
                Closure closure = Closure::one_sided);

// d_axis (f e^{scale * w}) / e^{scale * w} at every point, where w is a
// single-valued log weight. Neighbour ratios are formed as exp(scale (w_k - w_p))
// so nothing under- or overflows when e^w spans many decades.
//
// Nonperiodic axes (at least 8 points) use the diagonal-norm
// summation-by-parts closure, whose norm weight at the end point is 17/48.
// With zero_flux the end rows get the penalty that imposes zero flux
// f e^{scale w} weakly; the result is then minus the adjoint of the
// gradient, which makes the weighted operators used by the coupled solver
// symmetric.
void weighted_derivative(const MetricChart& chart, std::span<const double> f, std::span<const double> log_weight,
                         double scale, std::size_t axis, bool zero_flux, std::span<double> out,
                         Exec exec = Exec::parallel);

// Sixth-difference low-pass filter along `axis`:
//   out_i = f_i + strength * (f_{i-3} - 6 f_{i-2} + 15 f_{i-1} - 20 f_i + 15 f_{i+1} - 6 f_{i+2} + f_{i+3}).
// Polynomials of degree <= 5 pass unchanged; strength = 1/64 removes the
// Nyquist mode. The three points next to an open end are left untouched, and
// nonperiodic axes shorter than 7 points are copied through.
void filter(const MetricChart& chart, std::span<const double> f, std::size_t axis, double seam_offset,
            double strength, std::span<double> out, Exec exec = Exec::parallel);

// Throws StencilError if `axis` is too short for its boundary closure.
void require_stencil(const Axis& ax);

namespace reference {
// Plain single-threaded loops over the same per-point expressions.
void derivative(const MetricChart& chart, std::span<const double> f, std::size_t axis,
                double seam_offset, std::span<double> out, Closure closure = Closure::one_sided);
void filter(const MetricChart& chart, std::span<const double> f, std::size_t axis, double seam_offset,
            double strength, std::span<double> out);
void weighted_derivative(const MetricChart& chart, std::span<const double> f, std::span<const double> log_weight,
                         double scale, std::size_t axis, bool zero_flux, std::span<double> out);
}  // namespace reference

namespace omp {
void derivative(const MetricChart& chart, std::span<const double> f, std::size_t axis,
                double seam_offset, std::span<double> out, Closure closure = Closure::one_sided);
void filter(const MetricChart& chart, std::span<const double> f, std::size_t axis, double seam_offset,
            double strength, std::span<double> out);
void weighted_derivative(const MetricChart& chart, std::span<const double> f, std::span<const double> log_weight,
                         double scale, std::size_t axis, bool zero_flux, std::span<double> out);
}  // namespace omp

}  // namespace cqg::kernels
