#include "cqg/stencil.hpp"

#include <cmath>
#include <cstdint>

#include "cqg/error.hpp"

namespace cqg::kernels {

namespace {

struct Line {
  const double* f;
  std::size_t stride;
  std::int64_t count;
  Boundary boundary;
  double seam;
  double inv12h;
  const double* logw = nullptr;  // optional: differentiate f e^{logw}, divided by e^{logw_p}
  double wscale = 1.0;
  bool sbp = false;
  bool vanishing = false;
};

// Value at in-line offset i + k, with wrap/mirror handling.
inline double at(const Line& l, std::size_t base, std::int64_t j) {
  if (l.boundary == Boundary::periodic) {
    std::int64_t wraps = j >= 0 ? j / l.count : -((-j + l.count - 1) / l.count);
    const std::int64_t r = j - wraps * l.count;
    return l.f[base + static_cast<std::size_t>(r) * l.stride] + static_cast<double>(wraps) * l.seam;
  }
  if (j < 0) j = -j;
  if (j > l.count - 1) j = 2 * (l.count - 1) - j;
  return l.f[base + static_cast<std::size_t>(j) * l.stride];
}

// Weighted line: value at offset j is f_j exp(w (logw_j - logw_p)).
inline double wat(const Line& l, std::size_t base, std::int64_t j, double lw0) {
  if (l.boundary == Boundary::periodic) {
    std::int64_t wraps = j >= 0 ? j / l.count : -((-j + l.count - 1) / l.count);
    const std::size_t q = base + static_cast<std::size_t>(j - wraps * l.count) * l.stride;
    return l.f[q] * std::exp(l.wscale * (l.logw[q] - lw0));
  }
  if (j < 0) j = -j;
  if (j > l.count - 1) j = 2 * (l.count - 1) - j;
  const std::size_t q = base + static_cast<std::size_t>(j) * l.stride;
  return l.f[q] * std::exp(l.wscale * (l.logw[q] - lw0));
}

// Diagonal-norm summation-by-parts first derivative (interior order 4,
// boundary order 2). Rows for the first four points; the last four use the
// mirrored rows with opposite sign.
constexpr double sbp_rows[4][6] = {
    {-24.0 / 17.0, 59.0 / 34.0, -4.0 / 17.0, -3.0 / 34.0, 0.0, 0.0},
    {-1.0 / 2.0, 0.0, 1.0 / 2.0, 0.0, 0.0, 0.0},
    {4.0 / 43.0, -59.0 / 86.0, 0.0, 59.0 / 86.0, -4.0 / 43.0, 0.0},
    {3.0 / 98.0, 0.0, -59.0 / 98.0, 0.0, 32.0 / 49.0, -4.0 / 49.0},
};
constexpr double sbp_h00 = 17.0 / 48.0;

inline double weighted_derivative_at(const Line& l, std::size_t p, bool zero_flux) {
  const std::int64_t i = static_cast<std::int64_t>((p / l.stride) % static_cast<std::size_t>(l.count));
  const std::size_t base = p - static_cast<std::size_t>(i) * l.stride;
  const double f0 = l.f[p];
  const double lw0 = l.logw[p];
  const double h = 1.0 / (12.0 * l.inv12h);
  if (l.boundary != Boundary::periodic) {
    auto v = [&](std::int64_t j) {
      const std::size_t q = base + static_cast<std::size_t>(j) * l.stride;
      return l.f[q] * std::exp(l.wscale * (l.logw[q] - lw0)) - f0;
    };
    const std::int64_t n = l.count;
    if (i < 4 || i > n - 5) {
      const bool left = i < 4;
      const std::int64_t r = left ? i : n - 1 - i;
      double acc = 0.0;
      for (std::int64_t k = 0; k < 6; ++k) {
        const double c = sbp_rows[r][k];
        if (c != 0.0) acc += c * v(left ? k : n - 1 - k);
      }
      double d = (left ? acc : -acc) / h;
      if (zero_flux && r == 0) d += (left ? f0 : -f0) / (sbp_h00 * h);
      return d;
    }
  }
  const double d1 = wat(l, base, i + 1, lw0) - wat(l, base, i - 1, lw0);
  const double d2 = wat(l, base, i + 2, lw0) - wat(l, base, i - 2, lw0);
  return (8.0 * d1 - d2) * l.inv12h;
}

inline double derivative_at(const Line& l, std::size_t p) {
  const std::int64_t i = static_cast<std::int64_t>((p / l.stride) % static_cast<std::size_t>(l.count));
  const std::size_t base = p - static_cast<std::size_t>(i) * l.stride;
  const double f0 = l.f[p];
  if (l.sbp && l.boundary != Boundary::periodic) {
    const std::int64_t n = l.count;
    if (i < 4 || i > n - 5) {
      auto v = [&](std::int64_t j) { return l.f[base + static_cast<std::size_t>(j) * l.stride] - f0; };
      const bool left = i < 4;
      const std::int64_t r = left ? i : n - 1 - i;
      double acc = 0.0;
      for (std::int64_t k = 0; k < 6; ++k) {
        const double c = sbp_rows[r][k];
        if (c != 0.0) acc += c * v(left ? k : n - 1 - k);
      }
      return (left ? acc : -acc) * 12.0 * l.inv12h;
    }
  } else if (l.vanishing && l.boundary == Boundary::open) {
    auto z = [&](std::int64_t j) {
      return j < 0 || j >= l.count ? 0.0 : l.f[base + static_cast<std::size_t>(j) * l.stride];
    };
    return (8.0 * (z(i + 1) - z(i - 1)) - (z(i + 2) - z(i - 2))) * l.inv12h;
  } else if (l.boundary == Boundary::open) {
    auto v = [&](std::int64_t j) { return l.f[base + static_cast<std::size_t>(j) * l.stride] - f0; };
    const std::int64_t n = l.count;
    if (i == 0) return (48.0 * v(1) - 36.0 * v(2) + 16.0 * v(3) - 3.0 * v(4)) * l.inv12h;
    if (i == 1) return (-3.0 * v(0) + 18.0 * v(2) - 6.0 * v(3) + v(4)) * l.inv12h;
    if (i == n - 1)
      return -(48.0 * v(n - 2) - 36.0 * v(n - 3) + 16.0 * v(n - 4) - 3.0 * v(n - 5)) * l.inv12h;
    if (i == n - 2)
      return -(-3.0 * v(n - 1) + 18.0 * v(n - 3) - 6.0 * v(n - 4) + v(n - 5)) * l.inv12h;
  }
  const double d1 = at(l, base, i + 1) - at(l, base, i - 1);
  const double d2 = at(l, base, i + 2) - at(l, base, i - 2);
  return (8.0 * d1 - d2) * l.inv12h;
}

inline double filter_at(const Line& l, std::size_t p, double strength) {
  const std::int64_t i = static_cast<std::int64_t>((p / l.stride) % static_cast<std::size_t>(l.count));
  const std::size_t base = p - static_cast<std::size_t>(i) * l.stride;
  const double f0 = l.f[p];
  if (l.boundary == Boundary::open && (i < 3 || i > l.count - 4)) {
    // Fourth difference on the five points nearest the end, at four times
    // the strength (the same damping of the Nyquist mode); exact for cubics.
    const bool left = i < 3;
    const std::int64_t s = left ? 0 : l.count - 5;
    auto w = [&](std::int64_t j) { return l.f[base + static_cast<std::size_t>(s + j) * l.stride] - f0; };
    const double d4 = (w(0) + w(4)) - 4.0 * (w(1) + w(3)) + 6.0 * w(2);
    return f0 - 4.0 * strength * d4;
  }
  auto v = [&](std::int64_t k) { return at(l, base, i + k) - f0; };
  const double d6 = (v(-3) + v(3)) - 6.0 * (v(-2) + v(2)) + 15.0 * (v(-1) + v(1));
  return f0 + strength * d6;
}

Line make_line(const MetricChart& chart, std::span<const double> f, std::size_t axis, double seam,
               Closure closure = Closure::one_sided) {
  const Axis& ax = chart.axis(axis);
  require_stencil(ax);
  if (f.size() != chart.size()) throw PreconditionError("derivative: field size does not match chart");
  Line l{f.data(), chart.stride(axis), static_cast<std::int64_t>(ax.count), ax.boundary,
         ax.periodic() ? seam : 0.0, 1.0 / (12.0 * ax.spacing())};
  if (closure == Closure::sbp) {
    if (!ax.periodic() && ax.count < 8)
      throw StencilError("axis '" + ax.name + "' needs at least 8 points for the summation-by-parts stencil");
    l.sbp = true;
  }
  l.vanishing = closure == Closure::vanishing;
  return l;
}

}  // namespace

void require_stencil(const Axis& ax) {
  if (ax.boundary == Boundary::open && ax.count < 5)
    throw StencilError("open axis '" + ax.name + "' needs at least 5 points for the 4th-order stencil");
  if (ax.boundary == Boundary::reflecting && ax.count < 3)
    throw StencilError("reflecting axis '" + ax.name + "' needs at least 3 points");
}

namespace {
Line make_filter_line(const MetricChart& chart, std::span<const double> f, std::size_t axis, double seam,
                      double strength) {
  if (f.size() != chart.size()) throw PreconditionError("filter: field size does not match chart");
  if (!(strength >= 0.0 && strength <= 1.0 / 64.0)) throw PreconditionError("filter: strength must be in [0, 1/64]");
  const Axis& ax = chart.axis(axis);
  return Line{f.data(), chart.stride(axis), static_cast<std::int64_t>(ax.count), ax.boundary,
              ax.periodic() ? seam : 0.0, 0.0};
}
bool filter_applies(const Axis& ax) { return ax.periodic() ? ax.count > 1 : ax.count >= 7; }
}  // namespace

namespace {
Line make_weighted_line(const MetricChart& chart, std::span<const double> f, std::span<const double> log_weight,
                        double scale, std::size_t axis) {
  if (log_weight.size() != chart.size()) throw PreconditionError("weighted derivative: weight size does not match chart");
  const Axis& ax = chart.axis(axis);
  if (!ax.periodic() && ax.count < 8)
    throw StencilError("axis '" + ax.name + "' needs at least 8 points for the summation-by-parts stencil");
  Line l = make_line(chart, f, axis, 0.0);
  l.logw = log_weight.data();
  l.wscale = scale;
  return l;
}
}  // namespace

namespace reference {
void weighted_derivative(const MetricChart& chart, std::span<const double> f, std::span<const double> log_weight,
                         double scale, std::size_t axis, bool zero_flux, std::span<double> out) {
  const Line l = make_weighted_line(chart, f, log_weight, scale, axis);
  for (std::size_t p = 0; p < f.size(); ++p) out[p] = weighted_derivative_at(l, p, zero_flux);
}

void filter(const MetricChart& chart, std::span<const double> f, std::size_t axis, double seam_offset,
            double strength, std::span<double> out) {
  const Line l = make_filter_line(chart, f, axis, seam_offset, strength);
  const bool on = filter_applies(chart.axis(axis));
  for (std::size_t p = 0; p < f.size(); ++p) out[p] = on ? filter_at(l, p, strength) : f[p];
}

void derivative(const MetricChart& chart, std::span<const double> f, std::size_t axis,
                double seam_offset, std::span<double> out, Closure closure) {
  const Line l = make_line(chart, f, axis, seam_offset, closure);
  for (std::size_t p = 0; p < f.size(); ++p) out[p] = derivative_at(l, p);
}
}  // namespace reference

namespace omp {
void weighted_derivative(const MetricChart& chart, std::span<const double> f, std::span<const double> log_weight,
                         double scale, std::size_t axis, bool zero_flux, std::span<double> out) {
  const Line l = make_weighted_line(chart, f, log_weight, scale, axis);
  const std::int64_t n = static_cast<std::int64_t>(f.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < n; ++p) out[p] = weighted_derivative_at(l, static_cast<std::size_t>(p), zero_flux);
}

void filter(const MetricChart& chart, std::span<const double> f, std::size_t axis, double seam_offset,
            double strength, std::span<double> out) {
  const Line l = make_filter_line(chart, f, axis, seam_offset, strength);
  const bool on = filter_applies(chart.axis(axis));
  const std::int64_t n = static_cast<std::int64_t>(f.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < n; ++p)
    out[p] = on ? filter_at(l, static_cast<std::size_t>(p), strength) : f[static_cast<std::size_t>(p)];
}

void derivative(const MetricChart& chart, std::span<const double> f, std::size_t axis,
                double seam_offset, std::span<double> out, Closure closure) {
  const Line l = make_line(chart, f, axis, seam_offset, closure);
  const std::int64_t n = static_cast<std::int64_t>(f.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < n; ++p) out[p] = derivative_at(l, static_cast<std::size_t>(p));
}
}  // namespace omp

void derivative(const MetricChart& chart, std::span<const double> f, std::size_t axis,
                double seam_offset, std::span<double> out, Exec exec, Closure closure) {
  if (exec == Exec::serial)
    reference::derivative(chart, f, axis, seam_offset, out, closure);
  else
    omp::derivative(chart, f, axis, seam_offset, out, closure);
}

void weighted_derivative(const MetricChart& chart, std::span<const double> f, std::span<const double> log_weight,
                         double scale, std::size_t axis, bool zero_flux, std::span<double> out, Exec exec) {
  if (exec == Exec::serial)
    reference::weighted_derivative(chart, f, log_weight, scale, axis, zero_flux, out);
  else
    omp::weighted_derivative(chart, f, log_weight, scale, axis, zero_flux, out);
}

void filter(const MetricChart& chart, std::span<const double> f, std::size_t axis, double seam_offset,
            double strength, std::span<double> out, Exec exec) {
  if (exec == Exec::serial)
    reference::filter(chart, f, axis, seam_offset, strength, out);
  else
    omp::filter(chart, f, axis, seam_offset, strength, out);
}

}  // namespace cqg::kernels
