#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cqg {

enum class Boundary {
  periodic,    // wraps; spacing = length / count
  open,        // one-sided stencils at the ends
  reflecting,  // even mirror about the end points
};

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

struct Axis {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  std::size_t count = 1;
  Boundary boundary = Boundary::open;

  bool periodic() const noexcept { return boundary == Boundary::periodic; }
  double length() const noexcept { return hi - lo; }
  double spacing() const noexcept;
  double coord(std::size_t i) const noexcept { return lo + static_cast<double>(i) * spacing(); }
};

// Writes the symmetric n x n metric g_ij at coordinates q into g (row-major).
using MetricFn = std::function<void(std::span<const double> q, std::span<double> g)>;

class MetricChart;
using ChartPtr = std::shared_ptr<const MetricChart>;

// Coordinate chart on a uniform tensor-product grid together with its metric
// tensor. The metric, its inverse and sqrt(det g) are cached per grid point.
// Flat indices are row-major: axis 0 varies slowest.
class MetricChart {
 public:
  // Analytic metric given by a callback.
  static ChartPtr analytic(std::vector<Axis> axes, MetricFn metric);
  // Sampled metric: size() blocks of n*n values in row-major grid order.
  static ChartPtr sampled(std::vector<Axis> axes, std::vector<double> metric);
  // Both given: the analytic callback wins, the samples are ignored.
  static ChartPtr make(std::vector<Axis> axes, MetricFn metric, std::vector<double> samples);
  static ChartPtr euclidean(std::vector<Axis> axes);

  std::size_t dim() const noexcept { return axes_.size(); }
  std::size_t size() const noexcept { return size_; }
  const std::vector<Axis>& axes() const noexcept { return axes_; }
  const Axis& axis(std::size_t d) const { return axes_.at(d); }
  std::size_t stride(std::size_t d) const { return strides_.at(d); }

  void unravel(std::size_t flat, std::span<std::size_t> index) const;
  std::size_t ravel(std::span<const std::size_t> index) const;
  void coords(std::size_t flat, std::span<double> q) const;
  std::vector<double> coords(std::size_t flat) const;

  bool has_analytic_metric() const noexcept { return static_cast<bool>(metric_fn_); }
  // Evaluates the metric at arbitrary coordinates (analytic charts only).
  void metric_at(std::span<const double> q, std::span<double> g) const;

  std::span<const double> metric(std::size_t flat) const;
  std::span<const double> inverse_metric(std::size_t flat) const;
  double sqrt_det(std::size_t flat) const { return sqrt_det_[flat]; }
  const std::vector<double>& metric_samples() const noexcept { return g_; }

  // True when g_ij is the same at every grid point.
  bool constant_metric() const noexcept { return constant_; }

  // Chart with axis `d` removed; the metric block is taken from the slice at
  // index 0 along `d` and stored sampled.
  ChartPtr without_axis(std::size_t d) const;

  double min_spacing() const;

 private:
  MetricChart(std::vector<Axis> axes, MetricFn metric_fn, std::vector<double> samples);

  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
  MetricFn metric_fn_;
  std::vector<double> g_;
  std::vector<double> g_inv_;
  std::vector<double> sqrt_det_;
  bool constant_ = false;
};

}  // namespace cqg
