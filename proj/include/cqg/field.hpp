#pragma once

#include <complex>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "cqg/chart.hpp"

namespace cqg {

using cplx = std::complex<double>;

// Real field sampled on every grid point of a chart (row-major).
struct ScalarField {
  ChartPtr chart;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(ChartPtr c, double fill = 0.0);
  ScalarField(ChartPtr c, std::vector<double> v);

  std::size_t size() const noexcept { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  static ScalarField sample(ChartPtr c, const std::function<double(std::span<const double>)>& f);
};

struct ComplexField {
  ChartPtr chart;
  std::vector<cplx> values;

  ComplexField() = default;
  explicit ComplexField(ChartPtr c, cplx fill = {});
  ComplexField(ChartPtr c, std::vector<cplx> v);

  std::size_t size() const noexcept { return values.size(); }
  cplx& operator[](std::size_t i) { return values[i]; }
  const cplx& operator[](std::size_t i) const { return values[i]; }

  static ComplexField sample(ChartPtr c, const std::function<cplx(std::span<const double>)>& f);
};

// Trapezoid weights of the measure sqrt(g) d^n q; periodic axes get uniform
// weights, open/reflecting axes half weights at both ends.
std::vector<double> quadrature_weights(const MetricChart& chart);
double integrate(const ScalarField& f);

// Field CSV: header "<axis names...>,value", then one row per grid point in
// row-major order with coordinates and value printed with 17 significant
// digits.
void write_csv(const ScalarField& f, std::ostream& os);
ScalarField read_csv(ChartPtr chart, std::istream& is);
void write_csv_file(const ScalarField& f, const std::string& path);
ScalarField read_csv_file(ChartPtr chart, const std::string& path);

}  // namespace cqg
