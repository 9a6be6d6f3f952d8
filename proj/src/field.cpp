#include "cqg/field.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "cqg/error.hpp"

namespace cqg {

ScalarField::ScalarField(ChartPtr c, double fill) : chart(std::move(c)) {
  values.assign(chart->size(), fill);
}

ScalarField::ScalarField(ChartPtr c, std::vector<double> v) : chart(std::move(c)), values(std::move(v)) {
  if (values.size() != chart->size()) throw PreconditionError("field size does not match chart");
}

ScalarField ScalarField::sample(ChartPtr c, const std::function<double(std::span<const double>)>& f) {
  ScalarField out(c);
  std::vector<double> q(c->dim());
  for (std::size_t p = 0; p < c->size(); ++p) {
    c->coords(p, q);
    out.values[p] = f(q);
  }
  return out;
}

ComplexField::ComplexField(ChartPtr c, cplx fill) : chart(std::move(c)) {
  values.assign(chart->size(), fill);
}

ComplexField::ComplexField(ChartPtr c, std::vector<cplx> v) : chart(std::move(c)), values(std::move(v)) {
  if (values.size() != chart->size()) throw PreconditionError("field size does not match chart");
}

ComplexField ComplexField::sample(ChartPtr c, const std::function<cplx(std::span<const double>)>& f) {
  ComplexField out(c);
  std::vector<double> q(c->dim());
  for (std::size_t p = 0; p < c->size(); ++p) {
    c->coords(p, q);
    out.values[p] = f(q);
  }
  return out;
}

std::vector<double> quadrature_weights(const MetricChart& chart) {
  const std::size_t n = chart.dim();
  std::vector<std::vector<double>> axis_w(n);
  for (std::size_t d = 0; d < n; ++d) {
    const Axis& ax = chart.axis(d);
    const double h = ax.spacing();
    axis_w[d].assign(ax.count, h);
    if (!ax.periodic()) {
      axis_w[d].front() *= 0.5;
      axis_w[d].back() *= 0.5;
    }
  }
  std::vector<double> w(chart.size());
  std::vector<std::size_t> idx(n);
  for (std::size_t p = 0; p < chart.size(); ++p) {
    chart.unravel(p, idx);
    double v = chart.sqrt_det(p);
    for (std::size_t d = 0; d < n; ++d) v *= axis_w[d][idx[d]];
    w[p] = v;
  }
  return w;
}

double integrate(const ScalarField& f) {
  const auto w = quadrature_weights(*f.chart);
  double sum = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) sum += w[p] * f.values[p];
  return sum;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_csv(const ScalarField& f, std::ostream& os) {
  const auto& chart = *f.chart;
  for (std::size_t d = 0; d < chart.dim(); ++d) os << chart.axis(d).name << ',';
  os << "value\n";
  std::vector<double> q(chart.dim());
  for (std::size_t p = 0; p < chart.size(); ++p) {
    chart.coords(p, q);
    for (double c : q) os << fmt17(c) << ',';
    os << fmt17(f.values[p]) << '\n';
  }
}

ScalarField read_csv(ChartPtr chart, std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("field CSV: missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() != chart->dim() + 1 || header.back() != "value")
    throw ConfigError("field CSV: header must list " + std::to_string(chart->dim()) +
                      " axis columns followed by 'value'");
  ScalarField out(chart);
  std::vector<double> q(chart->dim());
  std::size_t p = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (p >= chart->size()) throw ConfigError("field CSV: more rows than grid points");
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != chart->dim() + 1)
      throw ConfigError("field CSV: row " + std::to_string(p) + " has wrong column count");
    chart->coords(p, q);
    for (std::size_t d = 0; d < chart->dim(); ++d) {
      const double tol = 1e-9 * std::max(1.0, std::abs(q[d]));
      if (std::abs(row[d] - q[d]) > tol)
        throw ConfigError("field CSV: row " + std::to_string(p) + " coordinates off grid");
    }
    out.values[p++] = row.back();
  }
  if (p != chart->size()) throw ConfigError("field CSV: fewer rows than grid points");
  return out;
}

void write_csv_file(const ScalarField& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  write_csv(f, os);
}

ScalarField read_csv_file(ChartPtr chart, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  return read_csv(std::move(chart), is);
}

}  // namespace cqg
