#include "cqg/chart.hpp"

#include <Eigen/Dense>
#include <omp.h>

#include <cmath>
#include <sstream>

#include "cqg/error.hpp"
#include "cqg/parallel.hpp"

namespace cqg {

int max_threads() { return omp_get_max_threads(); }

std::string openmp_version() {
#ifdef _OPENMP
  return std::to_string(_OPENMP);
#else
  return "none";
#endif
}

std::string to_string(Boundary b) {
  switch (b) {
    case Boundary::periodic: return "periodic";
    case Boundary::open: return "open";
    case Boundary::reflecting: return "reflecting";
  }
  return "open";
}

Boundary boundary_from_string(const std::string& s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "open") return Boundary::open;
  if (s == "reflecting") return Boundary::reflecting;
  throw ConfigError("unknown boundary '" + s + "' (expected periodic|open|reflecting)");
}

double Axis::spacing() const noexcept {
  if (periodic()) return length() / static_cast<double>(count);
  return count > 1 ? length() / static_cast<double>(count - 1) : length();
}

ChartPtr MetricChart::analytic(std::vector<Axis> axes, MetricFn metric) {
  if (!metric) throw PreconditionError("analytic chart needs a metric callback");
  return ChartPtr(new MetricChart(std::move(axes), std::move(metric), {}));
}

ChartPtr MetricChart::sampled(std::vector<Axis> axes, std::vector<double> metric) {
  return ChartPtr(new MetricChart(std::move(axes), {}, std::move(metric)));
}

ChartPtr MetricChart::make(std::vector<Axis> axes, MetricFn metric, std::vector<double> samples) {
  if (metric) return analytic(std::move(axes), std::move(metric));
  return sampled(std::move(axes), std::move(samples));
}

ChartPtr MetricChart::euclidean(std::vector<Axis> axes) {
  const std::size_t n = axes.size();
  return analytic(std::move(axes), [n](std::span<const double>, std::span<double> g) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] = (i == j) ? 1.0 : 0.0;
  });
}

MetricChart::MetricChart(std::vector<Axis> axes, MetricFn metric_fn, std::vector<double> samples)
    : axes_(std::move(axes)), metric_fn_(std::move(metric_fn)) {
  const std::size_t n = axes_.size();
  if (n == 0) throw PreconditionError("chart needs at least one axis");
  for (const auto& ax : axes_) {
    if (ax.count == 0) throw PreconditionError("axis '" + ax.name + "' has zero points");
    if (!(ax.hi > ax.lo)) throw PreconditionError("axis '" + ax.name + "' needs hi > lo");
    if (!ax.periodic() && ax.count < 2)
      throw PreconditionError("non-periodic axis '" + ax.name + "' needs at least 2 points");
  }
  strides_.assign(n, 1);
  for (std::size_t d = n - 1; d > 0; --d) strides_[d - 1] = strides_[d] * axes_[d].count;
  size_ = strides_[0] * axes_[0].count;

  const std::size_t nn = n * n;
  if (metric_fn_) {
    g_.assign(size_ * nn, 0.0);
    std::vector<double> q(n);
    for (std::size_t p = 0; p < size_; ++p) {
      coords(p, q);
      metric_fn_(q, std::span<double>(g_.data() + p * nn, nn));
    }
  } else {
    if (samples.size() != size_ * nn) {
      std::ostringstream os;
      os << "sampled metric has " << samples.size() << " values, expected " << size_ * nn;
      throw PreconditionError(os.str());
    }
    g_ = std::move(samples);
  }

  g_inv_.assign(size_ * nn, 0.0);
  sqrt_det_.assign(size_, 0.0);
  constant_ = true;
  for (std::size_t p = 0; p < size_; ++p) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> g(
        g_.data() + p * nn, n, n);
    const double scale = g.cwiseAbs().maxCoeff();
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0)) {
      std::ostringstream os;
      os << "metric not symmetric at grid point " << p;
      throw DefinitenessError(os.str());
    }
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) {
      std::ostringstream os;
      os << "metric not positive definite at grid point " << p;
      throw DefinitenessError(os.str());
    }
    const Eigen::MatrixXd L = llt.matrixL();
    double sd = 1.0;
    for (std::size_t i = 0; i < n; ++i) sd *= L(i, i);
    if (!(sd > 0.0) || !std::isfinite(sd)) throw DefinitenessError("degenerate metric determinant");
    sqrt_det_[p] = sd;
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g_inv_[p * nn + i * n + j] = 0.5 * (inv(i, j) + inv(j, i));
    if (p > 0 && constant_) {
      for (std::size_t k = 0; k < nn; ++k)
        if (g_[p * nn + k] != g_[k]) {
          constant_ = false;
          break;
        }
    }
  }
}

void MetricChart::unravel(std::size_t flat, std::span<std::size_t> index) const {
  for (std::size_t d = 0; d < dim(); ++d) {
    index[d] = flat / strides_[d];
    flat -= index[d] * strides_[d];
  }
}

std::size_t MetricChart::ravel(std::span<const std::size_t> index) const {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < dim(); ++d) flat += index[d] * strides_[d];
  return flat;
}

void MetricChart::coords(std::size_t flat, std::span<double> q) const {
  for (std::size_t d = 0; d < dim(); ++d) {
    const std::size_t i = flat / strides_[d];
    flat -= i * strides_[d];
    q[d] = axes_[d].coord(i);
  }
}

std::vector<double> MetricChart::coords(std::size_t flat) const {
  std::vector<double> q(dim());
  coords(flat, q);
  return q;
}

void MetricChart::metric_at(std::span<const double> q, std::span<double> g) const {
  if (!metric_fn_) throw PreconditionError("metric_at needs an analytic metric");
  metric_fn_(q, g);
}

std::span<const double> MetricChart::metric(std::size_t flat) const {
  const std::size_t nn = dim() * dim();
  return {g_.data() + flat * nn, nn};
}

std::span<const double> MetricChart::inverse_metric(std::size_t flat) const {
  const std::size_t nn = dim() * dim();
  return {g_inv_.data() + flat * nn, nn};
}

ChartPtr MetricChart::without_axis(std::size_t d) const {
  if (d >= dim()) throw PreconditionError("without_axis: axis out of range");
  if (dim() < 2) throw PreconditionError("without_axis: cannot remove the only axis");
  std::vector<Axis> reduced;
  for (std::size_t a = 0; a < dim(); ++a)
    if (a != d) reduced.push_back(axes_[a]);
  const std::size_t n = dim();
  const std::size_t m = n - 1;
  std::vector<std::size_t> strides(m, 1);
  for (std::size_t a = m - 1; a > 0; --a) strides[a - 1] = strides[a] * reduced[a].count;
  const std::size_t rsize = strides[0] * reduced[0].count;
  std::vector<double> samples(rsize * m * m);
  std::vector<std::size_t> ridx(m), full(n);
  for (std::size_t p = 0; p < rsize; ++p) {
    std::size_t rem = p;
    for (std::size_t a = 0; a < m; ++a) {
      ridx[a] = rem / strides[a];
      rem -= ridx[a] * strides[a];
    }
    for (std::size_t a = 0, b = 0; a < n; ++a) full[a] = (a == d) ? 0 : ridx[b++];
    const auto g = metric(ravel(full));
    for (std::size_t i = 0, ri = 0; i < n; ++i) {
      if (i == d) continue;
      for (std::size_t j = 0, rj = 0; j < n; ++j) {
        if (j == d) continue;
        samples[p * m * m + ri * m + rj] = g[i * n + j];
        ++rj;
      }
      ++ri;
    }
  }
  return sampled(std::move(reduced), std::move(samples));
}

double MetricChart::min_spacing() const {
  double h = 0.0;
  for (const auto& ax : axes_) {
    if (ax.count < 2) continue;
    const double s = ax.spacing();
    if (h == 0.0 || s < h) h = s;
  }
  return h;
}

}  // namespace cqg
