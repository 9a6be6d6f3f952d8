#include "cqg/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <exception>
#include <sstream>

#include "cqg/error.hpp"
#include "cqg/stencil.hpp"

namespace cqg {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double fd_step(double q) { return 1e-3 * std::max(1.0, std::abs(q)); }

// dg[d*n*n + i*n + j] = d_d g_ij at q, fourth-order central difference of the callback.
std::vector<double> metric_derivatives_at(const MetricChart& chart, std::span<const double> q) {
  const std::size_t n = chart.dim();
  const std::size_t nn = n * n;
  std::vector<double> dg(n * nn), gp1(nn), gm1(nn), gp2(nn), gm2(nn);
  std::vector<double> x(q.begin(), q.end());
  for (std::size_t d = 0; d < n; ++d) {
    const double h = fd_step(q[d]);
    x[d] = q[d] + h;
    chart.metric_at(x, gp1);
    x[d] = q[d] - h;
    chart.metric_at(x, gm1);
    x[d] = q[d] + 2 * h;
    chart.metric_at(x, gp2);
    x[d] = q[d] - 2 * h;
    chart.metric_at(x, gm2);
    x[d] = q[d];
    for (std::size_t k = 0; k < nn; ++k)
      dg[d * nn + k] = (8.0 * (gp1[k] - gm1[k]) - (gp2[k] - gm2[k])) / (12.0 * h);
  }
  return dg;
}

ChristoffelSymbols assemble_christoffel(std::size_t n, std::span<const double> g_inv, std::span<const double> dg) {
  const std::size_t nn = n * n;
  ChristoffelSymbols gam{n, std::vector<double>(n * nn, 0.0)};
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < n; ++l)
          s += g_inv[k * n + l] * (dg[i * nn + l * n + j] + dg[j * nn + l * n + i] - dg[l * nn + i * n + j]);
        gam.data[(k * n + i) * n + j] = 0.5 * s;
        gam.data[(k * n + j) * n + i] = 0.5 * s;
      }
  return gam;
}

std::vector<double> invert(std::span<const double> g, std::size_t n) {
  Eigen::Map<const RowMat> gm(g.data(), n, n);
  Eigen::LLT<Eigen::MatrixXd> llt(gm);
  if (llt.info() != Eigen::Success) throw DefinitenessError("metric not positive definite");
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = 0.5 * (inv(i, j) + inv(j, i));
  return out;
}

// R = g^ij R_ij from Gamma and dGamma[m][k][i][j] = d_m Gamma^k_ij.
double scalar_curvature(std::size_t n, std::span<const double> g_inv, const std::vector<double>& gam,
                        const std::vector<double>& dgam) {
  const std::size_t nn = n * n, nnn = nn * n;
  auto G = [&](std::size_t k, std::size_t i, std::size_t j) { return gam[(k * n + i) * n + j]; };
  auto dG = [&](std::size_t m, std::size_t k, std::size_t i, std::size_t j) {
    return dgam[m * nnn + (k * n + i) * n + j];
  };
  double r = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double rij = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        rij += dG(k, k, i, j) - dG(j, k, i, k);
        for (std::size_t l = 0; l < n; ++l) rij += G(k, k, l) * G(l, i, j) - G(k, j, l) * G(l, i, k);
      }
      r += g_inv[i * n + j] * rij;
    }
  return r;
}

// All Gamma^k_ij on the grid from grid derivatives of the sampled metric.
std::vector<double> christoffel_field_sampled(const MetricChart& chart, Exec exec) {
  const std::size_t n = chart.dim(), nn = n * n, nnn = nn * n, size = chart.size();
  std::vector<double> dg(size * nnn);  // [p][d][i][j]
  std::vector<double> comp(size), dcomp(size);
  const auto& g = chart.metric_samples();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      for (std::size_t p = 0; p < size; ++p) comp[p] = g[p * nn + i * n + j];
      for (std::size_t d = 0; d < n; ++d) {
        kernels::derivative(chart, comp, d, 0.0, dcomp, exec);
        for (std::size_t p = 0; p < size; ++p) {
          dg[p * nnn + d * nn + i * n + j] = dcomp[p];
          dg[p * nnn + d * nn + j * n + i] = dcomp[p];
        }
      }
    }
  std::vector<double> gam(size * nnn);
  for (std::size_t p = 0; p < size; ++p) {
    const auto c = assemble_christoffel(n, chart.inverse_metric(p), std::span<const double>(dg.data() + p * nnn, nnn));
    std::copy(c.data.begin(), c.data.end(), gam.begin() + static_cast<std::ptrdiff_t>(p * nnn));
  }
  return gam;
}

void require_positive(const ScalarField& rho) {
  for (std::size_t p = 0; p < rho.size(); ++p)
    if (!(rho.values[p] > 0.0) || !std::isfinite(rho.values[p])) {
      std::ostringstream os;
      os << "density must be positive and finite; rho[" << p << "] = " << rho.values[p];
      throw DomainError(os.str());
    }
}

void require_weyl_dim(const MetricChart& chart) {
  if (chart.dim() <= 2) throw PreconditionError("Weyl curvature needs dimension n > 2");
}

// ln rho with masked points filled from their nearest unmasked neighbour.
struct MaskedLog {
  ScalarField u;
  std::vector<char> masked;
  std::vector<std::size_t> source;
  bool any_masked = false;
};

MaskedLog masked_log(const ScalarField& rho, double floor_rel) {
  require_positive(rho);
  const double rmax = *std::max_element(rho.values.begin(), rho.values.end());
  const double floor = floor_rel * rmax;
  MaskedLog m{ScalarField(rho.chart), std::vector<char>(rho.size(), 0), {}, false};
  for (std::size_t p = 0; p < rho.size(); ++p)
    if (rho.values[p] < floor) {
      m.masked[p] = 1;
      m.any_masked = true;
    }
  m.source = m.any_masked ? nearest_unmasked(*rho.chart, m.masked) : std::vector<std::size_t>{};
  for (std::size_t p = 0; p < rho.size(); ++p)
    m.u.values[p] = std::log(rho.values[m.any_masked ? m.source[p] : p]);
  return m;
}

}  // namespace

std::vector<std::size_t> nearest_unmasked(const MetricChart& chart, const std::vector<char>& masked) {
  const std::size_t size = chart.size(), n = chart.dim();
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::vector<std::size_t> src(size, none);
  std::deque<std::size_t> queue;
  for (std::size_t p = 0; p < size; ++p)
    if (!masked[p]) {
      src[p] = p;
      queue.push_back(p);
    }
  if (queue.empty()) throw DomainError("every grid point is below the density floor");
  std::vector<std::size_t> idx(n);
  while (!queue.empty()) {
    const std::size_t p = queue.front();
    queue.pop_front();
    chart.unravel(p, idx);
    for (std::size_t d = 0; d < n; ++d) {
      const Axis& ax = chart.axis(d);
      for (int dir : {-1, 1}) {
        std::int64_t j = static_cast<std::int64_t>(idx[d]) + dir;
        const auto cnt = static_cast<std::int64_t>(ax.count);
        if (j < 0 || j >= cnt) {
          if (!ax.periodic()) continue;
          j = (j + cnt) % cnt;
        }
        const std::size_t q = p + static_cast<std::size_t>(j) * chart.stride(d) - idx[d] * chart.stride(d);
        if (src[q] == none) {
          src[q] = src[p];
          queue.push_back(q);
        }
      }
    }
  }
  return src;
}

ChristoffelSymbols christoffel_at(const MetricChart& chart, std::span<const double> q) {
  if (!chart.has_analytic_metric()) throw PreconditionError("christoffel_at needs an analytic metric");
  const std::size_t n = chart.dim();
  std::vector<double> g(n * n);
  chart.metric_at(q, g);
  const auto g_inv = invert(g, n);
  const auto dg = metric_derivatives_at(chart, q);
  return assemble_christoffel(n, g_inv, dg);
}

ChristoffelSymbols christoffel(const MetricChart& chart, std::span<const std::size_t> point) {
  const std::size_t n = chart.dim();
  if (point.size() != n) throw PreconditionError("christoffel: point has wrong dimension");
  for (std::size_t d = 0; d < n; ++d)
    if (point[d] >= chart.axis(d).count) throw PreconditionError("christoffel: point outside grid");
  const std::size_t p = chart.ravel(point);
  if (chart.has_analytic_metric()) {
    const auto q = chart.coords(p);
    const auto dg = metric_derivatives_at(chart, q);
    return assemble_christoffel(n, chart.inverse_metric(p), dg);
  }
  const std::size_t nn = n * n;
  std::vector<double> dg(n * nn, 0.0);
  std::vector<double> comp(chart.size()), dcomp(chart.size());
  const auto& g = chart.metric_samples();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      for (std::size_t s = 0; s < chart.size(); ++s) comp[s] = g[s * nn + i * n + j];
      for (std::size_t d = 0; d < n; ++d) {
        kernels::derivative(chart, comp, d, 0.0, dcomp, Exec::serial);
        dg[d * nn + i * n + j] = dg[d * nn + j * n + i] = dcomp[p];
      }
    }
  return assemble_christoffel(n, chart.inverse_metric(p), dg);
}

ScalarField riemann_scalar(const ChartPtr& chart, Exec exec) {
  ScalarField out(chart, 0.0);
  if (chart->constant_metric()) return out;
  const std::size_t n = chart->dim(), nn = n * n, nnn = nn * n, size = chart->size();

  if (chart->has_analytic_metric()) {
    auto at_point = [&](std::size_t p) {
      std::vector<double> q = chart->coords(p);
      const auto gam = christoffel_at(*chart, q).data;
      std::vector<double> dgam(n * nnn);
      for (std::size_t m = 0; m < n; ++m) {
        const double h = 2.0 * fd_step(q[m]);
        const double q0 = q[m];
        q[m] = q0 + h;
        const auto p1 = christoffel_at(*chart, q).data;
        q[m] = q0 - h;
        const auto m1 = christoffel_at(*chart, q).data;
        q[m] = q0 + 2 * h;
        const auto p2 = christoffel_at(*chart, q).data;
        q[m] = q0 - 2 * h;
        const auto m2 = christoffel_at(*chart, q).data;
        q[m] = q0;
        for (std::size_t k = 0; k < nnn; ++k)
          dgam[m * nnn + k] = (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (12.0 * h);
      }
      return scalar_curvature(n, chart->inverse_metric(p), gam, dgam);
    };
    const auto count = static_cast<std::int64_t>(size);
    std::exception_ptr failure;
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::int64_t ps = 0; ps < count; ++ps) {
      try {
        out.values[static_cast<std::size_t>(ps)] = at_point(static_cast<std::size_t>(ps));
      } catch (...) {
#pragma omp critical(cqg_riemann_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
  }

  const auto gam = christoffel_field_sampled(*chart, exec);
  std::vector<double> dgam(size * n * nnn);  // [p][m][k][i][j]
  std::vector<double> comp(size), dcomp(size);
  for (std::size_t c = 0; c < nnn; ++c) {
    for (std::size_t p = 0; p < size; ++p) comp[p] = gam[p * nnn + c];
    for (std::size_t m = 0; m < n; ++m) {
      kernels::derivative(*chart, comp, m, 0.0, dcomp, exec);
      for (std::size_t p = 0; p < size; ++p) dgam[p * n * nnn + m * nnn + c] = dcomp[p];
    }
  }
  for (std::size_t p = 0; p < size; ++p) {
    const std::vector<double> gp(gam.begin() + static_cast<std::ptrdiff_t>(p * nnn),
                                 gam.begin() + static_cast<std::ptrdiff_t>((p + 1) * nnn));
    const std::vector<double> dp(dgam.begin() + static_cast<std::ptrdiff_t>(p * n * nnn),
                                 dgam.begin() + static_cast<std::ptrdiff_t>((p + 1) * n * nnn));
    out.values[p] = scalar_curvature(n, chart->inverse_metric(p), gp, dp);
  }
  return out;
}

std::vector<ScalarField> gradient(const ScalarField& f, std::span<const double> seam_offsets, Exec exec) {
  const auto& chart = *f.chart;
  std::vector<ScalarField> out;
  out.reserve(chart.dim());
  for (std::size_t d = 0; d < chart.dim(); ++d) {
    ScalarField df(f.chart);
    const double seam = seam_offsets.empty() ? 0.0 : seam_offsets[d];
    kernels::derivative(chart, f.values, d, seam, df.values, exec);
    out.push_back(std::move(df));
  }
  return out;
}

ScalarField divergence(const std::vector<ScalarField>& v, Exec exec) {
  if (v.empty()) throw PreconditionError("divergence: empty vector field");
  const ChartPtr& chart = v.front().chart;
  const std::size_t n = chart->dim(), size = chart->size();
  if (v.size() != n) throw PreconditionError("divergence: component count != dimension");
  ScalarField out(chart, 0.0);
  std::vector<double> flux(size), dflux(size);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < size; ++p) flux[p] = chart->sqrt_det(p) * v[i].values[p];
    kernels::derivative(*chart, flux, i, 0.0, dflux, exec);
    for (std::size_t p = 0; p < size; ++p) out.values[p] += dflux[p];
  }
  for (std::size_t p = 0; p < size; ++p) out.values[p] /= chart->sqrt_det(p);
  return out;
}

ScalarField laplace_beltrami(const ScalarField& f, std::span<const double> seam_offsets, Exec exec) {
  const ChartPtr& chart = f.chart;
  const std::size_t n = chart->dim(), size = chart->size();
  const auto grad = gradient(f, seam_offsets, exec);
  std::vector<ScalarField> up(n, ScalarField(chart, 0.0));
  for (std::size_t p = 0; p < size; ++p) {
    const auto gi = chart->inverse_metric(p);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += gi[i * n + j] * grad[j].values[p];
      up[i].values[p] = s;
    }
  }
  return divergence(up, exec);
}

double weyl_ratio(std::size_t n) {
  if (n <= 2) throw PreconditionError("Weyl curvature needs dimension n > 2");
  return static_cast<double>(n - 1) / static_cast<double>(n - 2);
}

double default_xi(std::size_t n) {
  if (n <= 2) throw PreconditionError("curvature coupling needs dimension n > 2");
  return static_cast<double>(n - 2) / (8.0 * static_cast<double>(n - 1));
}

ScalarField weyl_curvature_from_log(const ScalarField& log_rho, const ScalarField& riemann, Exec exec) {
  const ChartPtr& chart = log_rho.chart;
  require_weyl_dim(*chart);
  const std::size_t n = chart->dim(), size = chart->size();
  const double kappa = weyl_ratio(n);
  const auto grad = gradient(log_rho, {}, exec);
  const auto lap = laplace_beltrami(log_rho, {}, exec);
  ScalarField out(chart);
  for (std::size_t p = 0; p < size; ++p) {
    const auto gi = chart->inverse_metric(p);
    double g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g2 += gi[i * n + j] * grad[i].values[p] * grad[j].values[p];
    out.values[p] = riemann.values[p] - kappa * (2.0 * lap.values[p] + g2);
  }
  return out;
}

WeylVector weyl_vector(const ScalarField& rho, const WeylOptions& opts) {
  require_weyl_dim(*rho.chart);
  const auto m = masked_log(rho, opts.rho_floor_rel);
  const double c = -1.0 / static_cast<double>(rho.chart->dim() - 2);
  WeylVector out{rho.chart, gradient(m.u, {}, opts.exec)};
  for (auto& comp : out.components) {
    for (double& v : comp.values) v *= c;
    if (m.any_masked)
      for (std::size_t p = 0; p < comp.size(); ++p)
        if (m.masked[p]) comp.values[p] = comp.values[m.source[p]];
  }
  return out;
}

ScalarField weyl_curvature(const ScalarField& rho, const WeylOptions& opts) {
  require_weyl_dim(*rho.chart);
  const auto m = masked_log(rho, opts.rho_floor_rel);
  const auto rg = riemann_scalar(rho.chart, opts.exec);
  auto rw = weyl_curvature_from_log(m.u, rg, opts.exec);
  if (m.any_masked)
    for (std::size_t p = 0; p < rw.size(); ++p)
      if (m.masked[p]) rw.values[p] = rw.values[m.source[p]];
  return rw;
}

}  // namespace cqg
