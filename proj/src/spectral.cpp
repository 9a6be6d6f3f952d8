#include "cqg/spectral.hpp"

#include <fftw3.h>

#include <numbers>

#include "cqg/error.hpp"

namespace cqg {

struct SpectralOps::Impl {
  std::size_t size = 0;
  std::size_t n = 0;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> strides;
  std::vector<std::vector<double>> k;       // wavenumbers per axis
  std::vector<std::vector<double>> k_odd;   // same with the Nyquist mode zeroed
  std::vector<double> g_inv;
  fftw_complex* buf = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  ~Impl() {
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
    if (buf) fftw_free(buf);
  }

  void load(std::span<const std::complex<double>> in) {
    for (std::size_t p = 0; p < size; ++p) {
      buf[p][0] = in[p].real();
      buf[p][1] = in[p].imag();
    }
  }
  void store(std::span<std::complex<double>> out) const {
    const double scale = 1.0 / static_cast<double>(size);
    for (std::size_t p = 0; p < size; ++p) out[p] = {buf[p][0] * scale, buf[p][1] * scale};
  }
  std::size_t mode(std::size_t p, std::size_t d) const { return (p / strides[d]) % counts[d]; }
};

SpectralOps::SpectralOps(const MetricChart& chart) : impl_(std::make_unique<Impl>()) {
  if (!chart.constant_metric()) throw PreconditionError("spectral derivatives need a constant metric");
  auto& m = *impl_;
  m.n = chart.dim();
  m.size = chart.size();
  m.g_inv.assign(chart.inverse_metric(0).begin(), chart.inverse_metric(0).end());
  std::vector<int> dims(m.n);
  for (std::size_t d = 0; d < m.n; ++d) {
    const Axis& ax = chart.axis(d);
    m.counts.push_back(ax.count);
    m.strides.push_back(chart.stride(d));
    dims[d] = static_cast<int>(ax.count);
    const double period = static_cast<double>(ax.count) * ax.spacing();
    std::vector<double> kd(ax.count), ko(ax.count);
    for (std::size_t j = 0; j < ax.count; ++j) {
      const auto jj = static_cast<double>(j);
      const double c = static_cast<double>(ax.count);
      kd[j] = 2.0 * std::numbers::pi * (2 * j <= ax.count ? jj : jj - c) / period;
      ko[j] = (ax.count % 2 == 0 && 2 * j == ax.count) ? 0.0 : kd[j];
    }
    m.k.push_back(std::move(kd));
    m.k_odd.push_back(std::move(ko));
  }
  m.buf = fftw_alloc_complex(m.size);
  m.forward = fftw_plan_dft(static_cast<int>(m.n), dims.data(), m.buf, m.buf, FFTW_FORWARD, FFTW_ESTIMATE);
  m.backward = fftw_plan_dft(static_cast<int>(m.n), dims.data(), m.buf, m.buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!m.forward || !m.backward) throw Error("FFTW planning failed");
}

SpectralOps::~SpectralOps() = default;

void SpectralOps::laplacian(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) {
  auto& m = *impl_;
  m.load(in);
  fftw_execute(m.forward);
  std::vector<double> kv(m.n);
  for (std::size_t p = 0; p < m.size; ++p) {
    for (std::size_t d = 0; d < m.n; ++d) kv[d] = m.k[d][m.mode(p, d)];
    double k2 = 0.0;
    for (std::size_t i = 0; i < m.n; ++i)
      for (std::size_t j = 0; j < m.n; ++j) k2 += m.g_inv[i * m.n + j] * kv[i] * kv[j];
    m.buf[p][0] *= -k2;
    m.buf[p][1] *= -k2;
  }
  fftw_execute(m.backward);
  m.store(out);
}

void SpectralOps::derivative(std::span<const std::complex<double>> in, std::size_t axis,
                             std::span<std::complex<double>> out) {
  auto& m = *impl_;
  m.load(in);
  fftw_execute(m.forward);
  for (std::size_t p = 0; p < m.size; ++p) {
    const double kd = m.k_odd[axis][m.mode(p, axis)];
    const double re = m.buf[p][0], im = m.buf[p][1];
    m.buf[p][0] = -kd * im;
    m.buf[p][1] = kd * re;
  }
  fftw_execute(m.backward);
  m.store(out);
}

}  // namespace cqg
