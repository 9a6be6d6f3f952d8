#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "cqg/chart.hpp"

namespace cqg {

// FFT-based derivatives on a chart with a constant metric. Every axis is
// treated as periodic with period count * spacing, which is exact for
// periodic axes and accurate on open axes when the field vanishes at both
// ends. Backed by FFTW (FFTW_ESTIMATE plans, so results are deterministic).
class SpectralOps {
 public:
  explicit SpectralOps(const MetricChart& chart);
  ~SpectralOps();
  SpectralOps(const SpectralOps&) = delete;
  SpectralOps& operator=(const SpectralOps&) = delete;

  // g^ij d_i d_j f
  void laplacian(std::span<const std::complex<double>> in, std::span<std::complex<double>> out);
  // d_axis f (Nyquist mode dropped)
  void derivative(std::span<const std::complex<double>> in, std::size_t axis, std::span<std::complex<double>> out);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cqg
