#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cqg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Finite-difference stencil does not fit the grid (axis too short).
class StencilError : public Error {
 public:
  using Error::Error;
};

// Metric not symmetric positive definite at some grid point.
class DefinitenessError : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of a formula (nonpositive density, etc.).
class DomainError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class QuantizationError : public Error {
 public:
  using Error::Error;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CflError : public Error {
 public:
  CflError(const std::string& what, double suggested_dt)
      : Error(what), suggested_dt_(suggested_dt) {}
  double suggested_dt() const noexcept { return suggested_dt_; }

 private:
  double suggested_dt_;
};

// gamma_rate evaluated on the polar axis of the Euler chart (beta = 0 or pi).
class PoleError : public DomainError {
 public:
  enum class Kind {
    finite,     // 0/0 with a finite one-sided limit
    divergent,  // numerator nonzero: the rate tends to +infinity
  };
  PoleError(const std::string& what, Kind kind, double limit)
      : DomainError(what), kind_(kind), limit_(limit) {}
  Kind kind() const noexcept { return kind_; }
  // One-sided limit of the rate (+infinity for divergent poles).
  double limit() const noexcept { return limit_; }

 private:
  Kind kind_;
  double limit_;
};

// Phase unwrapping hit a zero of the wave function or a phase vortex.
class BranchAmbiguityError : public Error {
 public:
  BranchAmbiguityError(const std::string& what, std::vector<std::size_t> nodal_points,
                       std::vector<std::size_t> vortex_plaquettes)
      : Error(what),
        nodal_points_(std::move(nodal_points)),
        vortex_plaquettes_(std::move(vortex_plaquettes)) {}

  // Flat grid indices of points where |psi|^2 fell below the floor.
  const std::vector<std::size_t>& nodal_points() const noexcept { return nodal_points_; }
  // Flat index of the lower corner of every plaquette with nonzero phase residue.
  const std::vector<std::size_t>& vortex_plaquettes() const noexcept { return vortex_plaquettes_; }

 private:
  std::vector<std::size_t> nodal_points_;
  std::vector<std::size_t> vortex_plaquettes_;
};

}  // namespace cqg
