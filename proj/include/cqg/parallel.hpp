#pragma once

#include <string>

namespace cqg {

// Execution policy for the data-parallel kernels. `serial` runs the plain
// reference loops; `parallel` runs the OpenMP versions. Both produce
// bitwise-identical results because every output element is computed by the
// same fixed-order expression.
enum class Exec { serial, parallel };

int max_threads();
std::string openmp_version();

}  // namespace cqg
