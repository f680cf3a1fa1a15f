#pragma once

#include <vector>

#include "rolab/numeric.hpp"

namespace rolab::linalg {

/// Row-major dense square matrix of high-precision reals.
struct SymMatrix {
  std::size_t n = 0;
  std::vector<Real> a;

  explicit SymMatrix(std::size_t size = 0) : n(size), a(size * size, Real(0)) {}
  Real& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
  const Real& at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

struct EigenDecomposition {
  std::vector<Real> values;               // ascending
  std::vector<std::vector<Real>> vectors; // vectors[i] pairs with values[i]
};

/// Cyclic Jacobi iteration. Intended for the small, often severely
/// ill-conditioned Gram and Toeplitz matrices this project produces; the
/// 100-bit arithmetic keeps relative cutoffs near 1e-24 meaningful.
EigenDecomposition jacobi_eigen(SymMatrix m, int max_sweeps = 64);

}  // namespace rolab::linalg
