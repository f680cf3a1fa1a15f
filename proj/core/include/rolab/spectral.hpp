#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rolab/numeric.hpp"
#include "rolab/tower.hpp"

namespace rolab::spectral {

using tower::CorrelationSequence;

struct MinEigenEstimate {
  Real value;
  Real radius;  // rigorous interval half-width from the entry error bounds
};

/// Smallest eigenvalue of the (window+1)^2 Toeplitz matrix of the sequence;
/// nonnegative (within radius) iff the sequence is a moment sequence of a
/// positive measure at this window.
MinEigenEstimate check_positive_definite(const CorrelationSequence& c, i64 window);

struct SpectralEstimate {
  i64 order = 0;
  i64 grid = 0;
  std::vector<Real> density;
  Real eps_est;       // input error mass after the kernel weights
  Rat c0;
  std::string provenance;
};

/// Nonnegativity-preserving kernel smoothing of the sequence, evaluated on a
/// uniform circle grid (grid >= 2*order-1 keeps the evaluation alias-free).
SpectralEstimate fejer_density(const CorrelationSequence& c, i64 order, i64 grid);

/// Entry-wise n-th power: the coefficients of the n-fold convolution.
CorrelationSequence convolution_power(const CorrelationSequence& c, i64 n);

/// Entry-wise w1*c1 + w2*c2 over a common range.
CorrelationSequence mixture(const CorrelationSequence& c1, const CorrelationSequence& c2,
                            const Rat& w1, const Rat& w2);

/// Divides through by c(0); requires an exact, positive c(0).
CorrelationSequence normalized(const CorrelationSequence& c);

/// Hellinger affinity of two density estimates on a shared grid, in [0, 1].
/// Values near 0 are finite-resolution evidence of mutual singularity.
Real affinity(const SpectralEstimate& e1, const SpectralEstimate& e2);

/// affinity(fejer(c^n, r), fejer(c^m, r)) for each resolution r.
std::vector<Real> overlap_trend(const CorrelationSequence& c, i64 n, i64 m,
                                const std::vector<i64>& resolutions, i64 grid_factor = 4);

/// Zero-mean combination of the levels of one stage with small pseudo-random
/// rational coefficients. Deterministic for a given seed, independent of the
/// platform; the seed belongs in any report derived from it.
tower::StepFn random_zero_mean(const tower::Construction& c, i64 stage, std::uint64_t seed);

}  // namespace rolab::spectral
