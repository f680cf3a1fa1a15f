#include "rolab/spectral.hpp"

#include <boost/math/constants/constants.hpp>

#include <algorithm>
#include <random>

#include "rolab/linalg.hpp"

namespace rolab::spectral {

using boost::multiprecision::abs;
using boost::multiprecision::cos;
using boost::multiprecision::sqrt;

namespace {

void require_symmetric(const CorrelationSequence& c, const char* who) {
  if (c.k_min > 0 || c.k_max < 0) throw BadParameter(std::string(who) + ": range must contain 0");
  i64 reach = std::min(-c.k_min, c.k_max);
  for (i64 k = 1; k <= reach; ++k)
    if (c.at(k).value != c.at(-k).value)
      throw BadParameter(std::string(who) + ": sequence is not symmetric at lag " +
                         std::to_string(k));
}

std::vector<Real> cos_table(i64 grid) {
  const Real two_pi = 2 * boost::math::constants::pi<Real>();
  std::vector<Real> table(static_cast<std::size_t>(grid));
  for (i64 j = 0; j < grid; ++j)
    table[static_cast<std::size_t>(j)] = cos(two_pi * Real(j) / Real(grid));
  return table;
}

}  // namespace

MinEigenEstimate check_positive_definite(const CorrelationSequence& c, i64 window) {
  if (window < 0) throw BadParameter("window must be >= 0");
  if (window > c.k_max || -window < c.k_min)
    throw WindowTooLarge("window " + std::to_string(window) + " exceeds the available lags");
  require_symmetric(c, "positive-definite check");

  const std::size_t n = static_cast<std::size_t>(window + 1);
  linalg::SymMatrix m(n);
  Real radius = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Real row_err = 0;
    for (std::size_t j = 0; j < n; ++j) {
      i64 lag = static_cast<i64>(i) - static_cast<i64>(j);
      m.at(i, j) = to_real(c.at(lag).value);
      row_err += to_real(c.at(lag).error);
    }
    radius = std::max(radius, row_err);
  }
  linalg::EigenDecomposition eig = linalg::jacobi_eigen(std::move(m));
  return MinEigenEstimate{eig.values.front(), radius};
}

SpectralEstimate fejer_density(const CorrelationSequence& c, i64 order, i64 grid) {
  if (order < 1) throw BadParameter("order must be >= 1");
  i64 reach = std::min(-c.k_min, c.k_max);
  if (order - 1 > reach)
    throw ResolutionExceedsData("order " + std::to_string(order) + " needs lags up to " +
                                std::to_string(order - 1) + ", have " + std::to_string(reach));
  if (grid < 2 * order - 1)
    throw BadParameter("grid must be >= 2*order-1 to evaluate without aliasing");
  require_symmetric(c, "density estimate");

  std::vector<Real> cosines = cos_table(grid);
  SpectralEstimate est;
  est.order = order;
  est.grid = grid;
  est.c0 = c.at(0).value;
  est.provenance = c.base;

  Real eps = to_real(c.at(0).error);
  std::vector<Real> weighted(static_cast<std::size_t>(order));
  weighted[0] = to_real(c.at(0).value);
  for (i64 k = 1; k < order; ++k) {
    Rat w(order - k, order);
    weighted[static_cast<std::size_t>(k)] = to_real(w * c.at(k).value);
    eps += to_real(w * (c.at(k).error + c.at(-k).error));
  }
  est.eps_est = eps;

  est.density.assign(static_cast<std::size_t>(grid), Real(0));
  for (i64 g = 0; g < grid; ++g) {
    Real rho = weighted[0];
    for (i64 k = 1; k < order; ++k) {
      i64 idx = (k * g) % grid;
      rho += 2 * weighted[static_cast<std::size_t>(k)] * cosines[static_cast<std::size_t>(idx)];
    }
    est.density[static_cast<std::size_t>(g)] = rho;
  }
  return est;
}

CorrelationSequence convolution_power(const CorrelationSequence& c, i64 n) {
  if (n < 1) throw BadPower("convolution power must be >= 1");
  CorrelationSequence out = c;
  out.base = c.base + "^*" + std::to_string(n);
  if (n == 1) return out;
  for (auto& entry : out.entries) {
    Rat v = entry.value;
    Rat bound_base = abs(v) + entry.error;
    Rat power = 1;
    for (i64 i = 1; i < n; ++i) power *= bound_base;
    Rat new_value = 1;
    for (i64 i = 0; i < n; ++i) new_value *= v;
    entry.error = Rat(n) * power * entry.error;  // |x^n - y^n| <= n max^~(n-1) |x-y|
    entry.value = new_value;
  }
  return out;
}

CorrelationSequence mixture(const CorrelationSequence& c1, const CorrelationSequence& c2,
                            const Rat& w1, const Rat& w2) {
  if (c1.k_min != c2.k_min || c1.k_max != c2.k_max)
    throw RangeMismatch("mixture operands cover different lag ranges");
  CorrelationSequence out = c1;
  out.base = "(" + rational_string(w1) + ")*" + c1.base + "+(" + rational_string(w2) + ")*" +
             c2.base;
  for (std::size_t i = 0; i < out.entries.size(); ++i) {
    out.entries[i].value = w1 * c1.entries[i].value + w2 * c2.entries[i].value;
    out.entries[i].error = abs(w1) * c1.entries[i].error + abs(w2) * c2.entries[i].error;
  }
  return out;
}

CorrelationSequence normalized(const CorrelationSequence& c) {
  const tower::SeqEntry& zero = c.at(0);
  if (zero.error != 0) throw BadParameter("cannot normalize: c(0) carries an error bound");
  if (zero.value <= 0) throw BadParameter("cannot normalize: c(0) must be positive");
  CorrelationSequence out = c;
  out.base = c.base + "/c0";
  for (auto& entry : out.entries) {
    entry.value /= zero.value;
    entry.error /= zero.value;
  }
  return out;
}

Real affinity(const SpectralEstimate& e1, const SpectralEstimate& e2) {
  if (e1.order != e2.order || e1.grid != e2.grid)
    throw GridMismatch("affinity requires estimates of equal order and grid");
  const std::size_t n = e1.density.size();
  Real mass1 = 0, mass2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mass1 += std::max(e1.density[i], Real(0));
    mass2 += std::max(e2.density[i], Real(0));
  }
  if (mass1 <= 0 || mass2 <= 0) return Real(0);
  Real s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Real a = std::max(e1.density[i], Real(0));
    Real b = std::max(e2.density[i], Real(0));
    s += sqrt(a * b);
  }
  Real result = s / sqrt(mass1 * mass2);
  if (result < 0) result = 0;
  if (result > 1) result = 1;
  return result;
}

std::vector<Real> overlap_trend(const CorrelationSequence& c, i64 n, i64 m,
                                const std::vector<i64>& resolutions, i64 grid_factor) {
  if (n < 1 || m < 1) throw BadPower("convolution orders must be >= 1");
  if (grid_factor < 2) throw BadParameter("grid factor must be >= 2");
  CorrelationSequence cn = convolution_power(c, n);
  CorrelationSequence cm = convolution_power(c, m);
  std::vector<Real> out;
  out.reserve(resolutions.size());
  for (i64 r : resolutions) {
    SpectralEstimate en = fejer_density(cn, r, grid_factor * r);
    SpectralEstimate em = fejer_density(cm, r, grid_factor * r);
    out.push_back(affinity(en, em));
  }
  return out;
}

tower::StepFn random_zero_mean(const tower::Construction& c, i64 stage, std::uint64_t seed) {
  const tower::Stage& s = c.stage(stage);
  if (s.height > (i64(1) << 20)) throw OutOfRange("stage too deep for a dense random vector");
  std::mt19937_64 rng(seed);
  // Raw64 + modulo keeps the stream identical across standard libraries.
  auto draw = [&rng](std::uint64_t span) { return static_cast<i64>(rng() % span); };
  tower::StepFn f;
  f.stage = stage;
  f.construction = c.fingerprint();
  for (int attempt = 0; attempt < 64; ++attempt) {
    f.coeffs.assign(static_cast<std::size_t>(s.height), Rat(0));
    bool distinct = false;
    for (i64 i = 0; i < s.height; ++i) {
      i64 num = draw(19) - 9;
      i64 den = 1 + draw(4);
      f.coeffs[static_cast<std::size_t>(i)] = Rat(num, den);
      if (i > 0 && f.coeffs[static_cast<std::size_t>(i)] != f.coeffs[0]) distinct = true;
    }
    if (distinct || s.height == 1) break;
  }
  f.gamma = 0;
  f.rho = 0;
  return zero_mean(c, std::move(f));
}

}  // namespace rolab::spectral
