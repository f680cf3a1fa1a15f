#include "rolab/linalg.hpp"

#include <algorithm>
#include <numeric>

#include "rolab/errors.hpp"

namespace rolab::linalg {

using boost::multiprecision::abs;
using boost::multiprecision::sqrt;

EigenDecomposition jacobi_eigen(SymMatrix m, int max_sweeps) {
  const std::size_t n = m.n;
  if (m.a.size() != n * n) throw BadParameter("malformed matrix");

  std::vector<std::vector<Real>> v(n, std::vector<Real>(n, Real(0)));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1;

  Real scale = 0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, abs(m.at(i, i)));
  for (const Real& x : m.a) scale = std::max(scale, abs(x));
  // ~2^-99 relative; a few guard sweeps past that change nothing.
  const Real stop = scale * Real("1e-29");

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Real off = 0;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += abs(m.at(p, q));
    if (off <= stop) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        Real apq = m.at(p, q);
        if (abs(apq) <= stop / Real(static_cast<unsigned>(n * n + 1))) continue;
        Real app = m.at(p, p);
        Real aqq = m.at(q, q);
        Real theta = (aqq - app) / (2 * apq);
        Real t;
        if (theta >= 0)
          t = Real(1) / (theta + sqrt(Real(1) + theta * theta));
        else
          t = Real(-1) / (-theta + sqrt(Real(1) + theta * theta));
        Real c = Real(1) / sqrt(Real(1) + t * t);
        Real s = t * c;

        for (std::size_t i = 0; i < n; ++i) {
          Real aip = m.at(i, p);
          Real aiq = m.at(i, q);
          m.at(i, p) = c * aip - s * aiq;
          m.at(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          Real api = m.at(p, i);
          Real aqi = m.at(q, i);
          m.at(p, i) = c * api - s * aqi;
          m.at(q, i) = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          Real vip = v[i][p];
          Real viq = v[i][q];
          v[i][p] = c * vip - s * viq;
          v[i][q] = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return m.at(a, a) < m.at(b, b); });

  EigenDecomposition out;
  out.values.reserve(n);
  out.vectors.reserve(n);
  for (std::size_t idx : order) {
    out.values.push_back(m.at(idx, idx));
    std::vector<Real> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = v[i][idx];
    out.vectors.push_back(std::move(col));
  }
  return out;
}

}  // namespace rolab::linalg
