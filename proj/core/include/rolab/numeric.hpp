#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>

namespace rolab {

// Exact arithmetic everywhere the constructions live; level widths have
// denominators that are products of all cut counts and must cancel exactly.
// Expression templates are off so values behave like plain value types.
using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::number<
    boost::multiprecision::backends::rational_adaptor<boost::multiprecision::backends::cpp_int_backend<>>,
    boost::multiprecision::et_off>;

// High-precision float for the estimation-only paths (spectral densities,
// regularized projections, fitted coefficients). 100-bit mantissa.
using Real = boost::multiprecision::number<
    boost::multiprecision::cpp_bin_float<100, boost::multiprecision::digit_base_2>>;

using i64 = std::int64_t;

Real to_real(const Rat& q);

/// Parses "p/q", "p", or "-p/q" with arbitrary-precision integers.
Rat parse_rational(const std::string& text);

/// "p/q" when q != 1, otherwise "p".
std::string rational_string(const Rat& q);

/// Fixed-point decimal rendering by exact long division, truncated toward
/// zero. Platform-independent (never goes through binary floating point).
std::string decimal_string(const Rat& q, int digits = 12);

/// Deterministic scientific rendering of a Real.
std::string real_string(const Real& x, int digits = 24);

}  // namespace rolab
