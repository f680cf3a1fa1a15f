#include "rolab/numeric.hpp"

#include <sstream>

#include "rolab/errors.hpp"

namespace rolab {

Real to_real(const Rat& q) {
  return Real(numerator(q)) / Real(denominator(q));
}

Rat parse_rational(const std::string& text) {
  auto bad = [&] { return BadParameter("not a rational: '" + text + "'"); };
  if (text.empty()) throw bad();
  auto slash = text.find('/');
  try {
    if (slash == std::string::npos) {
      return Rat(Int(text));
    }
    Int num(text.substr(0, slash));
    Int den(text.substr(slash + 1));
    if (den == 0) throw bad();
    return Rat(num, den);
  } catch (const std::runtime_error&) {
    throw bad();
  }
}

std::string rational_string(const Rat& q) {
  std::string s = numerator(q).str();
  if (denominator(q) != 1) s += "/" + denominator(q).str();
  return s;
}

std::string decimal_string(const Rat& q, int digits) {
  Int num = numerator(q);
  Int den = denominator(q);
  std::string out;
  if (num < 0) {
    out += "-";
    num = -num;
  }
  Int whole = num / den;
  Int rem = num % den;
  out += whole.str();
  if (digits <= 0) return out;
  out += ".";
  for (int i = 0; i < digits; ++i) {
    rem *= 10;
    Int digit = rem / den;
    rem %= den;
    out += static_cast<char>('0' + digit.convert_to<int>());
  }
  return out;
}

std::string real_string(const Real& x, int digits) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(digits) << x;
  return os.str();
}

}  // namespace rolab
