#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <cmath>
#include <concepts>
#include <cstdio>
#include <stdexcept>
#include <algorithm>
#include <string>
#include <string_view>

namespace seqbayes {

/// Arbitrary-precision rational used as the exact ground-truth scalar.
using Rational = boost::multiprecision::mpq_rational;

enum class ScalarMode { ExactRational, Float64 };

template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static constexpr ScalarMode mode = ScalarMode::Float64;
  static constexpr std::string_view name = "float64";
  static constexpr bool exact = false;
  /// Mass and equality tolerance for float kernels and distributions.
  static double tolerance() { return 1e-12; }
};

template <>
struct ScalarTraits<Rational> {
  static constexpr ScalarMode mode = ScalarMode::ExactRational;
  static constexpr std::string_view name = "exact-rational";
  static constexpr bool exact = true;
  static Rational tolerance() { return Rational(0); }
};

template <class S>
concept ProbabilityScalar = requires { ScalarTraits<S>::exact; };

inline double to_double(double v) { return v; }
inline double to_double(const Rational& v) { return v.convert_to<double>(); }

template <ProbabilityScalar S>
S from_ratio(long num, long den) {
  if (den == 0) throw std::invalid_argument("zero denominator");
  if constexpr (std::same_as<S, Rational>) {
    return Rational(num, den);
  } else {
    return static_cast<double>(num) / static_cast<double>(den);
  }
}

/// Exact conversion of a double into the scalar type (every finite double is a rational).
template <ProbabilityScalar S>
S from_double(double v) {
  if constexpr (std::same_as<S, Rational>) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite value cannot be made rational");
    return Rational(v);
  } else {
    return v;
  }
}

template <ProbabilityScalar S>
S abs_value(const S& v) {
  return v < S(0) ? S(-v) : v;
}

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_scalar(double v) { return format_double(v); }
inline std::string format_scalar(const Rational& v) { return v.str(); }

/// Parses "p/q", integers and decimal literals. Decimals are read exactly in rational mode.
template <ProbabilityScalar S>
S parse_scalar(std::string_view text) {
  std::string s(text);
  if (s.empty()) throw std::invalid_argument("empty scalar literal");
  if constexpr (std::same_as<S, Rational>) {
    auto slash = s.find('/');
    if (slash != std::string::npos) {
      try {
        return Rational(s);
      } catch (const std::exception&) {
        throw std::invalid_argument("malformed rational literal '" + s + "'");
      }
    }
    // decimal: split mantissa/exponent and build an exact rational
    std::size_t epos = s.find_first_of("eE");
    std::string mant = s.substr(0, epos);
    long exp10 = 0;
    if (epos != std::string::npos) {
      try {
        exp10 = std::stol(s.substr(epos + 1));
      } catch (const std::exception&) {
        throw std::invalid_argument("malformed exponent in '" + s + "'");
      }
    }
    bool neg = false;
    if (!mant.empty() && (mant[0] == '-' || mant[0] == '+')) {
      neg = mant[0] == '-';
      mant.erase(0, 1);
    }
    std::string digits;
    bool seen_dot = false;
    for (char c : mant) {
      if (c == '.') {
        if (seen_dot) throw std::invalid_argument("malformed decimal '" + s + "'");
        seen_dot = true;
      } else if (c >= '0' && c <= '9') {
        digits.push_back(c);
        if (seen_dot) --exp10;
      } else {
        throw std::invalid_argument("malformed decimal '" + s + "'");
      }
    }
    if (digits.empty()) throw std::invalid_argument("malformed decimal '" + s + "'");
    // mpz parses a leading 0 as an octal prefix
    digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size() - 1));
    boost::multiprecision::mpz_int num(digits);
    boost::multiprecision::mpz_int scale = boost::multiprecision::pow(
        boost::multiprecision::mpz_int(10), static_cast<unsigned>(exp10 < 0 ? -exp10 : exp10));
    Rational r = exp10 < 0 ? Rational(num, scale) : Rational(num * scale);
    return neg ? Rational(-r) : r;
  } else {
    auto slash = s.find('/');
    try {
      if (slash != std::string::npos) {
        return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
      }
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed float literal '" + s + "'");
    }
  }
}

}  // namespace seqbayes
