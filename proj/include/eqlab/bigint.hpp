#pragma once

#include <gmpxx.h>

#include <string>
#include <string_view>

namespace eqlab {

using BigInt = mpz_class;
using Rational = mpq_class;

// Parses "p/q", "p" or a finite decimal such as "-0.125" into an exact
// rational. Throws std::invalid_argument on malformed input or q == 0.
Rational parse_rational(std::string_view text);

// "p/q" with q > 0, or "p" when the denominator is 1.
std::string to_string(const Rational& value);
std::string to_string(const BigInt& value);

// floor(value), for any sign.
BigInt floor_of(const Rational& value);

// value - floor(value), in [0, 1).
Rational frac(const Rational& value);

// Nonnegative remainder in [0, m) for m > 0.
BigInt mod_floor(const BigInt& value, const BigInt& m);

double to_double(const Rational& value);

// Number of bits of |value| (0 for zero).
std::size_t bit_length(const BigInt& value);

}  // namespace eqlab
