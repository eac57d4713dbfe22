#pragma once

#include <string>
#include <variant>
#include <vector>

#include "eqlab/bigint.hpp"
#include "eqlab/int_matrix.hpp"

namespace eqlab {

// numerators / denominator with a positive denominator; canonical() divides
// out the common gcd.
struct RationalVector {
  std::vector<BigInt> numerators;
  BigInt denominator = 1;

  static RationalVector from(const std::vector<Rational>& values);
  std::size_t dim() const noexcept { return numerators.size(); }
  Rational operator[](std::size_t i) const;
  RationalVector canonical() const;
  friend bool operator==(const RationalVector&, const RationalVector&) = default;
};

// A point of T^d = R^d / Z^d with coordinates in [0, 1).
//
// Exact points store a gcd-reduced common denominator. Dyadic points store
// numerators over 2^bits together with an absolute error bound of
// error_ulps * 2^-bits that covers every rounding made so far. Integer
// matrices act on dyadic numerators exactly, so only the starting error is
// ever amplified.
class TorusPoint {
 public:
  enum class Kind { exact, dyadic };

  TorusPoint() = default;
  static TorusPoint exact(const RationalVector& v);
  static TorusPoint exact(const std::vector<Rational>& coords);
  static TorusPoint dyadic(std::vector<BigInt> numerators, unsigned bits, BigInt error_ulps);
  static TorusPoint origin(std::size_t dim) { return exact(std::vector<Rational>(dim)); }

  Kind kind() const noexcept { return kind_; }
  bool is_exact() const noexcept { return kind_ == Kind::exact; }
  std::size_t dim() const noexcept { return num_.size(); }
  const std::vector<BigInt>& numerators() const noexcept { return num_; }
  const BigInt& denominator() const noexcept { return den_; }
  unsigned precision_bits() const noexcept { return bits_; }
  const BigInt& error_ulps() const noexcept { return err_; }

  Rational coordinate(std::size_t i) const;
  double coordinate_double(std::size_t i) const;
  std::vector<double> to_double() const;
  // Absolute error bound (0 for exact points).
  Rational error_bound() const;
  // log2 of the error bound; -inf for exact points.
  double error_log2() const;

  // Dyadic points only: re-express at a higher precision (exact shift).
  TorusPoint widened(unsigned bits) const;

  std::string to_string() const;

  friend bool operator==(const TorusPoint& a, const TorusPoint& b) {
    return a.kind_ == b.kind_ && a.bits_ == b.bits_ && a.den_ == b.den_ && a.num_ == b.num_ &&
           a.err_ == b.err_;
  }

 private:
  Kind kind_ = Kind::exact;
  std::vector<BigInt> num_;
  BigInt den_ = 1;
  unsigned bits_ = 0;
  BigInt err_ = 0;
};

// g x mod 1. Exact inputs stay exact. For dyadic inputs the error bound is
// multiplied by the row-sum norm of g; PrecisionExhausted is thrown when it
// would exceed 2^-max_error_bits.
TorusPoint act_on_torus(const IntMatrix& g, const TorusPoint& x, int max_error_bits = 53);

// Difference x - y reduced to the representative with every coordinate in
// [-1/2, 1/2), computed exactly and rounded once to double.
std::vector<double> centered_difference(const TorusPoint& x, const TorusPoint& y);

// One coordinate of a starting point: an exact rational, a quadratic surd
// (a + b sqrt(k)) / c, or a decimal string with a declared absolute error.
struct Surd {
  BigInt a = 0, b = 0, k = 0, c = 1;
};
struct DeclaredDecimal {
  std::string digits;
  Rational error;
};
using CoordinateSpec = std::variant<Rational, Surd, DeclaredDecimal>;

// Recipe for a starting point that can be evaluated at any precision, so
// that precision escalation can replay a walk from scratch.
class StartPoint {
 public:
  StartPoint() = default;
  explicit StartPoint(std::vector<CoordinateSpec> coords);
  static StartPoint from_rationals(const std::vector<Rational>& coords);

  std::size_t dim() const noexcept { return coords_.size(); }
  bool is_exact() const;
  const std::vector<CoordinateSpec>& coordinates() const noexcept { return coords_; }

  // Exact point; throws std::logic_error if some coordinate is irrational.
  TorusPoint exact_point() const;
  // Dyadic approximation at `bits` bits (exact coordinates are rounded too).
  TorusPoint evaluate(unsigned bits) const;
  // exact_point() when possible, else evaluate(bits).
  TorusPoint point(unsigned bits) const;

 private:
  std::vector<CoordinateSpec> coords_;
};

// Surd value floor((a + b sqrt(k)) 2^bits / c); error at most 2 units.
BigInt surd_fixed_point(const Surd& s, unsigned bits);

}  // namespace eqlab
