#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "eqlab/bigint.hpp"

namespace eqlab {

// Square matrix with arbitrary-precision integer entries, row-major.
class IntMatrix {
 public:
  IntMatrix() = default;
  explicit IntMatrix(std::size_t dim);
  IntMatrix(std::initializer_list<std::initializer_list<long>> rows);

  static IntMatrix identity(std::size_t dim);
  static IntMatrix from_rows(const std::vector<std::vector<BigInt>>& rows);

  std::size_t dim() const noexcept { return dim_; }
  const BigInt& operator()(std::size_t r, std::size_t c) const { return a_[r * dim_ + c]; }
  BigInt& operator()(std::size_t r, std::size_t c) { return a_[r * dim_ + c]; }
  const std::vector<BigInt>& entries() const noexcept { return a_; }

  // Fraction-free Gaussian elimination.
  BigInt determinant() const;
  // Exact inverse of a matrix with determinant +-1; throws NonUnimodular.
  IntMatrix inverse_unimodular() const;

  // max_i sum_j |a_ij| (operator norm for the sup norm).
  BigInt row_sum_norm() const;
  std::size_t max_entry_bits() const;
  bool fits_int64() const;
  std::vector<std::int64_t> to_int64() const;
  Eigen::MatrixXd to_double() const;

  IntMatrix transpose() const;

  friend bool operator==(const IntMatrix& a, const IntMatrix& b) {
    return a.dim_ == b.dim_ && a.a_ == b.a_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<BigInt> a_;
};

// Exact product; throws DimensionMismatch.
IntMatrix mat_mul(const IntMatrix& a, const IntMatrix& b);
inline IntMatrix operator*(const IntMatrix& a, const IntMatrix& b) { return mat_mul(a, b); }

}  // namespace eqlab
