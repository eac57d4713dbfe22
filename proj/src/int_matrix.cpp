#include "eqlab/int_matrix.hpp"

#include <limits>

#include "eqlab/errors.hpp"

namespace eqlab {

IntMatrix::IntMatrix(std::size_t dim) : dim_(dim), a_(dim * dim) {}

IntMatrix::IntMatrix(std::initializer_list<std::initializer_list<long>> rows) : dim_(rows.size()) {
  a_.reserve(dim_ * dim_);
  for (const auto& row : rows) {
    if (row.size() != dim_) throw DimensionMismatch("IntMatrix: ragged initializer");
    for (long v : row) a_.emplace_back(v);
  }
}

IntMatrix IntMatrix::identity(std::size_t dim) {
  IntMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1;
  return m;
}

IntMatrix IntMatrix::from_rows(const std::vector<std::vector<BigInt>>& rows) {
  IntMatrix m(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.size()) throw DimensionMismatch("IntMatrix: matrix must be square");
    for (std::size_t c = 0; c < rows.size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

BigInt IntMatrix::determinant() const {
  if (dim_ == 0) return 1;
  std::vector<BigInt> m = a_;
  const std::size_t n = dim_;
  BigInt prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (m[k * n + k] == 0) {
      std::size_t pivot = k + 1;
      while (pivot < n && m[pivot * n + k] == 0) ++pivot;
      if (pivot == n) return 0;
      for (std::size_t c = 0; c < n; ++c) std::swap(m[k * n + c], m[pivot * n + c]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      for (std::size_t j = k + 1; j < n; ++j) {
        BigInt v = m[i * n + j] * m[k * n + k] - m[i * n + k] * m[k * n + j];
        mpz_divexact(v.get_mpz_t(), v.get_mpz_t(), prev.get_mpz_t());
        m[i * n + j] = v;
      }
    }
    prev = m[k * n + k];
  }
  return sign * m[n * n - 1];
}

IntMatrix IntMatrix::inverse_unimodular() const {
  BigInt det = determinant();
  if (det != 1 && det != -1) throw NonUnimodular("matrix is not unimodular (det = " + det.get_str() + ")");
  const std::size_t n = dim_;
  // Gauss-Jordan over Q; the result is integral because det = +-1.
  std::vector<Rational> aug(n * 2 * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) aug[r * 2 * n + c] = (*this)(r, c);
    aug[r * 2 * n + n + r] = 1;
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (aug[pivot * 2 * n + col] == 0) ++pivot;
    if (pivot != col) {
      for (std::size_t c = 0; c < 2 * n; ++c) std::swap(aug[col * 2 * n + c], aug[pivot * 2 * n + c]);
    }
    Rational inv = 1 / aug[col * 2 * n + col];
    for (std::size_t c = 0; c < 2 * n; ++c) aug[col * 2 * n + c] *= inv;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || aug[r * 2 * n + col] == 0) continue;
      Rational f = aug[r * 2 * n + col];
      for (std::size_t c = 0; c < 2 * n; ++c) aug[r * 2 * n + c] -= f * aug[col * 2 * n + c];
    }
  }
  IntMatrix inv(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const Rational& v = aug[r * 2 * n + n + c];
      inv(r, c) = v.get_num();
    }
  }
  return inv;
}

BigInt IntMatrix::row_sum_norm() const {
  BigInt best = 0;
  for (std::size_t r = 0; r < dim_; ++r) {
    BigInt s = 0;
    for (std::size_t c = 0; c < dim_; ++c) s += abs((*this)(r, c));
    if (s > best) best = s;
  }
  return best;
}

std::size_t IntMatrix::max_entry_bits() const {
  std::size_t bits = 0;
  for (const auto& v : a_) bits = std::max(bits, bit_length(v));
  return bits;
}

bool IntMatrix::fits_int64() const {
  for (const auto& v : a_) {
    if (!v.fits_slong_p()) return false;
  }
  return true;
}

std::vector<std::int64_t> IntMatrix::to_int64() const {
  std::vector<std::int64_t> out;
  out.reserve(a_.size());
  for (const auto& v : a_) {
    if (!v.fits_slong_p()) throw std::overflow_error("IntMatrix entry does not fit in int64");
    out.push_back(v.get_si());
  }
  return out;
}

Eigen::MatrixXd IntMatrix::to_double() const {
  Eigen::MatrixXd m(dim_, dim_);
  for (std::size_t r = 0; r < dim_; ++r) {
    for (std::size_t c = 0; c < dim_; ++c) m(r, c) = (*this)(r, c).get_d();
  }
  return m;
}

IntMatrix IntMatrix::transpose() const {
  IntMatrix t(dim_);
  for (std::size_t r = 0; r < dim_; ++r) {
    for (std::size_t c = 0; c < dim_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

IntMatrix mat_mul(const IntMatrix& a, const IntMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("mat_mul: dimension mismatch");
  const std::size_t n = a.dim();
  IntMatrix out(n);
  BigInt acc;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      acc = 0;
      for (std::size_t k = 0; k < n; ++k) acc += a(r, k) * b(k, c);
      out(r, c) = acc;
    }
  }
  return out;
}

}  // namespace eqlab
