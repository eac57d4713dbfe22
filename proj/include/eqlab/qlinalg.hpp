#pragma once

#include <vector>

#include "eqlab/bigint.hpp"

namespace eqlab {

using QVector = std::vector<Rational>;

// Incrementally maintained reduced row-echelon basis of a subspace of Q^m.
class RationalSpan {
 public:
  explicit RationalSpan(std::size_t ambient) : m_(ambient) {}

  // Adds v; returns true when the rank grew.
  bool add(const QVector& v);
  bool contains(const QVector& v) const;
  std::size_t rank() const noexcept { return rows_.size(); }
  std::size_t ambient() const noexcept { return m_; }
  // Echelon rows (each with a unit pivot).
  const std::vector<QVector>& basis() const noexcept { return rows_; }
  // Coordinates of v in the echelon basis; v must lie in the span.
  QVector coordinates(const QVector& v) const;

 private:
  QVector reduce(QVector v) const;
  std::size_t m_;
  std::vector<QVector> rows_;
  std::vector<std::size_t> pivots_;
};

// Basis of {x : A x = 0} for the given rows of A (each of length m).
std::vector<QVector> nullspace(const std::vector<QVector>& rows, std::size_t m);

}  // namespace eqlab
