#include "eqlab/qlinalg.hpp"

#include <stdexcept>

namespace eqlab {

QVector RationalSpan::reduce(QVector v) const {
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const Rational c = v[pivots_[r]];
    if (c == 0) continue;
    const QVector& row = rows_[r];
    for (std::size_t j = 0; j < m_; ++j) {
      if (row[j] != 0) v[j] -= c * row[j];
    }
  }
  return v;
}

bool RationalSpan::add(const QVector& v) {
  if (v.size() != m_) throw std::invalid_argument("RationalSpan: length mismatch");
  QVector w = reduce(v);
  std::size_t p = 0;
  while (p < m_ && w[p] == 0) ++p;
  if (p == m_) return false;
  const Rational inv = 1 / w[p];
  for (auto& x : w) x *= inv;
  // keep the basis fully reduced so coordinates read off pivots directly
  for (auto& row : rows_) {
    const Rational c = row[p];
    if (c == 0) continue;
    for (std::size_t j = 0; j < m_; ++j) {
      if (w[j] != 0) row[j] -= c * w[j];
    }
  }
  rows_.push_back(std::move(w));
  pivots_.push_back(p);
  return true;
}

bool RationalSpan::contains(const QVector& v) const {
  QVector w = reduce(v);
  for (const auto& x : w) {
    if (x != 0) return false;
  }
  return true;
}

QVector RationalSpan::coordinates(const QVector& v) const {
  if (!contains(v)) throw std::invalid_argument("RationalSpan: vector outside span");
  QVector c(rows_.size());
  for (std::size_t r = 0; r < rows_.size(); ++r) c[r] = v[pivots_[r]];
  return c;
}

std::vector<QVector> nullspace(const std::vector<QVector>& rows, std::size_t m) {
  RationalSpan span(m);
  for (const auto& r : rows) span.add(r);
  std::vector<bool> is_pivot(m, false);
  const auto& basis = span.basis();
  std::vector<std::size_t> piv;
  for (const auto& b : basis) {
    std::size_t p = 0;
    while (b[p] == 0) ++p;
    piv.push_back(p);
    is_pivot[p] = true;
  }
  std::vector<QVector> out;
  for (std::size_t f = 0; f < m; ++f) {
    if (is_pivot[f]) continue;
    QVector x(m);
    x[f] = 1;
    for (std::size_t r = 0; r < basis.size(); ++r) x[piv[r]] = -basis[r][f];
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace eqlab
