#include "eqlab/measure.hpp"

#include <stdexcept>

#include "eqlab/algebra.hpp"

namespace eqlab {

AlgebraSpace AlgebraSpace::euclidean(std::size_t D) {
  AlgebraSpace s;
  s.D = D;
  return s;
}

AlgebraSpace AlgebraSpace::reals() { return from_basis(Eigen::MatrixXd::Ones(1, 1), 1); }

AlgebraSpace AlgebraSpace::from_basis(const Eigen::MatrixXd& basis, std::size_t d) {
  AlgebraSpace s;
  s.D = static_cast<std::size_t>(basis.cols());
  s.d = d;
  s.basis = basis;
  s.mult.resize(s.D * s.D);
  for (std::size_t i = 0; i < s.D; ++i)
    for (std::size_t j = 0; j < s.D; ++j) {
      const Eigen::MatrixXd p = unvec(basis.col(i), d) * unvec(basis.col(j), d);
      s.mult[i * s.D + j] = basis.transpose() * eqlab::vec(p);
    }
  return s;
}

Eigen::VectorXd AlgebraSpace::multiply(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  if (!has_product()) throw std::logic_error("AlgebraSpace: no product on a plain Euclidean space");
  Eigen::VectorXd z = Eigen::VectorXd::Zero(D);
  for (std::size_t i = 0; i < D; ++i) {
    if (x[i] == 0) continue;
    for (std::size_t j = 0; j < D; ++j) {
      if (y[j] != 0) z += (x[i] * y[j]) * mult[i * D + j];
    }
  }
  return z;
}

Eigen::MatrixXd AlgebraSpace::to_matrix(const Eigen::VectorXd& x) const { return unvec(basis * x, d); }

double AlgebraSpace::det(const Eigen::VectorXd& x) const {
  if (!has_product()) throw std::logic_error("AlgebraSpace: no product on a plain Euclidean space");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(D, D);
  for (std::size_t i = 0; i < D; ++i) {
    if (x[i] == 0) continue;
    for (std::size_t j = 0; j < D; ++j) L.col(j) += x[i] * mult[i * D + j];
  }
  return D == 1 ? L(0, 0) : L.determinant();
}

void ScaledMeasure::push(const double* p, double w) {
  coords.insert(coords.end(), p, p + space.D);
  weights.push_back(w);
}

double ScaledMeasure::mass() const {
  double m = 0;
  for (double w : weights) m += w;
  return m;
}

ScaledMeasure ScaledMeasure::scaled_mass(double c) const {
  ScaledMeasure out = *this;
  for (double& w : out.weights) w *= c;
  return out;
}

ScaledMeasure ScaledMeasure::empty_like() const {
  ScaledMeasure out;
  out.space = space;
  out.delta = delta;
  return out;
}

}  // namespace eqlab
