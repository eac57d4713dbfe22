#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace eqlab {

// R^D seen as an algebra of d x d matrices through an orthonormal basis of
// vectorized matrices. d == 0 marks a plain Euclidean space without product.
struct AlgebraSpace {
  std::size_t D = 0;
  std::size_t d = 0;
  Eigen::MatrixXd basis;  // d*d x D
  // structure constants: mult[i*D + j] = coordinates of b_i b_j
  std::vector<Eigen::VectorXd> mult;

  static AlgebraSpace euclidean(std::size_t D);
  static AlgebraSpace reals();
  static AlgebraSpace from_basis(const Eigen::MatrixXd& basis, std::size_t d);
  bool has_product() const noexcept { return d > 0; }
  Eigen::VectorXd multiply(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
  Eigen::MatrixXd to_matrix(const Eigen::VectorXd& x) const;
  // det of y -> x y on the space
  double det(const Eigen::VectorXd& x) const;
};

// Weighted atoms in R^D with a working scale delta; weights are doubles.
struct ScaledMeasure {
  AlgebraSpace space;
  std::vector<double> coords;   // atom-major, size() * D
  std::vector<double> weights;
  double delta = 1.0;

  std::size_t D() const noexcept { return space.D; }
  std::size_t size() const noexcept { return weights.size(); }
  const double* point(std::size_t i) const { return coords.data() + i * space.D; }
  Eigen::Map<const Eigen::VectorXd> vec(std::size_t i) const { return {point(i), static_cast<Eigen::Index>(space.D)}; }
  void push(const double* p, double w);
  void push(const Eigen::VectorXd& p, double w) { push(p.data(), w); }
  double mass() const;
  ScaledMeasure scaled_mass(double c) const;
  ScaledMeasure empty_like() const;
};

}  // namespace eqlab
