#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "eqlab/generator_system.hpp"
#include "eqlab/qlinalg.hpp"

namespace eqlab {

// Matrices of Mat_d are vectorized row-major: entry (r, c) sits at r*d + c.
Eigen::VectorXd vec(const Eigen::MatrixXd& m);
Eigen::MatrixXd unvec(const Eigen::VectorXd& v, std::size_t d);
QVector vec_exact(const IntMatrix& m);
Eigen::MatrixXd to_eigen(const QVector& vm, std::size_t d);

struct DecompositionResiduals {
  double idempotent = 0;     // max_j |e_j^2 - e_j|
  double orthogonality = 0;  // max_{i != j} |e_i e_j|
  double unit = 0;           // |sum_j e_j - 1|
  double commutation = 0;    // max_{j,b} |e_j b - b e_j| / |b| over the algebra basis
  double cluster_gap = 0;    // smallest distance between distinct eigenvalue clusters
  int attempts = 0;          // random central elements tried
  bool rational = false;     // idempotents verified exactly over Q
};

struct AlgebraDecomposition {
  std::size_t d = 0;
  // Exact echelon basis of E (vectorized matrices).
  std::vector<QVector> algebra_basis;
  // Exact echelon basis of the center; empty until compute_center.
  std::vector<QVector> center_basis;
  // Filled by wedderburn_decompose, factor_dims decreasing.
  std::vector<Eigen::MatrixXd> idempotents;
  std::optional<std::vector<QVector>> rational_idempotents;
  std::vector<int> factor_dims;
  DecompositionResiduals residuals;
  // Orthonormal bases (columns, vectorized) of E and of each E_j = e_j E.
  Eigen::MatrixXd basis_orthonormal;
  std::vector<Eigen::MatrixXd> factor_bases;

  std::size_t ambient_dim() const noexcept { return d * d; }
  std::size_t dim() const noexcept { return algebra_basis.size(); }
  std::size_t factor_count() const noexcept { return idempotents.size(); }
  bool decomposed() const noexcept { return !idempotents.empty(); }
  // pi_j(x) = e_j x.
  Eigen::MatrixXd project(std::size_t j, const Eigen::MatrixXd& x) const { return idempotents.at(j) * x; }
  Eigen::MatrixXd basis_matrix(std::size_t k) const { return to_eigen(algebra_basis.at(k), d); }
};

// Smallest unital subalgebra of Mat_d(Q) containing the generators.
AlgebraDecomposition generate_algebra(const GeneratorSystem& sys);
// Algebra spanned by words whose label is the identity; closure runs over
// label-indexed spans until stable or until max_rounds multiplications.
AlgebraDecomposition generate_identity_component_algebra(const GeneratorSystem& sys, int max_rounds = 64);
// Algebra spanned by the given matrices and the identity.
AlgebraDecomposition generate_algebra_from(const std::vector<IntMatrix>& elements, std::size_t d);

AlgebraDecomposition compute_center(AlgebraDecomposition dec);

struct WedderburnOptions {
  double tol = 1e-9;
  std::uint64_t seed = 1;
  int max_attempts = 8;
  long rational_max_den = 1000;
};
// Throws AmbiguousClusters after max_attempts failed clusterings and
// ToleranceExceeded when the residuals exceed tol.
AlgebraDecomposition wedderburn_decompose(AlgebraDecomposition dec, const WedderburnOptions& opt = {});

// Full pipeline: generate, center, decompose.
AlgebraDecomposition decompose(const GeneratorSystem& sys, const WedderburnOptions& opt = {});

// Left multiplication y -> x y restricted to E, to one factor, or to the sum
// of the listed factors.
struct DetScope {
  enum class Kind { whole, factors } kind = Kind::whole;
  std::vector<std::size_t> factors;
  static DetScope whole_algebra() { return {}; }
  static DetScope of(std::vector<std::size_t> f) { return {Kind::factors, std::move(f)}; }
};
double det_on_algebra(const AlgebraDecomposition& dec, const Eigen::MatrixXd& x, const DetScope& scope = {});
// Orthonormal basis (vectorized columns) of the subspace selected by scope.
Eigen::MatrixXd scope_basis(const AlgebraDecomposition& dec, const DetScope& scope);
// Matrix of y -> x y on the subspace with orthonormal basis B.
Eigen::MatrixXd left_multiplication(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& x, std::size_t d);

struct LyapunovProfile {
  std::vector<double> exponents;  // per factor, nats per step
  std::vector<double> ci_radius;  // 95%
  std::vector<double> stddev;
  double top = 0;                 // exponent of the full product
  double top_ci = 0;
  std::size_t samples = 0;
  unsigned word_length = 0;
  unsigned burn_in = 0;
};

struct ModuleBlock {
  Eigen::MatrixXd basis;      // d x k orthonormal columns spanning the block
  Eigen::MatrixXd projector;  // sum of the idempotents of the grouped factors
  std::vector<std::size_t> factors;
  double exponent = 0;
  double ci_radius = 0;
  bool compact = false;
};

struct ModuleDecomposition {
  std::size_t d = 0;
  std::vector<ModuleBlock> blocks;
  std::vector<double> max_word_norm_ratio;  // per factor, from the compactness test
};

struct ModuleOptions {
  double grouping_tol = 0.05;
  int compact_words = 1000;
  int compact_max_len = 200;
  double compact_bound = 10.0;
  std::uint64_t seed = 7;
};
ModuleDecomposition decompose_module(const GeneratorSystem& sys, const AlgebraDecomposition& dec,
                                     const LyapunovProfile& profile, const ModuleOptions& opt = {});

struct RescalingMap {
  std::vector<double> exponents;
  double n = 0;
};
// sum_j e^{-n lambda_j} e_j x
Eigen::MatrixXd rescale(const AlgebraDecomposition& dec, const RescalingMap& map, const Eigen::MatrixXd& x);

}  // namespace eqlab
