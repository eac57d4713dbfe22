#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <vector>

#include "eqlab/algebra.hpp"
#include "eqlab/torus_point.hpp"

namespace eqlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct BodyBlock {
  Eigen::MatrixXd L;  // k x D
  double radius = 1;
};

// Symmetric body {z : |L_b P z| <= r_b for every block b}, where P is the
// orthogonal projection killing the optional free subspace (the body is then
// a cylinder along it). Translates are formed by the caller.
class ConvexBody {
 public:
  ConvexBody() = default;
  static ConvexBody ball(std::size_t D, double r);
  static ConvexBody product(std::vector<BodyBlock> blocks, const Eigen::MatrixXd& free_basis = {});

  std::size_t dim() const noexcept { return D_; }
  const std::vector<BodyBlock>& blocks() const noexcept { return blocks_; }
  bool has_free_directions() const noexcept { return free_.cols() > 0; }
  const Eigen::MatrixXd& free_basis() const noexcept { return free_; }

  // max_b |L_b P z| / r_b; z lies in the body iff gauge <= 1.
  double gauge(const double* z) const;
  double gauge(const Eigen::VectorXd& z) const { return gauge(z.data()); }
  bool contains(const double* z) const { return gauge(z) <= 1.0 + 1e-12; }
  bool contains(const Eigen::VectorXd& z) const { return contains(z.data()); }

  ConvexBody scaled(double c) const;
  // Blockwise dual: L^{-T} with radii 1/r_b. Contains the true polar and is
  // contained in (number of blocks) times it.
  ConvexBody polar() const;
  // Half-widths of the bounding box (infinite along free directions).
  std::vector<double> extent() const;
  double volume() const;
  // Stacked rows L_b / r_b composed with P: maps the body into a product of
  // unit balls.
  Eigen::MatrixXd normalizer() const;
  std::vector<std::size_t> block_sizes() const;

 private:
  std::size_t D_ = 0;
  std::vector<BodyBlock> blocks_;
  Eigen::MatrixXd free_;
  Eigen::MatrixXd kill_;  // I - free free^T
};

struct QuasiBlock {
  Eigen::MatrixXd projector;  // d x d, commuting with the action
  Eigen::MatrixXd basis;      // orthonormal columns of the block
  double alpha = 1;           // 1 / lambda; unused for compact blocks
  bool compact = false;
};

// |v| = max_i |P_i v|^{alpha_i}; a compact block contributes 0 when
// |P_0 v| <= 1 and +inf otherwise.
class QuasiNorm {
 public:
  QuasiNorm() = default;
  explicit QuasiNorm(std::vector<QuasiBlock> blocks);
  // Blocks of a module decomposition with alpha = 1 / |lambda|.
  static QuasiNorm from_module(const ModuleDecomposition& md);
  // Coordinate blocks of the given sizes; lambda <= 0 marks a compact block.
  static QuasiNorm coordinate_blocks(const std::vector<std::size_t>& sizes, const std::vector<double>& lambdas);

  std::size_t dim() const noexcept { return d_; }
  const std::vector<QuasiBlock>& blocks() const noexcept { return blocks_; }
  double operator()(const Eigen::VectorXd& v) const;
  double operator()(const std::vector<double>& v) const;
  // Same, ignoring compact blocks.
  double noncompact(const Eigen::VectorXd& v) const;
  // K with |u + w| <= K (|u| + |w|) when no compact block is present.
  double triangle_constant() const;
  // {v : |v| <= r}; compact blocks keep radius 1.
  ConvexBody ball(double r) const;
  // {v : |v - w| <= r for some w in W} approximated by the ball of the
  // component orthogonal to W.
  ConvexBody neighborhood(const Eigen::MatrixXd& W_basis, double r) const;
  bool has_compact_block() const;

 private:
  std::size_t d_ = 0;
  std::vector<QuasiBlock> blocks_;
};

double qnorm(const QuasiNorm& qn, const Eigen::VectorXd& v);

struct TorusDistance {
  double value = 0;
  bool cutoff = false;  // no lift difference of norm <= 1/2: value is 1
};
TorusDistance qdist_torus_detail(const QuasiNorm& qn, const TorusPoint& x, const TorusPoint& y);
double qdist_torus(const QuasiNorm& qn, const TorusPoint& x, const TorusPoint& y);

// Point of Y: a torus point on sheet gamma.
struct YPoint {
  TorusPoint x;
  int sheet = 0;
};
// +inf across sheets.
double qdist_Y(const QuasiNorm& qn, const YPoint& a, const YPoint& b);

// min over basis vectors u_i of the non-compact blocks with l(u_i) != 0 of
// |phi(v) / l(u_i)|^{alpha_j(i)}, where W = {phi = <l, .> + c = 0}.
double dist_affine(const QuasiNorm& qn, const Eigen::VectorXd& v, const Eigen::VectorXd& l, double c);

struct ZQDistance {
  double value = kInf;
  long q = 0;
  std::vector<BigInt> p;     // witness p / q
  Eigen::VectorXd v0;        // compact component of x - p/q
  bool compact_excess = false;  // |v0| > Q: the compact ball did not absorb it
  bool cutoff = false;
};
// Distance on one sheet to Ball_{V0}(0, Q) + (1/q)Z^d, q <= Q. The optional
// quotient basis is projected out orthogonally before measuring.
ZQDistance dist_to_ZQ(const QuasiNorm& qn, const TorusPoint& x, long Q, const Eigen::MatrixXd& quotient = {});

// Flat point cloud in R^D.
struct PointCloud {
  std::size_t D = 0;
  std::vector<double> xs;
  std::size_t size() const noexcept { return D == 0 ? 0 : xs.size() / D; }
  const double* point(std::size_t i) const { return xs.data() + i * D; }
  void push(const double* p) { xs.insert(xs.end(), p, p + D); }
  void push(std::initializer_list<double> p) { xs.insert(xs.end(), p.begin(), p.end()); }
};

// Minimal enclosing ball radius of points (columns).
double min_enclosing_radius(const Eigen::MatrixXd& pts);

// Greedy cover by translates of the body. Points are visited in
// lexicographic order; each cluster grows while its minimal enclosing ball
// fits every normalized block. Optimal in dimension one.
std::size_t covering_number(const PointCloud& A, const ConvexBody& body);
std::size_t covering_number(const PointCloud& A, double delta);
// Exhaustive optimum over subsets; |A| <= 16.
std::size_t covering_number_exact(const PointCloud& A, const ConvexBody& body);

struct SeparatedResult {
  std::vector<std::size_t> selected;  // indices into A
  std::vector<std::size_t> owner;     // for every point, a selected index whose body contains it
};
// Weight-descending greedy; periodic treats coordinates modulo 1.
SeparatedResult separated_subset(const PointCloud& A, const std::vector<double>& weights, const ConvexBody& body,
                                 bool periodic = false);

}  // namespace eqlab
