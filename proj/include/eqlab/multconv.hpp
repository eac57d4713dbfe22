#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "eqlab/measure.hpp"
#include "eqlab/quasigeom.hpp"
#include "eqlab/spectrum.hpp"

namespace eqlab {

// ||eta boxplus P_delta||_2 with P_delta the normalized indicator of the
// Euclidean delta-ball, from the exact overlap volume of every atom pair
// closer than 2 delta.
double l2_norm_at_scale(const ScaledMeasure& eta);
double l2_norm_at_scale(const ScaledMeasure& eta, double delta);
// Volume of the intersection of two D-balls of radius delta at distance r.
double ball_overlap_volume(std::size_t D, double delta, double r);
double ball_volume(std::size_t D, double radius);

enum class ConvMode { add, sub, mul };

struct ConvolveOptions {
  std::size_t budget = 1'000'000;  // atoms; products beyond it are snapped to the grid
  double snap = 0;                  // grid step, 0 selects delta / 4
};
// Pushforward of eta x nu under x + y, x - y or the algebra product. Up to
// the budget every pair is kept as its own atom; beyond it pairs are
// accumulated on the snap grid (nearest point), which preserves mass.
ScaledMeasure convolve(const ScaledMeasure& eta, const ScaledMeasure& nu, ConvMode mode,
                       const ConvolveOptions& opt = {});
// Weight-preserving snap of atoms to the grid of the given step.
ScaledMeasure snap_to_grid(const ScaledMeasure& eta, double step);
// eta^{*3} boxminus eta^{*3}
ScaledMeasure cube_difference(const ScaledMeasure& eta, const ConvolveOptions& opt = {});
// Image of eta1 x eta2 under (a, b) -> a (x) b in E (x) E^op, coordinates a_i b_j.
ScaledMeasure tensor_pushforward(const ScaledMeasure& eta1, const ScaledMeasure& eta2,
                                 const ConvolveOptions& opt = {});

struct AffineScanOptions {
  std::size_t random_normals = 64;
  std::size_t heavy_atoms = 32;
  std::size_t tuple_cap = 2048;
  std::uint64_t seed = 17;
};

// Largest mass of an open slab {|<l, x> - c| < rho} over the sampled unit
// normals l and all offsets c, for each rho.
struct AffineScan {
  std::vector<double> rhos;
  std::vector<double> mass;
  std::vector<Eigen::VectorXd> normal;  // maximizing normal per rho
  std::vector<double> offset;           // maximizing c per rho
  std::size_t normals = 0;
};
AffineScan affine_scan(const ScaledMeasure& eta, const std::vector<double>& rhos, const AffineScanOptions& opt = {});
std::vector<Eigen::VectorXd> sample_normals(const ScaledMeasure& eta, const AffineScanOptions& opt);

struct EssResult {
  ScaledMeasure measure;
  double removed = 0;
  double removed_ball = 0, removed_det = 0, removed_affine = 0;
  int remaining_offenders = 0;  // slabs above the bound but too heavy to remove
  int iterations = 0;
  bool passing = false;         // removed <= 3 delta^tau and no offender left
};
struct EssOptions {
  std::vector<double> rhos;  // empty selects delta 2^j, j = 0.. up to 1
  AffineScanOptions scan;
  int max_iterations = 64;
};
// Restricts to Ball(0, delta^-eps) minus {|det_E| <= delta^eps}, then removes
// slabs with mass above delta^-eps rho^kappa whose mass is at most
// 3 delta^tau and below half of the remaining mass, until none is left.
// Idempotent.
EssResult essential_part(const ScaledMeasure& eta, double eps, double kappa, double tau, const EssOptions& opt = {});

struct NCAuditOptions {
  double eps = 0.1;
  std::vector<double> kappas{0.5};
  double tau = 0.1;
  double delta = 0;               // 0 selects eta.delta
  std::vector<double> rhos;       // empty selects delta 2^j up to 1
  AffineScanOptions scan;
  std::size_t det_centers = 32;   // random atoms used as y, besides 0 and the heaviest
  double det_threshold = 0;       // 0 selects delta^eps
};

struct NCAuditReport {
  double eps = 0, tau = 0, delta = 0;
  std::vector<double> kappas;
  // clause 1
  double ball_radius = 0;
  double outside_mass = 0;
  bool support_pass = false;
  // clause 2
  double det_threshold = 0;
  double small_det_mass = 0;      // sup over sampled y of eta(y + S_E)
  long small_det_center = -1;     // atom index of the maximizing y, -1 for 0
  double small_det_at_zero = 0;
  bool small_det_pass = false;
  bool det_available = false;
  // clause 3
  std::vector<double> rhos;
  std::vector<double> affine_mass;
  std::vector<bool> affine_pass;  // per kappa
  double kappa_hat = 0;
  double r2 = 0;
  std::size_t normals = 0;
  // eta_1(E): mass outside the ball or in S_E(delta^eps)
  double decomposition_mass = 0;
  std::vector<bool> nc_pass;      // per kappa: every clause and eta_1(E) <= delta^tau
};
NCAuditReport nc_audit(const ScaledMeasure& eta, const NCAuditOptions& opt = {});

struct GrowthReport {
  double delta = 0;
  std::size_t N_A = 0, N_AA = 0, N_AfA_best = 0;
  std::size_t best_f = 0;
  std::vector<std::size_t> N_AfA;
  std::vector<double> energy;      // #{|phi(x,y) - phi(x',y')| <= delta} / |A|^3
  double ratio_AA = 0, ratio_AfA = 0;
  double growth_exponent = 0;      // log(max growth) / log(1/delta)
};
// A: points of E; each f is a D x D matrix acting on E coordinates.
GrowthReport sumproduct_check(const PointCloud& A, const std::vector<Eigen::MatrixXd>& B, double delta,
                              std::size_t pair_budget = 4'000'000);
// delta-scale additive energy of (x, y) -> x + f y, normalized by |A|^3.
double additive_energy(const PointCloud& A, const Eigen::MatrixXd& f, double delta);

struct GenerationProbe {
  double coverage = 0;
  std::size_t elements = 0;     // |<A>_s| on the delta-grid
  std::size_t grid_points = 0;  // delta-grid of Ball(0, delta^eps0)
  std::size_t covered = 0;
};
// <A>_s: sums of at most s products of at most s elements of A or -A,
// including the empty sum; lattice points of step delta snap the elements.
GenerationProbe generation_probe(const ScaledMeasure& A, unsigned s, double delta, double eps0,
                                 std::size_t budget = 20'000'000);

struct FlattenStep {
  double norm = 0;        // ||eta_k||_{2,delta}
  double mass = 0;
  double ess_removed = 0;
  std::size_t atoms = 0;
};
struct FlattenTrajectory {
  std::vector<FlattenStep> steps;
  std::vector<double> ratios;   // norm_{k+1} / norm_k
  std::vector<bool> decreased;  // ratio < 1
  std::vector<double> exponent; // log(ratio) / log(delta)
  double fitted_exponent = 0;   // mean of exponent
  bool floor_reached = false;   // ||eta_k||^2 <= delta^-kappa stopped the run
  NCAuditReport audit;          // of the input
};
struct FlattenOptions {
  ConvolveOptions conv;
  EssOptions ess;
  NCAuditOptions audit;
};
// eta_{k+1} = ess(eta_k)^{*3} boxminus ess(eta_k)^{*3}; norms of eta_0 = eta
// and of each eta_k. The floor test ||eta_k||^2 <= delta^-kappa stops the run
// from k = 1 on: a density bounded by 1 sits below every floor, and the
// first step is still wanted there.
FlattenTrajectory flatten_pipeline(const ScaledMeasure& eta, unsigned k, double eps, double kappa, double tau,
                                   const FlattenOptions& opt = {});

struct PowerInequality {
  double slack = 0;           // min over the grid of RHS - LHS
  std::size_t worst = 0;
  std::vector<double> lhs, rhs;
};
// |(eta^{*3m})^(xi)|^{2^m} <= |(mu^{*m})^(xi)|, mu = eta^{*3} boxminus eta^{*3},
// with the measures formed exactly (rational coordinates, merged atoms).
PowerInequality power_inequality_check(const ScaledMeasure& eta, unsigned m, const std::vector<Eigen::VectorXd>& xis,
                                       std::size_t budget = 2'000'000);

struct FourierDecayTable {
  std::vector<unsigned> s;
  std::vector<double> max_abs;                  // over the grid, per s
  std::vector<std::vector<double>> magnitudes;  // per s, per xi
  double trend = 0;                             // slope of log max_abs against s
  bool nonincreasing = false;
};
// |(eta_1 * ... * eta_s)^(xi)| for s = 1..s_max, eta_i cycling through the list.
// Snapping defaults to delta / 64 here so that phases at |xi| ~ 1/delta survive;
// with that default the atom budget is raised to at least 2^22.
FourierDecayTable multiplicative_fourier_decay(const std::vector<ScaledMeasure>& etas, unsigned s_max,
                                               const std::vector<Eigen::VectorXd>& xis,
                                               const ConvolveOptions& opt = {});

// measures on R
ScaledMeasure uniform_net(double a, double b, double step, double delta);
// atoms on the 2^-8 grid of [-2, 2] with weights proportional to 1 + |u|,
// u uniform in [-2, 2]; draws from Rng(seed, index, 8)
ScaledMeasure random_small_measure(std::size_t atoms, double delta, std::uint64_t seed, std::uint64_t index);
// points of the 2^-6 grid of [-scale, scale]; Rng(seed, index, 9)
std::vector<Eigen::VectorXd> random_frequencies(std::size_t count, double scale, std::uint64_t seed,
                                                std::uint64_t index);
ScaledMeasure dirac(const AlgebraSpace& space, const Eigen::VectorXd& x, double delta);

}  // namespace eqlab
