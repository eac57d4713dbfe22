#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eqlab/quasigeom.hpp"
#include "eqlab/spectrum.hpp"
#include "eqlab/walk.hpp"

namespace eqlab {

struct DriftConfig {
  double alpha = 0.1;
  double lambda = 0.5;
  long Q = 2;
  double cap = 0;  // 0 selects rho_min^-alpha, rho_min = 1e-12
  double effective_cap() const;
  void validate() const;
};

struct PhiValue {
  double value = 0;
  double distance = 0;  // d~(y, Z_Q)
  bool capped = false;
};
// min(cap, d~(y, Z_Q)^-alpha).
PhiValue phi_Q(const DriftConfig& cfg, const QuasiNorm& qn, const TorusPoint& y, const Eigen::MatrixXd& quotient = {});
double phi_from_distance(const DriftConfig& cfg, double distance);

// Exact rational points ((i + 1) theta_k mod 1) rounded to the given
// denominator; theta from the generalized golden ratio in dimension d.
std::vector<TorusPoint> drift_grid(std::size_t d, std::size_t count, long denominator = 1009);

struct MargulisRow {
  std::vector<double> y;
  double phi_y = 0;
  bool y_capped = false;
  double estimate = 0;          // median of means of phi(g y)
  double ci = 0;                // 2 sd of the block means / sqrt(blocks)
  double holdout = 0, holdout_ci = 0;
  double q50 = 0, q90 = 0, q99 = 0, max = 0;
  double capped_fraction = 0;   // of phi(g y)
  double rhs = 0;               // decay phi(y) + Q^C
  bool holds = false;           // estimate <= rhs
  bool holds_holdout = false;   // holdout - holdout_ci <= rhs
};
struct MargulisTable {
  DriftConfig cfg;
  unsigned n = 0;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  double decay = 0;             // e^{-lambda alpha n}
  std::vector<MargulisRow> rows;
  double C = 0;                 // smallest C >= 0 with the inequality on every row
  bool C_finite = false;
  bool all_hold = false, all_hold_holdout = false;
};
struct MargulisOptions {
  std::size_t blocks = 16;
  bool holdout = true;          // verify on an independent sample
};
// Words from Rng(seed, i, 0), holdout words from a derived seed; every y
// sees the same words.
MargulisTable margulis_check(const GeneratorSystem& sys, const QuasiNorm& qn, const DriftConfig& cfg,
                             const std::vector<TorusPoint>& ys, unsigned n, std::size_t N, std::uint64_t seed,
                             const MargulisOptions& opt = {});
double median_of_means(const std::vector<double>& x, std::size_t blocks, double* ci = nullptr);

struct BootstrapOptions {
  std::size_t tuples = 10000;
  std::size_t pool = 512;       // distinct words of length m behind the tuples
  double c = 0.05;              // tolerance e^{-c m}
};
struct BootstrapResult {
  PointCloud X1;
  std::vector<double> masses;   // nu mass of each X1 cell before trimming
  double r1 = 0, rho1 = 0;
  double captured = 0;          // nu(X1 + ball(rho1))
  double pushed = 0;            // estimate of (mu^{*m} * nu)(X + ball(rho))
  double intersection = 0;      // nu of the best tuple's intersection
  double target = 0;            // pushed^d - e^{-cm}
  bool found = false;           // false: no sampled tuple met the target
  std::size_t tuples_tried = 0;
  std::size_t groups = 0, trimmed = 0;
  bool separated = false;
  unsigned m = 0;
};
// X and nu live on one sheet modulo W. Requires e^{(d+1) m} rho < r.
BootstrapResult bootstrap_step(const GeneratorSystem& sys, const QuasiNorm& qn, const WalkEnsemble& nu,
                               const PointCloud& X, const Eigen::MatrixXd& W, double r, double rho, unsigned m,
                               double eps, std::uint64_t seed, const BootstrapOptions& opt = {});

struct DiophantineSnap {
  long Q = 0;
  double distance = kInf;       // d~(y, Z_Q)
  double threshold = 0;         // rho^{1 - beta}
  long Q_limit = 0;             // min(Q_max, rho^-beta)
  std::vector<BigInt> witness;
  bool pass = false;
};
// The Q <= min(Q_max, rho^-beta) of least d~(y, Z_Q), the smallest among
// ties; pass when that distance is at most rho^{1-beta}.
DiophantineSnap diophantine_snap(const QuasiNorm& qn, const TorusPoint& y, double rho, double beta, long Q_max,
                                 const Eigen::MatrixXd& quotient = {});

struct E2EOptions {
  WalkGranulateOptions granulate;
  unsigned sweeps = 2;
  double eps = 0.2;
  std::vector<double> betas{0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  long Q_max = 1000;
  double C_max = 4;
  double n_factor = 1;          // n >= n_factor log(|a0| / t)
  BootstrapOptions bootstrap;
  std::uint64_t seed = 13;
};
struct E2ESweep {
  unsigned m = 0;
  unsigned time = 0;            // of the law the sweep used
  double r = 0, rho = 0, captured = 0;
  std::size_t size = 0;
  bool found = false;
};
struct E2ERecord {
  std::string x0;
  Frequency a0;
  double t = 0, lambda = 0;
  unsigned n = 0, n0 = 0, n1 = 0;
  double coefficient = 0;
  bool hypothesis = false;
  int sheet = 0;
  std::size_t granules = 0;
  double granulated_mass = 0;
  std::vector<E2ESweep> sweeps;
  std::vector<double> y;        // snapped point
  double beta = 0;
  DiophantineSnap snap;         // passing snap of least distance over the betas
  long Q = 0;
  double distance = kInf;       // d~(y0, Z_Q)
  double bound = 0;             // e^{-lambda n}
  double C_fit = 0;             // log Q / log(|a0| / t)
  double C_max = 0;
  bool distance_ok = false, Q_ok = false, pass = false;
};
// Hypothesis, granulation, bootstrap sweeps, Diophantine snap and the final
// distance of x0 to Z_Q on the chosen sheet. Throws HypothesisFailed.
E2ERecord theorem_e2e(const GeneratorSystem& sys, const AlgebraDecomposition& E, const QuasiNorm& qn,
                      const StartPoint& x0, const Frequency& a0, double t, unsigned n, double lambda,
                      const E2EOptions& opt = {});

}  // namespace eqlab
