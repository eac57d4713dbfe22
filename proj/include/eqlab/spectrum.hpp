#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "eqlab/algebra.hpp"
#include "eqlab/measure.hpp"
#include "eqlab/quasigeom.hpp"
#include "eqlab/walk.hpp"

namespace eqlab {

using Frequency = std::vector<long>;
using Complex = std::complex<double>;

struct Coefficient {
  Complex value;
  double stderr_ = 0;      // 1/sqrt(N) for Monte Carlo, 0 for exact laws
  double error_bound = 0;  // phase rounding from dyadic error bounds
};

// Phases <a, x> of every atom, prepared once per ensemble. Exact rational
// atoms reduce a.x modulo their denominator; dyadic atoms reduce modulo
// 2^bits. Residues 0 and 1/2 are accumulated as exact rational weights.
class PhaseTable {
 public:
  explicit PhaseTable(const WalkEnsemble& ens);
  // reference evaluates every phase through the arbitrary-precision path
  Coefficient coefficient(const Frequency& a, bool reference = false) const;
  std::size_t dim() const noexcept { return d_; }
  std::size_t size() const noexcept { return w_.size(); }

 private:
  enum class Kind { dyadic128, exact128, generic };
  Kind kind_ = Kind::generic;
  std::size_t d_ = 0;
  unsigned bits_ = 0;
  std::vector<unsigned __int128> un_;  // dyadic numerators, atom-major
  std::vector<__int128> en_;           // exact numerators, atom-major
  std::vector<__int128> den_;          // exact denominators
  std::vector<std::vector<BigInt>> gnum_;
  std::vector<BigInt> gden_;
  std::vector<double> w_;
  std::vector<Rational> wq_;
  double max_err_ = 0;
  bool montecarlo_ = false;
  std::size_t N_ = 0;
};

Coefficient fourier_coefficient(const WalkEnsemble& ens, const Frequency& a);
// Measure on R^D: sum_x w_x e^{2 i pi <xi, x>}.
Complex fourier_coefficient(const ScaledMeasure& m, const Eigen::VectorXd& xi);

struct FourierReport {
  std::vector<Frequency> frequencies;
  std::vector<Coefficient> coefficients;
  unsigned n = 0;
  EnsembleMode mode = EnsembleMode::exact;
  std::size_t samples = 0;

  double max_abs(bool skip_zero = true) const;
  std::size_t argmax(bool skip_zero = true) const;
};

// All frequencies with |a|_inf <= A_max in lexicographic order.
std::vector<Frequency> frequency_box(std::size_t d, long A_max, bool include_zero);
FourierReport spectrum_scan(const WalkEnsemble& ens, long A_max, bool include_zero = false,
                            Execution exec = Execution::parallel);
FourierReport spectrum_at(const WalkEnsemble& ens, const std::vector<Frequency>& freqs,
                          Execution exec = Execution::parallel);

struct DecayFit {
  double rate = 0;       // slope of log|c| against n
  double intercept = 0;
  double r2 = 0;
  std::size_t used = 0;  // leading points above the floor
  long truncated_at = -1;  // first n at or below the floor, -1 if none
};
// Fits the leading points strictly above floor; throws InsufficientDecade
// when fewer than two remain and std::invalid_argument below four points.
DecayFit decay_fit(const std::vector<double>& n, const std::vector<double>& magnitude, double floor);

struct AddStructResult {
  bool hypothesis = false;  // |(mu * nu)^(a0)| >= t0
  double coefficient = 0;
  double threshold = 0;     // t0^{2k} / 2
  double mass = 0;          // (mu^{+k} - mu^{+k})(A)
  std::size_t support = 0;
  std::size_t set_size = 0;
  bool holds = false;       // hypothesis implies mass >= threshold
};
AddStructResult addstruct_check(const GeneratorSystem& sys, const WalkEnsemble& nu, const Frequency& a0, double t0,
                                unsigned k, std::size_t budget = 1'000'000);

struct GranulationReport {
  PointCloud X;
  std::vector<std::size_t> atom_index;  // candidates chosen, as atom indices
  std::vector<double> masses;           // nu(x + C*) per granule
  double captured = 0;                  // nu(X + C*)
  double volume_heuristic = 0;          // |X| vol(C*)
  bool granular = false;                // captured > 2 |X| vol(C*)
  bool separated = false;               // verified (X - X) and B* meet only at 0
  ConvexBody Bstar, Cstar;
  std::size_t candidates = 0;
};

struct GranulateOptions {
  std::size_t candidate_cap = 16384;
};
// Space-side bodies B* (separation) and C* (neighborhoods) on the torus.
GranulationReport granulate_torus(const PointCloud& atoms, const std::vector<double>& weights,
                                  const ConvexBody& Bstar, const ConvexBody& Cstar, const GranulateOptions& opt = {});
// nu(X + C) for a fixed set X, coordinates modulo 1.
double captured_mass(const PointCloud& atoms, const std::vector<double>& weights, const PointCloud& X,
                     const ConvexBody& C);
// Frequency-side bodies; the detector runs with their blockwise polars.
GranulationReport wiener_granulate(const PointCloud& atoms, const std::vector<double>& weights, const ConvexBody& B,
                                   const ConvexBody& C, const GranulateOptions& opt = {});

struct WalkGranulateOptions {
  double tau = 0.1;
  int n_back = -1;                 // -1 selects n / 2
  std::size_t samples = 100000;    // Monte Carlo size when exact enumeration is over budget
  std::size_t exact_budget = 2'000'000;
  std::uint64_t seed = 11;
};
struct WalkGranulation {
  GranulationReport report;
  int sheet = 0;
  double coefficient = 0;
  double r_sep = 0, r_nb = 0;
  unsigned n_back = 0;
  Eigen::MatrixXd W;                 // basis of (a0 gamma E)^perp on the chosen sheet
  std::vector<double> sheet_captured;
  bool exact = false;
  WalkEnsemble nu;                   // law at time n - n_back
};
// E is the algebra of the identity component (the full algebra when no labels).
WalkGranulation walk_granulate(const GeneratorSystem& sys, const AlgebraDecomposition& E, const QuasiNorm& qn,
                               const StartPoint& x0, const Frequency& a0, double t, unsigned n,
                               const WalkGranulateOptions& opt = {});

// Law at time n: exact when the word count fits the budget, else Monte Carlo.
WalkEnsemble walk_law(const GeneratorSystem& sys, const StartPoint& x0, unsigned n, std::size_t exact_budget,
                      std::size_t samples, std::uint64_t seed);

// A word of minimal length carrying each label (identity for label 0).
std::vector<IntMatrix> sheet_representatives(const GeneratorSystem& sys);
// Basis (columns) of (a0 gamma E)^perp.
Eigen::MatrixXd annihilator_subspace(const Frequency& a0, const IntMatrix& gamma, const AlgebraDecomposition& E);

PointCloud torus_cloud(const WalkEnsemble& ens);
std::vector<double> ensemble_weights(const WalkEnsemble& ens);

}  // namespace eqlab
