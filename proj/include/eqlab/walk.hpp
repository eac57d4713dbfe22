#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eqlab/algebra.hpp"
#include "eqlab/generator_system.hpp"
#include "eqlab/measure.hpp"
#include "eqlab/torus_point.hpp"

namespace eqlab {

enum class EnsembleMode { exact, montecarlo };

struct WalkAtom {
  TorusPoint x;
  int label = 0;
  Rational weight;
  std::optional<IntMatrix> product;
};

struct WalkEnsemble {
  EnsembleMode mode = EnsembleMode::exact;
  std::vector<WalkAtom> atoms;
  unsigned n = 0;
  std::uint64_t seed = 0;
  std::size_t samples = 0;  // N for Monte Carlo, number of atoms for exact mode
  unsigned precision_bits = 0;

  std::size_t size() const noexcept { return atoms.size(); }
  std::size_t dim() const { return atoms.empty() ? 0 : atoms.front().x.dim(); }
  double weight(std::size_t i) const { return to_double(atoms[i].weight); }
  Rational total_weight() const;
};

// Parallel Monte Carlo kernels versus the serial arbitrary-precision path
// that every kernel is tested against.
enum class Execution { parallel, serial_reference };

struct EnumerateOptions {
  std::size_t atom_budget = 10'000'000;
  bool keep_products = false;
  double target_error = 0x1.0p-53;
};

// Exact law of (x_n, label). The budget caps the candidate count of each
// merge level. Dyadic starting points are re-evaluated at doubled precision
// when the error budget is exhausted.
WalkEnsemble enumerate_exact(const GeneratorSystem& sys, const StartPoint& x0, unsigned n,
                             const EnumerateOptions& opt = {});

struct SampleOptions {
  bool keep_products = false;
  double target_error = 0x1.0p-53;
  Execution execution = Execution::parallel;
};

// N independent endpoints; path i draws from Rng(seed, i, 0).
WalkEnsemble sample_paths(const GeneratorSystem& sys, const StartPoint& x0, unsigned n, std::size_t N,
                          std::uint64_t seed, const SampleOptions& opt = {});

// Precision used for n steps (dyadic starts); 0 for exact starts.
unsigned working_bits(const GeneratorSystem& sys, const StartPoint& x0, unsigned n, double target_error);

struct LyapunovOptions {
  unsigned renormalize_every = 32;
  double burn_in_fraction = 0.1;
  Execution execution = Execution::parallel;
};

// Per-factor growth of pi_j(g_n ... g_1); path i draws from Rng(seed, i, 1).
LyapunovProfile lyapunov_estimate(const GeneratorSystem& sys, const AlgebraDecomposition& dec, unsigned n,
                                  std::size_t N, std::uint64_t seed, const LyapunovOptions& opt = {});

struct DeviationRow {
  unsigned n = 0;
  double probability = 0;
  double stderr_ = 0;
};
struct DeviationTable {
  double omega = 0;
  double lambda = 0;
  std::vector<DeviationRow> rows;
  double slope = 0;       // least squares of log P against n over rows with P > 0
  bool monotone = true;   // no increase beyond 1.96 combined standard errors
  int fitted_points = 0;
};
// P[|n^-1 log|g_n...g_1| - lambda| >= omega] for each n; Rng(seed, i, 3).
DeviationTable large_deviation_probe(const GeneratorSystem& sys, double lambda, double omega,
                                     const std::vector<unsigned>& n_grid, std::size_t N, std::uint64_t seed);

struct ReturnTimeStats {
  std::vector<std::uint64_t> first_return;  // tau(1) per path
  double mean = 0;
  double stddev = 0;
  double ci_radius = 0;
  double renewal_mean = 0;      // mean of tau(m) / m
  double renewal_ci = 0;
  std::vector<double> label_frequency;  // occupation of the coset chain
  unsigned m = 0;
  int group_order = 1;
};
// Return times of the label chain to the identity; Rng(seed, i, 2).
ReturnTimeStats induced_return_times(const GeneratorSystem& sys, unsigned m, std::size_t N, std::uint64_t seed,
                                     std::uint64_t max_steps = 1'000'000);

struct RescaledOptions {
  unsigned fold = 1;                    // D in mu_n^{boxplus D}
  std::vector<std::size_t> factors;     // E'; empty selects the non-compact factors
  double delta = 0;                     // stored scale; 0 selects e^-n
};
// Atoms pi'(phi_n(g)) for g drawn from mu^{*n}, coordinates in the
// orthonormal basis of E'. Sample i sums paths i*D .. i*D+D-1 of Rng(seed, ., 4).
ScaledMeasure rescaled_walk_measure(const GeneratorSystem& sys, const AlgebraDecomposition& dec,
                                    const RescalingMap& map, unsigned n, std::size_t N, std::uint64_t seed,
                                    const std::vector<bool>& compact, const RescaledOptions& opt = {});

// Mean, sample standard deviation, 95% CI radius in a fixed summation order.
struct MeanCI {
  double mean = 0, stddev = 0, ci = 0;
};
MeanCI mean_ci(const std::vector<double>& x);

}  // namespace eqlab
