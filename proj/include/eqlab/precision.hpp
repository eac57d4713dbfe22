#pragma once

#include <span>

#include "eqlab/int_matrix.hpp"

namespace eqlab {

// Guard-bit plan for an n-step walk: rounding error of the start point is
// amplified by at most (max row-sum norm)^n.
struct PrecisionBudget {
  int guard_bits = 53;
  double growth_bits_per_step = 0.0;
};

// log2 of the largest generator row-sum norm (0 for an empty list).
double growth_bits_per_step(std::span<const IntMatrix> gens);

// Unrounded bit count -log2(target_error) + n * growth.
double required_guard_bits_real(unsigned n, std::span<const IntMatrix> gens, double target_error);

int required_guard_bits(unsigned n, std::span<const IntMatrix> gens, double target_error);

PrecisionBudget make_budget(unsigned n, std::span<const IntMatrix> gens, double target_error);

}  // namespace eqlab
