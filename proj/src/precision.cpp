#include "eqlab/precision.hpp"

#include <cmath>
#include <stdexcept>

namespace eqlab {

double growth_bits_per_step(std::span<const IntMatrix> gens) {
  BigInt best = 1;
  for (const auto& g : gens) {
    BigInt n = g.row_sum_norm();
    if (n > best) best = n;
  }
  long exp = 0;
  double mant = mpz_get_d_2exp(&exp, best.get_mpz_t());
  return std::log2(mant) + static_cast<double>(exp);
}

double required_guard_bits_real(unsigned n, std::span<const IntMatrix> gens, double target_error) {
  if (!(target_error > 0.0)) throw std::invalid_argument("required_guard_bits: target must be positive");
  return -std::log2(target_error) + static_cast<double>(n) * growth_bits_per_step(gens);
}

int required_guard_bits(unsigned n, std::span<const IntMatrix> gens, double target_error) {
  return static_cast<int>(std::ceil(required_guard_bits_real(n, gens, target_error) - 1e-12));
}

PrecisionBudget make_budget(unsigned n, std::span<const IntMatrix> gens, double target_error) {
  return {required_guard_bits(n, gens, target_error), growth_bits_per_step(gens)};
}

}  // namespace eqlab
