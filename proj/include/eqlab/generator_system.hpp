#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eqlab/bigint.hpp"
#include "eqlab/int_matrix.hpp"
#include "eqlab/rng.hpp"

namespace eqlab {

// Finite group on {0, ..., order-1} with identity 0, given by its table.
class FiniteGroup {
 public:
  FiniteGroup() : FiniteGroup(1) {}
  static FiniteGroup cyclic(int order);
  static FiniteGroup from_table(std::vector<std::vector<int>> table);

  int order() const noexcept { return static_cast<int>(table_.size()); }
  int mul(int a, int b) const { return table_[a][b]; }
  int inverse(int a) const;
  const std::vector<std::vector<int>>& table() const noexcept { return table_; }
  bool is_cyclic_presentation() const noexcept { return cyclic_; }

 private:
  explicit FiniteGroup(int order);
  std::vector<std::vector<int>> table_;
  bool cyclic_ = false;
};

// Finitely supported probability measure on GL_d(Z) with optional labels of
// each generator in a finite group.
struct GeneratorSystem {
  std::vector<IntMatrix> generators;
  std::vector<Rational> weights;
  std::optional<std::vector<int>> labels;
  FiniteGroup group;

  std::size_t dim() const { return generators.empty() ? 0 : generators.front().dim(); }
  std::size_t size() const noexcept { return generators.size(); }
  bool has_labels() const noexcept { return labels.has_value(); }
  int label(std::size_t i) const { return labels ? (*labels)[i] : 0; }

  // Throws ConfigError / NonUnimodular / DimensionMismatch on violations:
  // weights positive with exact sum 1, det = +-1, labels in range and
  // consistent on sampled words (equal products carry equal labels).
  void validate(std::uint64_t seed = 0, int words = 256, int max_len = 8) const;
};

// Generator choice with exact thresholds floor(cumulative weight * 2^64).
class GeneratorSampler {
 public:
  GeneratorSampler() = default;
  explicit GeneratorSampler(const std::vector<Rational>& weights);
  std::size_t operator()(Rng& rng) const noexcept {
    const std::uint64_t u = rng.next_u64();
    std::size_t i = 0;
    while (i + 1 < thresholds_.size() && u >= thresholds_[i]) ++i;
    return i;
  }
  std::size_t size() const noexcept { return thresholds_.size(); }

 private:
  // thresholds_[i] = floor(sum_{j<=i} w_j * 2^64); the last entry is unused.
  std::vector<std::uint64_t> thresholds_;
};

}  // namespace eqlab
