#include "eqlab/generator_system.hpp"

#include <map>
#include <stdexcept>

#include "eqlab/errors.hpp"

namespace eqlab {

FiniteGroup::FiniteGroup(int order) {
  if (order < 1) throw std::invalid_argument("FiniteGroup: order must be positive");
  table_.assign(order, std::vector<int>(order));
  for (int a = 0; a < order; ++a)
    for (int b = 0; b < order; ++b) table_[a][b] = (a + b) % order;
  cyclic_ = true;
}

FiniteGroup FiniteGroup::cyclic(int order) { return FiniteGroup(order); }

FiniteGroup FiniteGroup::from_table(std::vector<std::vector<int>> table) {
  const int n = static_cast<int>(table.size());
  if (n == 0) throw ConfigError("group.table", "empty table");
  for (const auto& row : table) {
    if (static_cast<int>(row.size()) != n) throw ConfigError("group.table", "table must be square");
    std::vector<bool> seen(n, false);
    for (int v : row) {
      if (v < 0 || v >= n || seen[v]) throw ConfigError("group.table", "rows must be permutations");
      seen[v] = true;
    }
  }
  for (int a = 0; a < n; ++a) {
    if (table[0][a] != a || table[a][0] != a) throw ConfigError("group.table", "element 0 must be the identity");
  }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        if (table[table[a][b]][c] != table[a][table[b][c]])
          throw ConfigError("group.table", "multiplication is not associative");
  FiniteGroup g(1);
  g.table_ = std::move(table);
  g.cyclic_ = false;
  return g;
}

int FiniteGroup::inverse(int a) const {
  for (int b = 0; b < order(); ++b)
    if (table_[a][b] == 0) return b;
  throw std::logic_error("FiniteGroup: no inverse");
}

void GeneratorSystem::validate(std::uint64_t seed, int words, int max_len) const {
  if (generators.empty()) throw ConfigError("generators", "at least one generator required");
  if (weights.size() != generators.size())
    throw ConfigError("weights", "expected " + std::to_string(generators.size()) + " weights");
  const std::size_t d = generators.front().dim();
  if (d == 0) throw ConfigError("generators[0]", "empty matrix");
  Rational total = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0) throw ConfigError("weights[" + std::to_string(i) + "]", "weight must be positive");
    total += weights[i];
  }
  if (total != 1) throw ConfigError("weights", "weights sum to " + to_string(total) + ", expected 1");
  for (std::size_t i = 0; i < generators.size(); ++i) {
    if (generators[i].dim() != d)
      throw DimensionMismatch("generators[" + std::to_string(i) + "]: dimension differs from generators[0]");
    const BigInt det = generators[i].determinant();
    if (det != 1 && det != -1)
      throw NonUnimodular("generators[" + std::to_string(i) + "]: determinant " + eqlab::to_string(det));
  }
  if (!labels) return;
  if (labels->size() != generators.size()) throw ConfigError("labels", "one label per generator required");
  for (std::size_t i = 0; i < labels->size(); ++i) {
    if ((*labels)[i] < 0 || (*labels)[i] >= group.order())
      throw ConfigError("labels[" + std::to_string(i) + "]", "label outside the group");
  }
  // Equal products must carry equal labels; collisions come from relations
  // such as g g^-1 = 1, so words are biased towards short ones.
  std::map<std::vector<BigInt>, int> seen;
  seen[IntMatrix::identity(d).entries()] = 0;
  Rng rng(seed, 0x1abe1ULL);
  for (int w = 0; w < words; ++w) {
    const int len = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_len)));
    IntMatrix p = IntMatrix::identity(d);
    int lab = 0;
    for (int s = 0; s < len; ++s) {
      const std::size_t i = rng.below(generators.size());
      p = generators[i] * p;
      lab = group.mul((*labels)[i], lab);
      auto [it, inserted] = seen.emplace(p.entries(), lab);
      if (!inserted && it->second != lab)
        throw ConfigError("labels", "inconsistent labels: a word product repeats with a different label");
    }
  }
}

GeneratorSampler::GeneratorSampler(const std::vector<Rational>& weights) {
  Rational cum = 0;
  BigInt scale = 1;
  scale <<= 64;
  thresholds_.reserve(weights.size());
  for (const auto& w : weights) {
    cum += w;
    Rational t = cum * Rational(scale);
    BigInt f = floor_of(t);
    if (f >= scale) f = scale - 1;
    static_assert(sizeof(unsigned long) == 8);
    thresholds_.push_back(mpz_get_ui(f.get_mpz_t()));
  }
}

}  // namespace eqlab
