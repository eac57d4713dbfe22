#include "eqlab/fixtures.hpp"

#include <stdexcept>

namespace eqlab {
namespace {

IntMatrix block_diag(const IntMatrix& a, const IntMatrix& b) {
  const std::size_t n = a.dim() + b.dim();
  IntMatrix m(n);
  for (std::size_t r = 0; r < a.dim(); ++r)
    for (std::size_t c = 0; c < a.dim(); ++c) m(r, c) = a(r, c);
  for (std::size_t r = 0; r < b.dim(); ++r)
    for (std::size_t c = 0; c < b.dim(); ++c) m(a.dim() + r, a.dim() + c) = b(r, c);
  return m;
}

GeneratorSystem uniform(std::vector<IntMatrix> gens) {
  GeneratorSystem s;
  const auto k = static_cast<long>(gens.size());
  s.generators = std::move(gens);
  s.weights.assign(s.generators.size(), Rational(1, k));
  return s;
}

}  // namespace

GeneratorSystem fixture_f1() {
  IntMatrix u{{1, 2}, {0, 1}};
  IntMatrix l{{1, 0}, {2, 1}};
  return uniform({u, l, u.inverse_unimodular(), l.inverse_unimodular()});
}

GeneratorSystem fixture_f2() {
  IntMatrix w{{0, 1}, {-1, 0}};
  IntMatrix a0{{1, 1}, {0, 1}};
  IntMatrix a1{{1, 0}, {1, 1}};
  IntMatrix A0 = block_diag(w, a0);
  IntMatrix A1 = block_diag(w, a1);
  GeneratorSystem s = uniform({A0, A1, A0.inverse_unimodular(), A1.inverse_unimodular()});
  s.group = FiniteGroup::cyclic(4);
  s.labels = std::vector<int>{1, 1, 3, 3};
  return s;
}

GeneratorSystem fixture_f3() {
  const IntMatrix I = IntMatrix::identity(2);
  std::vector<IntMatrix> gens;
  for (const auto& g : fixture_f1().generators) gens.push_back(block_diag(g, I));
  IntMatrix a0{{1, 1}, {0, 1}};
  IntMatrix a1{{1, 0}, {1, 1}};
  for (const auto& g : {a0, a1, a0.inverse_unimodular(), a1.inverse_unimodular()})
    gens.push_back(block_diag(I, g));
  return uniform(std::move(gens));
}

GeneratorSystem fixture_f4() { return uniform({IntMatrix{{2, 1}, {1, 1}}}); }

GeneratorSystem fixture_identity(std::size_t dim) { return uniform({IntMatrix::identity(dim)}); }

GeneratorSystem fixture_by_name(const std::string& name) {
  if (name == "F1") return fixture_f1();
  if (name == "F2") return fixture_f2();
  if (name == "F3") return fixture_f3();
  if (name == "F4") return fixture_f4();
  throw std::invalid_argument("unknown fixture '" + name + "'");
}

std::vector<std::string> fixture_names() { return {"F1", "F2", "F3", "F4"}; }

StartPoint surd_start(std::size_t dim) {
  // (sqrt k - m) for the listed (k, m)
  const long table[4][2] = {{2, 1}, {3, 1}, {5, 2}, {7, 2}};
  if (dim == 0 || dim > 4) throw std::invalid_argument("surd_start: dimension must be 1..4");
  std::vector<CoordinateSpec> coords;
  for (std::size_t i = 0; i < dim; ++i) coords.emplace_back(Surd{-table[i][1], 1, table[i][0], 1});
  return StartPoint(std::move(coords));
}

}  // namespace eqlab
