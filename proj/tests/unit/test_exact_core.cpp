#include <doctest.h>

#include <cmath>
#include <set>

#include "eqlab/bigint.hpp"
#include "eqlab/errors.hpp"
#include "eqlab/fixtures.hpp"
#include "eqlab/generator_system.hpp"
#include "eqlab/int_matrix.hpp"
#include "eqlab/precision.hpp"
#include "eqlab/rng.hpp"
#include "eqlab/torus_point.hpp"

using namespace eqlab;

namespace {

IntMatrix random_word(const GeneratorSystem& sys, Rng& rng, int len) {
  IntMatrix p = IntMatrix::identity(sys.dim());
  for (int i = 0; i < len; ++i) p = sys.generators[rng.below(sys.size())] * p;
  return p;
}

// frac(g x) computed coordinatewise in Q
std::vector<Rational> act_oracle(const IntMatrix& g, const std::vector<Rational>& x) {
  std::vector<Rational> out(x.size());
  for (std::size_t r = 0; r < x.size(); ++r) {
    Rational acc = 0;
    for (std::size_t c = 0; c < x.size(); ++c) acc += Rational(g(r, c)) * x[c];
    out[r] = frac(acc);
  }
  return out;
}

}  // namespace

TEST_CASE("parse_rational accepts p/q, integers and finite decimals") {
  CHECK(parse_rational("3/6") == Rational(1, 2));
  CHECK(parse_rational("-0.125") == Rational(-1, 8));
  CHECK(parse_rational("7") == Rational(7));
  CHECK(to_string(parse_rational("10/4")) == "5/2");
  CHECK(to_string(Rational(4)) == "4");
  CHECK_THROWS_AS(parse_rational("1/0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("abc"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational(""), std::invalid_argument);
}

TEST_CASE("floor, frac and mod_floor for negative values") {
  CHECK(floor_of(Rational(-7, 2)) == -4);
  CHECK(frac(Rational(-7, 2)) == Rational(1, 2));
  CHECK(mod_floor(BigInt(-7), BigInt(3)) == 2);
  CHECK(bit_length(BigInt(0)) == 0);
  CHECK(bit_length(BigInt(-8)) == 4);
}

TEST_CASE("fixture generators are unimodular and inverses are exact") {
  for (const auto& name : fixture_names()) {
    const auto sys = fixture_by_name(name);
    for (const auto& g : sys.generators) {
      const BigInt det = g.determinant();
      CHECK((det == 1 || det == -1));
      CHECK(g.inverse_unimodular() * g == IntMatrix::identity(g.dim()));
    }
  }
}

TEST_CASE("determinant is multiplicative on long words") {
  const auto sys = fixture_f1();
  Rng rng(3, 0);
  for (int k = 0; k < 20; ++k) {
    const IntMatrix a = random_word(sys, rng, 60), b = random_word(sys, rng, 60);
    CHECK((a * b).determinant() == a.determinant() * b.determinant());
    CHECK(a.inverse_unimodular() * a == IntMatrix::identity(2));
  }
}

TEST_CASE("non-unimodular and mismatched matrices are rejected") {
  CHECK_THROWS_AS(IntMatrix({{2, 0}, {0, 1}}).inverse_unimodular(), NonUnimodular);
  CHECK_THROWS_AS(mat_mul(IntMatrix::identity(2), IntMatrix::identity(3)), DimensionMismatch);
  CHECK(IntMatrix({{1, 2}, {3, 4}}).determinant() == -2);
}

TEST_CASE("exact torus action matches coordinatewise rational arithmetic") {
  const auto sys = fixture_f1();
  Rng rng(5, 0);
  const std::vector<Rational> x{Rational(2, 7), Rational(5, 11)};
  for (int k = 0; k < 30; ++k) {
    const IntMatrix g = random_word(sys, rng, 1 + static_cast<int>(rng.below(40)));
    const TorusPoint y = act_on_torus(g, TorusPoint::exact(x));
    const auto want = act_oracle(g, x);
    REQUIRE(y.is_exact());
    for (std::size_t i = 0; i < 2; ++i) CHECK(y.coordinate(i) == want[i]);
  }
}

TEST_CASE("exact points stay in [0,1) with reduced denominators") {
  const TorusPoint p = TorusPoint::exact(std::vector<Rational>{Rational(2, 6), Rational(-1, 3)});
  CHECK(p.coordinate(0) == Rational(1, 3));
  CHECK(p.coordinate(1) == Rational(2, 3));
  CHECK(p.denominator() == 3);
  CHECK(p.error_bound() == 0);
}

TEST_CASE("surd fixed point is within two units of the integer square root") {
  for (unsigned bits : {10u, 64u, 200u}) {
    // floor(sqrt(2) 2^bits) = isqrt(2 * 4^bits)
    BigInt s = 2;
    s <<= 2 * bits;
    BigInt root;
    mpz_sqrt(root.get_mpz_t(), s.get_mpz_t());
    const BigInt got = surd_fixed_point(Surd{0, 1, 2, 1}, bits);
    BigInt diff = got - root;
    CHECK(abs(diff) <= 2);
  }
}

TEST_CASE("dyadic error bounds cover the true orbit") {
  const auto sys = fixture_f1();
  const StartPoint x0 = surd_start(2);
  Rng rng(7, 0);
  for (int k = 0; k < 10; ++k) {
    const IntMatrix g = random_word(sys, rng, 20);
    const TorusPoint lo = act_on_torus(g, x0.evaluate(120));
    const TorusPoint hi = act_on_torus(g, x0.evaluate(400), 300);
    for (std::size_t i = 0; i < 2; ++i) {
      Rational diff = lo.coordinate(i) - hi.coordinate(i);
      diff = frac(diff + Rational(1, 2)) - Rational(1, 2);
      CHECK(abs(diff) <= lo.error_bound() + hi.error_bound());
    }
    CHECK(lo.error_log2() <= -53);
  }
}

TEST_CASE("precision is exhausted when amplification outruns the guard bits") {
  const IntMatrix g = fixture_f4().generators[0];
  TorusPoint x = surd_start(2).evaluate(60);
  bool thrown = false;
  try {
    for (int k = 0; k < 40; ++k) x = act_on_torus(g, x);
  } catch (const PrecisionExhausted&) {
    thrown = true;
  }
  CHECK(thrown);
}

TEST_CASE("guard bits follow -log2(target) + n log2(max row sum)") {
  const auto gens = fixture_f4().generators;
  CHECK(growth_bits_per_step(gens) == doctest::Approx(std::log2(3.0)));
  CHECK(required_guard_bits(10, gens, 0x1.0p-53) == static_cast<int>(std::ceil(53 + 10 * std::log2(3.0))));
  CHECK(required_guard_bits(0, gens, 0x1.0p-53) == 53);
}

TEST_CASE("declared decimals carry their error into the dyadic bound") {
  StartPoint x({DeclaredDecimal{"0.25", Rational(1, 1000)}});
  const TorusPoint p = x.evaluate(64);
  CHECK(p.error_bound() >= Rational(1, 1000));
  CHECK(std::abs(p.coordinate_double(0) - 0.25) < 1e-15);
  CHECK_FALSE(x.is_exact());
  CHECK(StartPoint::from_rationals({Rational(1, 3)}).is_exact());
}

TEST_CASE("rng streams are pure functions of (seed, path, stream)") {
  Rng a(1, 2, 3), b(1, 2, 3), c(1, 3, 3), d(1, 2, 4);
  std::set<std::uint64_t> firsts;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    firsts.insert(x);
  }
  CHECK(firsts.size() == 100);
  CHECK(Rng(1, 2, 3).next_u64() != c.next_u64());
  CHECK(Rng(1, 2, 3).next_u64() != d.next_u64());
}

TEST_CASE("rng uniform and below are in range and roughly uniform") {
  Rng r(9, 0);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    const auto k = r.below(10);
    REQUIRE(k < 10);
    ++counts[k];
  }
  double chi2 = 0;
  for (int c : counts) chi2 += (c - n / 10.0) * (c - n / 10.0) / (n / 10.0);
  CHECK(chi2 < 30);  // 9 dof, p ~ 4e-4
}

TEST_CASE("generator sampler frequencies follow the exact weights") {
  const GeneratorSampler s({Rational(1, 2), Rational(1, 3), Rational(1, 6)});
  Rng r(11, 0);
  std::vector<int> c(3, 0);
  const int n = 120000;
  for (int i = 0; i < n; ++i) ++c[s(r)];
  CHECK(std::abs(c[0] / double(n) - 0.5) < 0.01);
  CHECK(std::abs(c[1] / double(n) - 1 / 3.0) < 0.01);
  CHECK(std::abs(c[2] / double(n) - 1 / 6.0) < 0.01);
}

TEST_CASE("generator system validation") {
  auto sys = fixture_f1();
  CHECK_NOTHROW(sys.validate());
  sys.weights[0] = Rational(1, 5);
  CHECK_THROWS_AS(sys.validate(), ConfigError);
  auto bad = fixture_f1();
  bad.generators[0] = IntMatrix({{2, 1}, {1, 2}});
  CHECK_THROWS_AS(bad.validate(), NonUnimodular);
  auto f2 = fixture_f2();
  CHECK_NOTHROW(f2.validate());
  (*f2.labels)[0] = 2;
  CHECK_THROWS_AS(f2.validate(), ConfigError);
}
