#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "eqlab/errors.hpp"
#include "eqlab/fixtures.hpp"
#include "eqlab/walk.hpp"

using namespace eqlab;

namespace {

StartPoint third() { return StartPoint::from_rationals({Rational(1, 3), Rational(0)}); }

// Exact law by brute-force recursion over all 4^n words.
std::map<std::vector<Rational>, Rational> brute_law(const GeneratorSystem& sys, const std::vector<Rational>& x,
                                                    unsigned n) {
  std::map<std::vector<Rational>, Rational> law{{x, Rational(1)}};
  for (unsigned s = 0; s < n; ++s) {
    std::map<std::vector<Rational>, Rational> next;
    for (const auto& [p, w] : law)
      for (std::size_t i = 0; i < sys.size(); ++i) {
        const TorusPoint y = act_on_torus(sys.generators[i], TorusPoint::exact(p));
        std::vector<Rational> c(p.size());
        for (std::size_t k = 0; k < c.size(); ++k) c[k] = y.coordinate(k);
        next[c] += w * sys.weights[i];
      }
    law = std::move(next);
  }
  return law;
}

}  // namespace

TEST_CASE("exact enumeration matches brute-force recursion") {
  const auto sys = fixture_f1();
  const std::vector<Rational> x{Rational(1, 5), Rational(2, 7)};
  const auto ens = enumerate_exact(sys, StartPoint::from_rationals(x), 5);
  const auto law = brute_law(sys, x, 5);
  REQUIRE(ens.size() == law.size());
  CHECK(ens.total_weight() == 1);
  for (const auto& a : ens.atoms) {
    std::vector<Rational> c{a.x.coordinate(0), a.x.coordinate(1)};
    REQUIRE(law.count(c) == 1);
    CHECK(law.at(c) == a.weight);
  }
}

TEST_CASE("exact enumeration keeps labels apart and merges equal atoms") {
  const auto sys = fixture_f2();
  const auto ens = enumerate_exact(sys, StartPoint::from_rationals(std::vector<Rational>(4)), 3);
  // the origin is fixed, so the law is the label law after 3 steps of +-1 on Z/4
  REQUIRE(ens.size() == 2);
  for (const auto& a : ens.atoms) {
    CHECK((a.label == 1 || a.label == 3));
    CHECK(a.weight == Rational(1, 2));
  }
}

TEST_CASE("enumeration budget is enforced") {
  EnumerateOptions eo;
  eo.atom_budget = 100;
  CHECK_THROWS_AS(enumerate_exact(fixture_f1(), surd_start(2), 6, eo), BudgetExceeded);
}

TEST_CASE("sample_paths: parallel kernel equals the serial reference") {
  const auto sys = fixture_f1();
  SampleOptions ser;
  ser.execution = Execution::serial_reference;
  for (const auto& x0 : {third(), surd_start(2)}) {
    const auto a = sample_paths(sys, x0, 12, 500, 42);
    const auto b = sample_paths(sys, x0, 12, 500, 42, ser);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.atoms[i].x == b.atoms[i].x);
  }
}

TEST_CASE("sample_paths is deterministic per seed and path") {
  const auto sys = fixture_f1();
  const auto a = sample_paths(sys, surd_start(2), 10, 200, 1);
  const auto b = sample_paths(sys, surd_start(2), 10, 200, 1);
  const auto c = sample_paths(sys, surd_start(2), 10, 200, 2);
  // path i depends on (seed, i) only: a prefix run reproduces the prefix
  const auto p = sample_paths(sys, surd_start(2), 10, 50, 1);
  int same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.atoms[i].x == b.atoms[i].x);
    same += a.atoms[i].x == c.atoms[i].x;
  }
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p.atoms[i].x == a.atoms[i].x);
  CHECK(same < 20);
  CHECK(a.mode == EnsembleMode::montecarlo);
  CHECK(a.total_weight() == 1);
}

TEST_CASE("kept products reproduce the endpoints") {
  SampleOptions so;
  so.keep_products = true;
  const auto ens = sample_paths(fixture_f1(), third(), 8, 100, 3, so);
  for (const auto& a : ens.atoms) {
    REQUIRE(a.product.has_value());
    CHECK(act_on_torus(*a.product, third().exact_point()) == a.x);
    CHECK(a.product->determinant() == 1);
  }
}

TEST_CASE("dyadic walks stay within the requested error") {
  const auto ens = sample_paths(fixture_f1(), surd_start(2), 40, 100, 5);
  for (const auto& a : ens.atoms) CHECK(a.x.error_log2() <= -53);
  CHECK(ens.precision_bits >= 53 + 40 * 1.5);
  CHECK(working_bits(fixture_f1(), third(), 40, 0x1.0p-53) == 0);
}

TEST_CASE("F4 Lyapunov exponent is log of the golden ratio squared") {
  const auto sys = fixture_f4();
  const auto dec = decompose(sys);
  const double want = std::log((3 + std::sqrt(5.0)) / 2);
  const auto p = lyapunov_estimate(sys, dec, 200, 50, 1);
  REQUIRE(p.exponents.size() == 2);
  const double top = std::max(p.exponents[0], p.exponents[1]);
  const double bottom = std::min(p.exponents[0], p.exponents[1]);
  CHECK(std::abs(top - want) < 1e-6);
  CHECK(std::abs(bottom + want) < 1e-6);
  CHECK(std::abs(p.top - want) < 1e-6);
}

TEST_CASE("Lyapunov kernel equals its serial reference") {
  const auto sys = fixture_f1();
  const auto dec = decompose(sys);
  LyapunovOptions ser;
  ser.execution = Execution::serial_reference;
  const auto a = lyapunov_estimate(sys, dec, 100, 300, 4);
  const auto b = lyapunov_estimate(sys, dec, 100, 300, 4, ser);
  CHECK(a.exponents == b.exponents);
  CHECK(a.top == b.top);
}

TEST_CASE("F1 Lyapunov estimates from two seeds agree") {
  const auto sys = fixture_f1();
  const auto dec = decompose(sys);
  const auto a = lyapunov_estimate(sys, dec, 200, 3000, 1);
  const auto b = lyapunov_estimate(sys, dec, 200, 3000, 2);
  const double sa = a.ci_radius[0] / 1.96, sb = b.ci_radius[0] / 1.96;
  CHECK(std::abs(a.exponents[0] - b.exponents[0]) <= 3 * std::hypot(sa, sb));
  CHECK(a.exponents[0] > 0.3);
}

TEST_CASE("Kac: mean return time to the identity coset is the index") {
  const auto st = induced_return_times(fixture_f2(), 1, 40000, 9);
  CHECK(std::abs(st.mean - 4.0) <= 3 * st.stddev / std::sqrt(40000.0));
  CHECK(st.group_order == 4);
  for (double f : st.label_frequency) CHECK(std::abs(f - 0.25) < 0.02);
  CHECK_THROWS_AS(induced_return_times(fixture_f1(), 1, 10, 1), MissingLabels);
}

TEST_CASE("large deviation probabilities shrink with n") {
  const auto sys = fixture_f1();
  const auto dec = decompose(sys);
  const double lambda = lyapunov_estimate(sys, dec, 200, 2000, 1).top;
  const auto t = large_deviation_probe(sys, lambda, 0.25, {10, 20, 40, 80}, 4000, 3);
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows.front().probability > t.rows.back().probability);
  CHECK(t.monotone);
}

TEST_CASE("rescaled walk measure: dimension, scale and determinism") {
  const auto sys = fixture_f1();
  const auto dec = decompose(sys);
  const RescalingMap map{{0.55}, 10};
  RescaledOptions ro;
  ro.fold = 2;
  const auto a = rescaled_walk_measure(sys, dec, map, 10, 300, 7, {false}, ro);
  const auto b = rescaled_walk_measure(sys, dec, map, 10, 300, 7, {false}, ro);
  CHECK(a.D() == 4);
  CHECK(a.size() == 300);
  CHECK(a.delta == doctest::Approx(std::exp(-10.0)));
  CHECK(a.coords == b.coords);
  CHECK(a.mass() == doctest::Approx(1.0));
}

TEST_CASE("mean_ci") {
  const auto m = mean_ci({1, 2, 3, 4});
  CHECK(m.mean == 2.5);
  CHECK(m.stddev == doctest::Approx(std::sqrt(5.0 / 3)));
  CHECK(m.ci == doctest::Approx(1.96 * std::sqrt(5.0 / 3) / 2));
}
