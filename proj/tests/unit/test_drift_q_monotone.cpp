#include <doctest.h>

#include <cstdio>

#include "eqlab/drift.hpp"
#include "eqlab/fixtures.hpp"

using namespace eqlab;

// The fitted Margulis constant C(Q) on F1 should not grow with Q.
TEST_CASE("Margulis constant is nonincreasing in Q") {
  const auto sys = fixture_f1();
  const auto dec = decompose(sys);
  const auto prof = lyapunov_estimate(sys, dec, 200, 10000, 1);
  const auto qn = QuasiNorm::from_module(decompose_module(sys, dec, prof));
  const auto ys = drift_grid(2, 20);
  double prev = kInf;
  for (long Q : {2L, 3L, 5L, 8L}) {
    DriftConfig cfg;
    cfg.Q = Q;
    const auto tab = margulis_check(sys, qn, cfg, ys, 20, 10000, 1);
    std::printf("Q = %ld: C = %.6f\n", Q, tab.C);
    CHECK(tab.C_finite);
    CHECK(tab.C <= prev);
    prev = tab.C;
  }
}
