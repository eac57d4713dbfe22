#include <doctest.h>

#include <cmath>
#include <set>

#include "eqlab/drift.hpp"
#include "eqlab/errors.hpp"
#include "eqlab/fixtures.hpp"
#include "eqlab/rng.hpp"

using namespace eqlab;

namespace {

StartPoint third() { return StartPoint::from_rationals({Rational(1, 3), Rational(0)}); }

struct Geo {
  AlgebraDecomposition dec;
  LyapunovProfile profile;
  QuasiNorm qn;
};

Geo geometry(const GeneratorSystem& sys) {
  Geo g;
  g.dec = decompose(sys);
  g.profile = lyapunov_estimate(sys, g.dec, 200, 4000, 1);
  g.qn = QuasiNorm::from_module(decompose_module(sys, g.dec, g.profile));
  return g;
}

TorusPoint random_point(Rng& r, std::size_t d, long den = 100003) {
  std::vector<Rational> c(d);
  for (auto& v : c) {
    v = Rational(static_cast<long>(r.below(static_cast<std::uint64_t>(den))), den);
    v.canonicalize();
  }
  return TorusPoint::exact(c);
}

}  // namespace

TEST_CASE("phi from distance: cap at 0, 1 at distance 1, 0 at infinity") {
  DriftConfig cfg;
  cfg.alpha = 0.25;
  CHECK(phi_from_distance(cfg, 0) == cfg.effective_cap());
  CHECK(cfg.effective_cap() == doctest::Approx(std::pow(1e-12, -0.25)));
  CHECK(phi_from_distance(cfg, 1) == 1);
  CHECK(phi_from_distance(cfg, kInf) == 0);
  CHECK(phi_from_distance(cfg, 1e-20) == cfg.effective_cap());
  cfg.cap = 5;
  CHECK(phi_from_distance(cfg, 1e-3) == 5);
}

TEST_CASE("phi is antitone in the distance and doubling alpha squares it") {
  DriftConfig a, b;
  a.alpha = 0.1;
  b.alpha = 0.2;
  double prev = kInf;
  for (double d = 1e-9; d < 10; d *= 1.7) {
    const double v = phi_from_distance(a, d);
    CHECK(v <= prev);
    prev = v;
    CHECK(phi_from_distance(b, d) == doctest::Approx(v * v));
  }
}

TEST_CASE("phi_Q is nondecreasing in Q") {
  const auto qn = QuasiNorm::coordinate_blocks({2}, {0.6});
  Rng r(3, 0);
  for (int k = 0; k < 40; ++k) {
    const TorusPoint y = random_point(r, 2);
    double prev = 0;
    for (long Q = 1; Q <= 16; ++Q) {
      DriftConfig cfg;
      cfg.Q = Q;
      const auto p = phi_Q(cfg, qn, y);
      CHECK(p.value >= prev);
      CHECK(p.value == doctest::Approx(phi_from_distance(cfg, p.distance)));
      prev = p.value;
    }
  }
}

TEST_CASE("phi_Q is capped exactly on the rational points of denominator at most Q") {
  const auto qn = QuasiNorm::coordinate_blocks({2}, {0.6});
  DriftConfig cfg;
  cfg.Q = 4;
  CHECK(phi_Q(cfg, qn, TorusPoint::exact(std::vector<Rational>{Rational(1, 4), Rational(3, 4)})).capped);
  CHECK_FALSE(phi_Q(cfg, qn, TorusPoint::exact(std::vector<Rational>{Rational(1, 5), Rational(3, 5)})).capped);
}

TEST_CASE("drift configuration validation") {
  DriftConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.alpha = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.Q = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("drift grid points are deterministic, distinct and on the denominator") {
  const auto a = drift_grid(2, 20), b = drift_grid(2, 20);
  REQUIRE(a.size() == 20);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(1009 % a[i].denominator() == 0);
    seen.insert(a[i].to_string());
  }
  CHECK(seen.size() == 20);
  CHECK_THROWS_AS(drift_grid(0, 3), ConfigError);
}

TEST_CASE("median of means") {
  CHECK(median_of_means({1, 2, 3, 4, 5, 6}, 3) == doctest::Approx(3.5));
  double ci = 0;
  CHECK(median_of_means({1, 1, 1, 100}, 4, &ci) == doctest::Approx(1.0));
  // block means {1,1,1,100}: sd = 49.5
  CHECK(ci == doctest::Approx(2 * 49.5 / 2));
  CHECK(median_of_means({7}, 16) == 7);
  CHECK_THROWS_AS(median_of_means({}, 2), std::invalid_argument);
}

TEST_CASE("Diophantine snap finds the nearby rational point") {
  const auto qn = QuasiNorm::coordinate_blocks({2}, {1.0});
  const TorusPoint y = TorusPoint::exact(std::vector<Rational>{Rational(1000001, 3000000), Rational(2, 3)});
  const auto s = diophantine_snap(qn, y, 1e-4, 0.5, 1000);
  CHECK(s.Q_limit == 100);
  CHECK(s.Q == 3);
  CHECK(s.distance == doctest::Approx(1.0 / 3000000));
  CHECK(s.threshold == doctest::Approx(1e-2));
  CHECK(s.pass);
  // the origin snaps to q = 1 even though every q ties
  CHECK(diophantine_snap(qn, TorusPoint::origin(2), 1e-4, 0.5, 1000).Q == 1);
  // Q_max caps the search
  CHECK(diophantine_snap(qn, y, 1e-4, 0.5, 2).Q_limit == 2);
  CHECK_THROWS_AS(diophantine_snap(qn, y, 2, 0.5, 10), ConfigError);
}

TEST_CASE("Diophantine snap fails on a badly approximable point") {
  const auto qn = QuasiNorm::coordinate_blocks({2}, {1.0});
  const double g = (std::sqrt(5.0) - 1) / 2;
  const TorusPoint y = TorusPoint::exact(std::vector<Rational>{Rational(g), Rational(g * g)});
  CHECK_FALSE(diophantine_snap(qn, y, 1e-6, 0.2, 1000).pass);
}

TEST_CASE("Margulis inequality for the identity system is phi(y) itself") {
  const auto sys = fixture_identity(2);
  const auto qn = QuasiNorm::coordinate_blocks({2}, {0.7});
  DriftConfig cfg;
  cfg.Q = 3;
  const auto ys = drift_grid(2, 6);
  const auto tab = margulis_check(sys, qn, cfg, ys, 10, 200, 1);
  REQUIRE(tab.rows.size() == 6);
  for (std::size_t j = 0; j < ys.size(); ++j) {
    CHECK(tab.rows[j].estimate == doctest::Approx(tab.rows[j].phi_y));
    CHECK(tab.rows[j].ci == doctest::Approx(0).epsilon(1e-12));
    CHECK(tab.rows[j].holds);
    CHECK(tab.rows[j].holds_holdout);
  }
  CHECK(tab.decay == doctest::Approx(std::exp(-0.5 * 0.1 * 10)));
  CHECK(tab.C_finite);
  CHECK(tab.all_hold);
}

TEST_CASE("Margulis table is reproducible and its fitted C makes every row hold") {
  const auto sys = fixture_f1();
  const auto g = geometry(sys);
  DriftConfig cfg;
  cfg.Q = 3;
  const auto ys = drift_grid(2, 4);
  const auto a = margulis_check(sys, g.qn, cfg, ys, 10, 2000, 3);
  const auto b = margulis_check(sys, g.qn, cfg, ys, 10, 2000, 3);
  CHECK(a.C == b.C);
  CHECK(a.all_hold);
  CHECK(a.C >= 0);
  for (const auto& row : a.rows) {
    CHECK(row.q50 <= row.q90);
    CHECK(row.q90 <= row.q99);
    CHECK(row.q99 <= row.max);
    CHECK(row.rhs == doctest::Approx(a.decay * row.phi_y + std::pow(3.0, a.C)));
  }
}

TEST_CASE("bootstrap step with m = 0 keeps X") {
  const auto sys = fixture_f1();
  const auto g = geometry(sys);
  const auto nu = enumerate_exact(sys, third(), 3);
  PointCloud X{2, {}};
  X.push({1.0 / 3, 0});
  const Eigen::MatrixXd W(2, 0);
  const auto res = bootstrap_step(sys, g.qn, nu, X, W, 0.5, 1e-3, 0, 0.2, 1);
  CHECK(res.found);
  CHECK(res.X1.xs == X.xs);
  CHECK(res.pushed == doctest::Approx(captured_mass(torus_cloud(nu), ensemble_weights(nu), X, g.qn.ball(1e-3))));
}

TEST_CASE("bootstrap step on an invariant point mass") {
  const auto sys = fixture_f1();
  const auto g = geometry(sys);
  const auto nu = enumerate_exact(sys, StartPoint::from_rationals(std::vector<Rational>(2)), 3);
  REQUIRE(nu.size() == 1);
  PointCloud X{2, {}};
  X.push({0, 0});
  BootstrapOptions o;
  o.tuples = 50;
  const auto res = bootstrap_step(sys, g.qn, nu, X, Eigen::MatrixXd(2, 0), 0.5, 1e-6, 2, 0.2, 1, o);
  CHECK(res.pushed == doctest::Approx(1.0));
  CHECK(res.found);
  CHECK(res.intersection == doctest::Approx(1.0));
  CHECK(res.X1.size() == 1);
  CHECK(res.captured == doctest::Approx(1.0));
  CHECK(res.separated);
  CHECK_THROWS_AS(bootstrap_step(sys, g.qn, nu, X, Eigen::MatrixXd(2, 0), 0.5, 1e-2, 2, 0.2, 1, o), ConfigError);
}

TEST_CASE("end to end on a rational start recovers q = 3 at distance 0") {
  const auto sys = fixture_f1();
  const auto g = geometry(sys);
  const auto rec = theorem_e2e(sys, g.dec, g.qn, third(), {3, 0}, 0.5, 10, 0.5);
  CHECK(rec.hypothesis);
  CHECK(rec.Q == 3);
  CHECK(rec.distance == 0);
  CHECK(rec.distance_ok);
  CHECK(rec.Q_ok);
  CHECK(rec.pass);
}

TEST_CASE("end to end rejects a failed hypothesis") {
  const auto sys = fixture_f1();
  const auto g = geometry(sys);
  CHECK_THROWS_AS(theorem_e2e(sys, g.dec, g.qn, surd_start(2), {1, 0}, 0.45, 12, 0.5), HypothesisFailed);
  CHECK_THROWS_AS(theorem_e2e(sys, g.dec, g.qn, third(), {3, 0}, 1.5, 10, 0.5), HypothesisFailed);
}
