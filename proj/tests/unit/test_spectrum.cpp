#include <doctest.h>

#include <cmath>
#include <numbers>

#include "eqlab/errors.hpp"
#include "eqlab/fixtures.hpp"
#include "eqlab/rng.hpp"
#include "eqlab/spectrum.hpp"

using namespace eqlab;

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

StartPoint third() { return StartPoint::from_rationals({Rational(1, 3), Rational(0)}); }

// sum_x w_x e(<a, x>) straight from the double coordinates
Complex naive(const WalkEnsemble& ens, const Frequency& a) {
  Complex s = 0;
  for (const auto& at : ens.atoms) {
    double ph = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ph += static_cast<double>(a[i]) * at.x.coordinate_double(i);
    s += to_double(at.weight) * std::polar(1.0, kTwoPi * ph);
  }
  return s;
}

struct Geo {
  AlgebraDecomposition dec;
  QuasiNorm qn;
};

Geo geometry(const GeneratorSystem& sys) {
  Geo g;
  g.dec = decompose(sys);
  const auto prof = lyapunov_estimate(sys, g.dec, 200, 4000, 1);
  g.qn = QuasiNorm::from_module(decompose_module(sys, g.dec, prof));
  return g;
}

}  // namespace

TEST_CASE("frequency box enumerates the cube in lexicographic order") {
  const auto f = frequency_box(2, 3, false);
  CHECK(f.size() == 48);
  CHECK(f.front() == Frequency{-3, -3});
  CHECK(f.back() == Frequency{3, 3});
  for (std::size_t i = 1; i < f.size(); ++i) CHECK(f[i - 1] < f[i]);
  CHECK(frequency_box(2, 1, true).size() == 9);
  CHECK_THROWS_AS(frequency_box(2, 0, false), ConfigError);
}

TEST_CASE("phase table fast path equals the arbitrary-precision reference") {
  const auto sys = fixture_f1();
  const WalkEnsemble exact = enumerate_exact(sys, StartPoint::from_rationals({Rational(2, 7), Rational(3, 5)}), 6);
  const WalkEnsemble dyadic = sample_paths(sys, surd_start(2), 30, 3000, 4);
  for (const auto* ens : {&exact, &dyadic}) {
    const PhaseTable t(*ens);
    for (const auto& a : frequency_box(2, 3, true)) {
      const auto fast = t.coefficient(a), ref = t.coefficient(a, true);
      CHECK(std::abs(fast.value - ref.value) < 1e-12);
      CHECK(std::abs(fast.value - naive(*ens, a)) < 1e-9);
    }
  }
}

TEST_CASE("coefficients are bounded, conjugate symmetric and 1 at zero") {
  const auto ens = sample_paths(fixture_f3(), surd_start(4), 12, 2000, 8);
  const PhaseTable t(ens);
  CHECK(std::abs(t.coefficient(Frequency(4, 0)).value - Complex(1, 0)) < 1e-12);
  Rng r(1, 0);
  for (int k = 0; k < 200; ++k) {
    Frequency a(4);
    for (auto& x : a) x = static_cast<long>(r.below(41)) - 20;
    Frequency m = a;
    for (auto& x : m) x = -x;
    const Complex c = t.coefficient(a).value;
    CHECK(std::abs(c) <= 1 + 1e-12);
    CHECK(std::abs(t.coefficient(m).value - std::conj(c)) < 1e-12);
  }
}

TEST_CASE("Monte Carlo coefficients agree with the exact law within 3 sigma") {
  const auto sys = fixture_f1();
  const StartPoint x0 = StartPoint::from_rationals({Rational(1, 5), Rational(2, 5)});
  const auto ex = spectrum_scan(enumerate_exact(sys, x0, 7), 2);
  const std::size_t N = 40000;
  const auto mc = spectrum_scan(sample_paths(sys, x0, 7, N, 17), 2);
  REQUIRE(ex.frequencies == mc.frequencies);
  CHECK(ex.mode == EnsembleMode::exact);
  CHECK(mc.mode == EnsembleMode::montecarlo);
  for (std::size_t i = 0; i < ex.coefficients.size(); ++i) {
    CHECK(ex.coefficients[i].stderr_ == 0);
    CHECK(mc.coefficients[i].stderr_ == doctest::Approx(1 / std::sqrt(double(N))));
    // each of the real and imaginary parts has variance at most 1/N
    CHECK(std::abs(ex.coefficients[i].value - mc.coefficients[i].value) <= 3 * std::sqrt(2.0) * mc.coefficients[i].stderr_);
  }
}

TEST_CASE("spectrum scan kernel equals its serial reference") {
  const auto ens = sample_paths(fixture_f1(), surd_start(2), 20, 5000, 2);
  const auto a = spectrum_scan(ens, 3, false);
  const auto b = spectrum_scan(ens, 3, false, Execution::serial_reference);
  REQUIRE(a.coefficients.size() == b.coefficients.size());
  for (std::size_t i = 0; i < a.coefficients.size(); ++i)
    CHECK(std::abs(a.coefficients[i].value - b.coefficients[i].value) < 1e-12);
  CHECK(a.max_abs() == doctest::Approx(std::abs(a.coefficients[a.argmax()].value)));
}

TEST_CASE("rational orbits keep the denominator frequencies at 1") {
  const auto ens = enumerate_exact(fixture_f1(), third(), 8);
  const auto rep = spectrum_at(ens, {{3, 0}, {0, 3}, {3, 3}, {1, 0}});
  for (int i = 0; i < 3; ++i) CHECK(std::abs(rep.coefficients[i].value - Complex(1, 0)) < 1e-12);
  CHECK(std::abs(rep.coefficients[3].value) < 1);
}

TEST_CASE("measure Fourier transform of point masses") {
  ScaledMeasure m{AlgebraSpace::euclidean(2), {}, {}, 1.0};
  m.push(Eigen::Vector2d(0.25, 0), 0.5);
  m.push(Eigen::Vector2d(-0.25, 0), 0.5);
  CHECK(std::abs(fourier_coefficient(m, Eigen::Vector2d(1, 7)) - Complex(0, 0)) < 1e-12);
  CHECK(std::abs(fourier_coefficient(m, Eigen::Vector2d(2, 0)) - Complex(-1, 0)) < 1e-12);
}

TEST_CASE("decay fit recovers an exponential rate and truncates at the floor") {
  std::vector<double> n, mag;
  for (int k = 1; k <= 10; ++k) {
    n.push_back(k);
    mag.push_back(2 * std::exp(-0.3 * k));
  }
  const auto f = decay_fit(n, mag, 0);
  CHECK(f.rate == doctest::Approx(-0.3));
  CHECK(f.intercept == doctest::Approx(std::log(2.0)));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK(f.used == 10);
  CHECK(f.truncated_at == -1);
  const auto g = decay_fit(n, mag, 2 * std::exp(-0.3 * 6.5));
  CHECK(g.used == 6);
  CHECK(g.truncated_at == 7);
  CHECK(g.rate == doctest::Approx(-0.3));
  CHECK_THROWS_AS(decay_fit(n, mag, 10), InsufficientDecade);
  CHECK_THROWS_AS(decay_fit({1, 2, 3}, {1, .5, .25}, 0), std::invalid_argument);
}

TEST_CASE("Wiener granulation finds 25 separated granules") {
  PointCloud atoms{2, {}};
  std::vector<double> w;
  Rng r(5, 0);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 400; ++k) {
        const double x = 0.1 + 0.2 * i + 1e-4 * (2 * r.uniform() - 1);
        const double y = 0.1 + 0.2 * j + 1e-4 * (2 * r.uniform() - 1);
        atoms.push({x, y});
        w.push_back(1.0 / 10000);
      }
  const auto rep = wiener_granulate(atoms, w, ConvexBody::ball(2, 10), ConvexBody::ball(2, 100));
  CHECK(rep.X.size() == 25);
  CHECK(rep.captured == doctest::Approx(1.0));
  CHECK(rep.volume_heuristic == doctest::Approx(25 * std::numbers::pi * 1e-4));
  CHECK(rep.granular);
  CHECK(rep.separated);
  double s = 0;
  for (double m : rep.masses) s += m;
  CHECK(s == doctest::Approx(rep.captured));
  CHECK(captured_mass(atoms, w, rep.X, rep.Cstar) == doctest::Approx(rep.captured));
}

TEST_CASE("an equidistributed cloud is not granular") {
  // Kronecker sequence k (1/rho, 1/rho^2), rho the plastic number
  const double rho = 1.324717957244746;
  PointCloud atoms{2, {}};
  std::vector<double> w;
  for (int k = 1; k <= 20000; ++k) {
    atoms.push({std::fmod(k / rho, 1.0), std::fmod(k / (rho * rho), 1.0)});
    w.push_back(1.0 / 20000);
  }
  const auto rep = wiener_granulate(atoms, w, ConvexBody::ball(2, 10), ConvexBody::ball(2, 100));
  CHECK_FALSE(rep.granular);
  CHECK(rep.separated);
}

TEST_CASE("walk granulation of a rational orbit") {
  const auto sys = fixture_f1();
  const auto g = geometry(sys);
  const auto wg = walk_granulate(sys, g.dec, g.qn, third(), {3, 0}, 0.5, 20);
  CHECK(wg.coefficient >= 0.5);
  CHECK(wg.exact);
  CHECK(wg.n_back == 10);
  CHECK(wg.report.separated);
  CHECK(wg.report.granular);
  CHECK(wg.report.captured <= 1 + 1e-12);
  CHECK(wg.report.X.size() >= 1);
  // the law at time 10 lives on the nine points of (1/3)Z^2
  for (const auto& a : wg.nu.atoms) CHECK(a.x.denominator() == 3);
}

TEST_CASE("walk granulation rejects a coefficient below t") {
  const auto sys = fixture_f1();
  const auto g = geometry(sys);
  CHECK_THROWS_AS(walk_granulate(sys, g.dec, g.qn, surd_start(2), {1, 0}, 0.45, 12), HypothesisFailed);
  WalkGranulateOptions o;
  o.tau = 0.6;
  CHECK_THROWS_AS(walk_granulate(sys, g.dec, g.qn, third(), {3, 0}, 0.5, 10, o), ConfigError);
}

TEST_CASE("annihilator of a0 gamma E and sheet representatives") {
  const auto sys = fixture_f2();
  const auto reps = sheet_representatives(sys);
  REQUIRE(reps.size() == 4);
  CHECK(reps[0] == IntMatrix::identity(4));
  const auto E = wedderburn_decompose(compute_center(generate_identity_component_algebra(sys)));
  const auto W = annihilator_subspace({1, 0, 0, 0}, reps[0], E);
  // E = R diag(I, 0) + diag(0, Mat_2), so a0 E is the line of e_1
  CHECK(W.cols() == 3);
  CHECK(W.row(0).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("additive structure check: the hypothesis implies the mass bound") {
  const auto sys = fixture_f1();
  const auto nu = enumerate_exact(sys, StartPoint::from_rationals({Rational(1, 5), Rational(0)}), 4);
  for (unsigned k : {1u, 2u}) {
    const double t0 = std::abs(fourier_coefficient(nu, {1, 0}).value) * 0.5;
    const auto r = addstruct_check(sys, nu, {1, 0}, t0, k);
    CHECK(r.threshold == doctest::Approx(std::pow(t0, 2.0 * k) / 2));
    CHECK(r.mass <= 1 + 1e-12);
    if (r.hypothesis) CHECK(r.holds);
  }
}
