#include <doctest.h>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "eqlab/errors.hpp"
#include "eqlab/multconv.hpp"
#include "eqlab/rng.hpp"

using namespace eqlab;

namespace {

constexpr double kPi = std::numbers::pi;

// ||mu boxplus P_delta||_2 for mu on the grid h Z (1-D). The squared norm is
// sum_k A(k) (2 delta - |k| h)_+ / (2 delta)^2 with A the autocorrelation of
// the histogram of mu. With power 2 the histogram is that of nu and mu is
// nu boxminus nu, so A has spectrum |F|^4 instead of |F|^2.
double l2_oracle(const std::vector<double>& hist, double h, double delta, int power = 1) {
  std::size_t n = 1;
  while (n < 2 * static_cast<std::size_t>(power) * hist.size()) n <<= 1;
  std::vector<double> in(n, 0.0), A(n);
  std::copy(hist.begin(), hist.end(), in.begin());
  fftw_complex* F = fftw_alloc_complex(n / 2 + 1);
  fftw_plan fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), F, FFTW_ESTIMATE);
  fftw_plan bwd = fftw_plan_dft_c2r_1d(static_cast<int>(n), F, A.data(), FFTW_ESTIMATE);
  fftw_execute(fwd);
  for (std::size_t k = 0; k < n / 2 + 1; ++k) {
    const double m2 = F[k][0] * F[k][0] + F[k][1] * F[k][1];
    F[k][0] = std::pow(m2, power) / static_cast<double>(n);
    F[k][1] = 0;
  }
  fftw_execute(bwd);
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(bwd);
  fftw_free(F);
  double s = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const long lag = k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
    const double ov = 2 * delta - std::abs(static_cast<double>(lag)) * h;
    if (ov > 0) s += A[k] * ov;
  }
  return std::sqrt(std::max(0.0, s) / (4 * delta * delta));
}

std::vector<double> histogram(const std::vector<double>& xs, const std::vector<double>& ws, double h, double lo,
                              double hi) {
  std::vector<double> out(static_cast<std::size_t>(std::lround((hi - lo) / h)) + 1, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long c = std::lround((xs[i] - lo) / h);
    REQUIRE(c >= 0);
    REQUIRE(static_cast<std::size_t>(c) < out.size());
    out[static_cast<std::size_t>(c)] += ws[i];
  }
  return out;
}

std::vector<double> histogram(const ScaledMeasure& m, double h, double lo, double hi) {
  return histogram(m.coords, m.weights, h, lo, hi);
}

// histogram of the triple products of a measure on the reals
std::vector<double> cube_histogram(const ScaledMeasure& m, double h, double lo, double hi) {
  std::vector<double> xs, ws;
  for (std::size_t a = 0; a < m.size(); ++a)
    for (std::size_t b = 0; b < m.size(); ++b)
      for (std::size_t c = 0; c < m.size(); ++c) {
        xs.push_back(m.coords[a] * m.coords[b] * m.coords[c]);
        ws.push_back(m.weights[a] * m.weights[b] * m.weights[c]);
      }
  return histogram(xs, ws, h, lo, hi);
}

ScaledMeasure random_measure(std::size_t D, std::size_t n, double delta, std::uint64_t seed, double scale = 1) {
  ScaledMeasure m{AlgebraSpace::euclidean(D), {}, {}, delta};
  Rng r(seed, 0);
  std::vector<double> x(D);
  double tot = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = scale * (2 * r.uniform() - 1);
    const double w = 0.5 + r.uniform();
    m.push(x.data(), w);
    tot += w;
  }
  for (auto& w : m.weights) w /= tot;
  return m;
}

}  // namespace

TEST_CASE("ball overlap volume matches the lens formulas") {
  const double d = 0.7;
  for (double r : {0.0, 0.2, 0.7, 1.3, 1.4, 2.0}) {
    CHECK(ball_overlap_volume(1, d, r) == doctest::Approx(std::max(0.0, 2 * d - r)));
    const double lens2 = r >= 2 * d ? 0 : 2 * d * d * std::acos(r / (2 * d)) - 0.5 * r * std::sqrt(4 * d * d - r * r);
    CHECK(ball_overlap_volume(2, d, r) == doctest::Approx(lens2).epsilon(1e-9));
    const double lens3 = r >= 2 * d ? 0 : kPi * (4 * d + r) * (2 * d - r) * (2 * d - r) / 12;
    CHECK(ball_overlap_volume(3, d, r) == doctest::Approx(lens3).epsilon(1e-9));
  }
  CHECK(ball_volume(3, 2) == doctest::Approx(4 * kPi * 8 / 3));
  CHECK(ball_volume(4, 1) == doctest::Approx(kPi * kPi / 2));
}

TEST_CASE("ball overlap volume in dimension 5 against Monte Carlo") {
  Rng r(3, 0);
  const double d = 1, dist = 0.8;
  const std::size_t N = 400000;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < N; ++k) {
    double p[5], n0 = 0, n1 = 0;
    for (double& v : p) v = 2 * r.uniform() - 1;
    for (int i = 0; i < 5; ++i) {
      n0 += p[i] * p[i];
      const double q = p[i] - (i == 0 ? dist : 0.0);
      n1 += q * q;
    }
    hits += n0 <= 1 && n1 <= 1;
  }
  const double p = static_cast<double>(hits) / N;
  const double mc = 32 * p, se = 32 * std::sqrt(p * (1 - p) / N);
  CHECK(std::abs(ball_overlap_volume(5, d, dist) - mc) < 4 * se);
}

TEST_CASE("l2 norm at scale agrees with the FFT autocorrelation oracle") {
  const double delta = std::ldexp(1.0, -9), h = delta / 4;
  Rng r(5, 0);
  ScaledMeasure m{AlgebraSpace::reals(), {}, {}, delta};
  for (int i = 0; i < 500; ++i) {
    const double x = h * std::floor(r.uniform() * 4000);
    m.push(&x, 1.0 / 500);
  }
  CHECK(l2_norm_at_scale(m) == doctest::Approx(l2_oracle(histogram(m, h, 0, 4000 * h), h, delta)).epsilon(1e-9));
  // a single atom: ||P_delta||_2 = vol(B_delta)^{-1/2}
  CHECK(l2_norm_at_scale(dirac(AlgebraSpace::reals(), Eigen::VectorXd::Zero(1), delta)) ==
        doctest::Approx(1 / std::sqrt(2 * delta)));
  const auto m2 = random_measure(2, 300, 0.05, 9);
  const double want = [&] {
    double s = 0;
    for (std::size_t i = 0; i < m2.size(); ++i)
      for (std::size_t j = 0; j < m2.size(); ++j)
        s += m2.weights[i] * m2.weights[j] * ball_overlap_volume(2, 0.05, (m2.vec(i) - m2.vec(j)).norm());
    return std::sqrt(s) / ball_volume(2, 0.05);
  }();
  CHECK(l2_norm_at_scale(m2) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("cube difference of a net agrees with the FFT oracle") {
  const double delta = std::ldexp(1.0, -10);
  const auto net = uniform_net(1, 2, 1.0 / 64, delta);
  const auto cd = cube_difference(net);
  CHECK(cd.mass() == doctest::Approx(1.0));
  const double want = l2_oracle(cube_histogram(net, delta / 64, 1, 8), delta / 64, delta, 2);
  CHECK(l2_norm_at_scale(cd) == doctest::Approx(want).epsilon(0.01));
}

TEST_CASE("flatten step on a net reproduces the oracle norms") {
  const double delta = std::ldexp(1.0, -10);
  const auto net = uniform_net(1, 2, 1.0 / 64, delta);
  const auto tr = flatten_pipeline(net, 1, 0.1, 0.5, 0.1);
  REQUIRE(tr.steps.size() == 2);
  CHECK(tr.steps[0].norm == doctest::Approx(l2_oracle(histogram(net, delta / 64, 1, 2), delta / 64, delta)).epsilon(0.01));
  CHECK(tr.steps[0].norm == doctest::Approx(std::sqrt(1 / (65 * 2 * delta))));
  if (tr.steps[0].ess_removed == 0)
    CHECK(tr.steps[1].norm ==
          doctest::Approx(l2_oracle(cube_histogram(net, delta / 64, 1, 8), delta / 64, delta, 2)).epsilon(0.01));
  CHECK(tr.ratios.size() == 1);
  CHECK(tr.decreased[0] == (tr.ratios[0] < 1));
}

TEST_CASE("convolution preserves mass on both the pair and the snap paths") {
  const auto a = random_measure(2, 120, 0.01, 1), b = random_measure(2, 90, 0.01, 2);
  for (ConvMode mode : {ConvMode::add, ConvMode::sub}) {
    CHECK(convolve(a, b, mode).mass() == doctest::Approx(1.0));
    CHECK(convolve(a, b, mode).size() == a.size() * b.size());
    ConvolveOptions tight;
    tight.budget = 1000;
    tight.snap = 0.25;
    const auto s = convolve(a, b, mode, tight);
    CHECK(s.mass() == doctest::Approx(1.0));
    CHECK(s.size() < a.size() * b.size());
  }
  // x - x puts the diagonal mass sum w^2 at 0
  const auto d = convolve(a, a, ConvMode::sub);
  double diag = 0, at0 = 0;
  for (double w : a.weights) diag += w * w;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.vec(i).norm() == 0) at0 += d.weights[i];
  CHECK(at0 == doctest::Approx(diag));
}

TEST_CASE("snapping moves atoms by at most half a step and merges them") {
  const auto a = random_measure(2, 500, 0.01, 3);
  const auto s = snap_to_grid(a, 0.125);
  CHECK(s.mass() == doctest::Approx(1.0));
  CHECK(s.size() <= 17 * 17);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (int k = 0; k < 2; ++k) CHECK(std::abs(s.point(i)[k] / 0.125 - std::round(s.point(i)[k] / 0.125)) < 1e-12);
}

TEST_CASE("algebra product convolution on the reals multiplies atoms") {
  ScaledMeasure a{AlgebraSpace::reals(), {}, {}, 0.01}, b{AlgebraSpace::reals(), {}, {}, 0.01};
  for (double x : {2.0, -3.0}) a.push(&x, 0.5);
  for (double x : {0.5, 4.0}) b.push(&x, 0.5);
  const auto c = convolve(a, b, ConvMode::mul);
  std::map<double, double> got;
  for (std::size_t i = 0; i < c.size(); ++i) got[c.point(i)[0]] += c.weights[i];
  CHECK(got == std::map<double, double>{{-12, 0.25}, {-1.5, 0.25}, {1, 0.25}, {8, 0.25}});
}

TEST_CASE("affine scan in one dimension equals the brute-force best window") {
  Rng r(7, 0);
  ScaledMeasure m{AlgebraSpace::euclidean(1), {}, {}, 0.01};
  for (int i = 0; i < 400; ++i) {
    const double x = r.uniform() * r.uniform();
    m.push(&x, 1.0 / 400);
  }
  const std::vector<double> rhos{0.001, 0.01, 0.05, 0.2};
  const auto sc = affine_scan(m, rhos);
  for (std::size_t k = 0; k < rhos.size(); ++k) {
    double best = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      double s = 0;
      for (std::size_t j = 0; j < m.size(); ++j)
        if (m.point(j)[0] >= m.point(i)[0] && m.point(j)[0] < m.point(i)[0] + 2 * rhos[k]) s += m.weights[j];
      best = std::max(best, s);
    }
    CHECK(sc.mass[k] == doctest::Approx(best));
  }
}

TEST_CASE("slab masses do not exceed the best window along any sampled normal") {
  const auto m = random_measure(2, 300, 0.01, 11);
  const auto sc = affine_scan(m, {0.05});
  const Eigen::VectorXd l = sc.normal[0];
  CHECK(l.norm() == doctest::Approx(1.0));
  double s = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (std::abs(l.dot(m.vec(i)) - sc.offset[0]) < 0.05 + 1e-12) s += m.weights[i];
  CHECK(s == doctest::Approx(sc.mass[0]));
}

TEST_CASE("essential part is idempotent") {
  auto m = random_measure(2, 400, std::exp(-8.0), 13, 3);
  m.space = AlgebraSpace::euclidean(2);
  // a heavy line to be removed
  for (int i = 0; i < 60; ++i) {
    const double p[2] = {0.5, -1 + i / 30.0};
    m.push(p, 0.0005);
  }
  const auto e1 = essential_part(m, 0.1, 0.5, 0.1);
  const auto e2 = essential_part(e1.measure, 0.1, 0.5, 0.1);
  CHECK(e2.removed == doctest::Approx(0).epsilon(1e-15));
  CHECK(e2.measure.size() == e1.measure.size());
  CHECK(e2.measure.coords == e1.measure.coords);
  CHECK(e1.measure.mass() == doctest::Approx(m.mass() - e1.removed));
}

TEST_CASE("power inequality: m = 1 is an identity and matches the direct sum") {
  const auto eta = random_small_measure(5, 1e-3, 1, 0);
  const auto xis = random_frequencies(40, 10, 1, 0);
  const auto res = power_inequality_check(eta, 1, xis);
  for (std::size_t i = 0; i < xis.size(); ++i) {
    // |(eta^{*3})^|^2 = (eta^{*3} boxminus eta^{*3})^ at every frequency
    CHECK(res.lhs[i] == doctest::Approx(res.rhs[i]).epsilon(1e-12));
    std::complex<double> s = 0;
    for (std::size_t a = 0; a < eta.size(); ++a)
      for (std::size_t b = 0; b < eta.size(); ++b)
        for (std::size_t c = 0; c < eta.size(); ++c) {
          const double x = eta.point(a)[0] * eta.point(b)[0] * eta.point(c)[0];
          s += eta.weights[a] * eta.weights[b] * eta.weights[c] * std::polar(1.0, 2 * kPi * xis[i][0] * x);
        }
    CHECK(res.lhs[i] == doctest::Approx(std::norm(s)).epsilon(1e-9));
  }
  CHECK(res.slack > -1e-12);
}

TEST_CASE("power inequality holds for m = 2") {
  for (std::uint64_t idx = 0; idx < 3; ++idx) {
    const auto eta = random_small_measure(3, 1e-3, 2, idx);
    const auto res = power_inequality_check(eta, 2, random_frequencies(50, 10, 2, idx));
    CHECK(res.slack >= -1e-12);
  }
}

TEST_CASE("power check exact atom budget is enforced") {
  CHECK_THROWS_AS(power_inequality_check(random_small_measure(8, 1e-3, 3, 0), 1, {Eigen::VectorXd::Ones(1)}, 1000),
                  BudgetExceeded);
}

TEST_CASE("sum-product counts of an arithmetic and a geometric progression") {
  PointCloud ap{1, {}}, gp{1, {}};
  for (int i = 0; i < 20; ++i) {
    ap.push({static_cast<double>(i)});
    gp.push({std::ldexp(1.0, i)});
  }
  Eigen::MatrixXd two(1, 1);
  two << 2;
  const auto a = sumproduct_check(ap, {two}, 0.01);
  CHECK(a.N_A == 20);
  CHECK(a.N_AA == 39);
  CHECK(a.N_AfA[0] == 58);
  const auto g = sumproduct_check(gp, {two}, 0.01);
  CHECK(g.N_A == 20);
  CHECK(g.N_AA == 210);
  CHECK(g.ratio_AA == doctest::Approx(10.5));
  CHECK(g.growth_exponent == doctest::Approx(std::log(std::max(g.ratio_AA, g.ratio_AfA)) / std::log(100.0)));
}

TEST_CASE("additive energy of a progression") {
  PointCloud ap{1, {}};
  for (int i = 0; i < 10; ++i) ap.push({static_cast<double>(i)});
  Eigen::MatrixXd one(1, 1);
  one << 1;
  // #{x + y = x' + y'} = sum_s r(s)^2 = 670 for {0..9}
  CHECK(additive_energy(ap, one, 0.01) == doctest::Approx(670.0 / 1000));
}

TEST_CASE("generation probe counts sums of products on the lattice") {
  const double delta = 1.0 / 64;
  ScaledMeasure one{AlgebraSpace::reals(), {}, {}, delta};
  const double x1 = 1;
  one.push(&x1, 1);
  CHECK(generation_probe(one, 1, delta, 0).elements == 3);
  ScaledMeasure half{AlgebraSpace::reals(), {}, {}, delta};
  const double xh = 0.5;
  half.push(&xh, 1);
  // products {+-1/2, +-1/4}; sums of at most two of them
  const auto g = generation_probe(half, 2, delta, 0);
  CHECK(g.elements == 9);
  CHECK(g.grid_points == 129);
  // every element covers itself and both lattice neighbours, except at +-1
  CHECK(g.covered == 25);
  CHECK(g.coverage == doctest::Approx(static_cast<double>(g.covered) / g.grid_points));
  CHECK_THROWS_AS(generation_probe(half, 4, delta, 0), ConfigError);
}

TEST_CASE("multiplicative Fourier decay of a net is tabulated per convolution power") {
  const double delta = std::ldexp(1.0, -8);
  const auto net = uniform_net(1, 2, 1.0 / 16, delta);
  std::vector<Eigen::VectorXd> xis;
  for (double f : {3.0, 7.0, 20.0}) xis.push_back(Eigen::VectorXd::Constant(1, f));
  const auto t = multiplicative_fourier_decay({net}, 3, xis);
  REQUIRE(t.max_abs.size() == 3);
  for (std::size_t i = 0; i < xis.size(); ++i) CHECK(t.magnitudes[0][i] == doctest::Approx(std::abs(fourier_coefficient(net, xis[i]))));
  CHECK(t.s == std::vector<unsigned>{1, 2, 3});
}
