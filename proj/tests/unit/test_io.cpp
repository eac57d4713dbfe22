#include <doctest.h>

#include <cmath>
#include <sstream>

#include "eqlab/errors.hpp"
#include "eqlab/fixtures.hpp"
#include "eqlab/io.hpp"

using namespace eqlab;

namespace {

void check_same(const WalkEnsemble& a, const WalkEnsemble& b) {
  CHECK(a.mode == b.mode);
  CHECK(a.n == b.n);
  CHECK(a.seed == b.seed);
  CHECK(a.samples == b.samples);
  CHECK(a.precision_bits == b.precision_bits);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.atoms[i].x == b.atoms[i].x);
    CHECK(a.atoms[i].x.error_bound() == b.atoms[i].x.error_bound());
    CHECK(a.atoms[i].label == b.atoms[i].label);
    CHECK(a.atoms[i].weight == b.atoms[i].weight);
    REQUIRE(a.atoms[i].product.has_value() == b.atoms[i].product.has_value());
    if (a.atoms[i].product) CHECK(*a.atoms[i].product == *b.atoms[i].product);
  }
}

WalkEnsemble roundtrip(const WalkEnsemble& e) {
  std::stringstream ss;
  write_ensemble(ss, e);
  return read_ensemble(ss);
}

}  // namespace

TEST_CASE("decimal formatting round-trips doubles") {
  for (double x : {0.1, 1.0 / 3, -2.5e-300, 6.02214076e23, 0.0}) CHECK(std::stod(format_decimal(x)) == x);
  CHECK(format_decimal(INFINITY) == "inf");
  CHECK(format_decimal(-INFINITY) == "-inf");
  CHECK(format_decimal(NAN) == "nan");
}

TEST_CASE("binary cache round-trips exact ensembles with labels") {
  EnumerateOptions eo;
  eo.keep_products = true;
  const auto e = enumerate_exact(fixture_f2(), StartPoint::from_rationals({Rational(1, 3), Rational(2, 5), 0, 0}), 3, eo);
  check_same(e, roundtrip(e));
}

TEST_CASE("binary cache round-trips dyadic ensembles with products") {
  SampleOptions so;
  so.keep_products = true;
  const auto e = sample_paths(fixture_f1(), surd_start(2), 60, 50, 3, so);
  check_same(e, roundtrip(e));
}

TEST_CASE("binary cache round-trips through a file") {
  const auto e = sample_paths(fixture_f3(), surd_start(4), 10, 20, 1);
  const std::string path = "test_io_cache.eqle";
  save_ensemble(path, e);
  check_same(e, load_ensemble(path));
  std::remove(path.c_str());
}

TEST_CASE("binary cache rejects a bad magic or a truncated stream") {
  std::stringstream bad("EQLX\x01\x00\x00\x00");
  CHECK_THROWS_AS(read_ensemble(bad), ConfigError);
  std::stringstream ss;
  write_ensemble(ss, sample_paths(fixture_f1(), surd_start(2), 5, 10, 1));
  const std::string s = ss.str();
  std::stringstream cut(s.substr(0, s.size() / 2));
  CHECK_THROWS_AS(read_ensemble(cut), ConfigError);
  CHECK_THROWS_AS(load_ensemble("/nonexistent/none.eqle"), ConfigError);
}

TEST_CASE("CSV ensembles reload as Monte Carlo laws with the same doubles") {
  const auto e = enumerate_exact(fixture_f2(), StartPoint::from_rationals({Rational(1, 3), Rational(2, 5), 0, 0}), 2);
  const std::string csv = ensemble_to_csv(e);
  CHECK(csv.rfind("x1,x2,x3,x4,label,weight\n", 0) == 0);
  const auto back = ensemble_from_csv(csv);
  CHECK(back.mode == EnsembleMode::montecarlo);
  REQUIRE(back.size() == e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(back.atoms[i].x.to_double() == e.atoms[i].x.to_double());
    CHECK(back.atoms[i].label == e.atoms[i].label);
    CHECK(to_double(back.atoms[i].weight) == to_double(e.atoms[i].weight));
  }
  CHECK(ensemble_to_csv(back) == csv);
}

TEST_CASE("malformed CSV is rejected") {
  CHECK_THROWS_AS(ensemble_from_csv("x1,x2,label,weight\n0.5,abc,0,1\n"), ConfigError);
  CHECK_THROWS_AS(ensemble_from_csv("x1,x2,label,weight\n0.5,0,1\n"), ConfigError);
}

TEST_CASE("measure CSV round trip") {
  ScaledMeasure m{AlgebraSpace::euclidean(3), {}, {}, 0.01};
  m.push(Eigen::Vector3d(0.1, -2, 1e-17), 0.25);
  m.push(Eigen::Vector3d(1.0 / 3, 4, 5), 0.75);
  const auto back = measure_from_csv(measure_to_csv(m), AlgebraSpace::euclidean(3), 0.01);
  CHECK(back.coords == m.coords);
  CHECK(back.weights == m.weights);
  CHECK(back.delta == 0.01);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}
