#include "eqlab/torus_point.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "eqlab/errors.hpp"

namespace eqlab {

RationalVector RationalVector::from(const std::vector<Rational>& values) {
  RationalVector v;
  BigInt den = 1;
  for (const auto& x : values) mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), x.get_den_mpz_t());
  v.denominator = den;
  v.numerators.reserve(values.size());
  for (const auto& x : values) v.numerators.push_back(x.get_num() * (den / x.get_den()));
  return v.canonical();
}

Rational RationalVector::operator[](std::size_t i) const {
  Rational r(numerators[i], denominator);
  r.canonicalize();
  return r;
}

RationalVector RationalVector::canonical() const {
  if (denominator <= 0) throw std::invalid_argument("RationalVector: denominator must be positive");
  BigInt g = denominator;
  for (const auto& n : numerators) mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), n.get_mpz_t());
  RationalVector out;
  out.denominator = denominator / g;
  out.numerators.reserve(numerators.size());
  for (const auto& n : numerators) out.numerators.push_back(n / g);
  return out;
}

TorusPoint TorusPoint::exact(const RationalVector& v) {
  TorusPoint p;
  p.kind_ = Kind::exact;
  RationalVector c = v.canonical();
  for (auto& n : c.numerators) n = mod_floor(n, c.denominator);
  c = c.canonical();
  p.num_ = std::move(c.numerators);
  p.den_ = std::move(c.denominator);
  return p;
}

TorusPoint TorusPoint::exact(const std::vector<Rational>& coords) {
  return exact(RationalVector::from(coords));
}

TorusPoint TorusPoint::dyadic(std::vector<BigInt> numerators, unsigned bits, BigInt error_ulps) {
  TorusPoint p;
  p.kind_ = Kind::dyadic;
  p.bits_ = bits;
  p.den_ = 1;
  p.den_ <<= bits;
  for (auto& n : numerators) n = mod_floor(n, p.den_);
  p.num_ = std::move(numerators);
  p.err_ = std::move(error_ulps);
  return p;
}

Rational TorusPoint::coordinate(std::size_t i) const {
  Rational r(num_[i], den_);
  r.canonicalize();
  return r;
}

double TorusPoint::coordinate_double(std::size_t i) const {
  return eqlab::to_double(coordinate(i));
}

std::vector<double> TorusPoint::to_double() const {
  std::vector<double> out(dim());
  for (std::size_t i = 0; i < dim(); ++i) out[i] = coordinate_double(i);
  return out;
}

Rational TorusPoint::error_bound() const {
  if (kind_ == Kind::exact) return 0;
  Rational r(err_, den_);
  r.canonicalize();
  return r;
}

double TorusPoint::error_log2() const {
  if (kind_ == Kind::exact || err_ == 0) return -std::numeric_limits<double>::infinity();
  long exp = 0;
  double mant = mpz_get_d_2exp(&exp, err_.get_mpz_t());
  return std::log2(mant) + static_cast<double>(exp) - static_cast<double>(bits_);
}

TorusPoint TorusPoint::widened(unsigned bits) const {
  if (kind_ != Kind::dyadic) throw std::logic_error("widened: exact point");
  if (bits < bits_) throw std::invalid_argument("widened: cannot reduce precision");
  std::vector<BigInt> num = num_;
  for (auto& n : num) n <<= (bits - bits_);
  BigInt err = err_;
  err <<= (bits - bits_);
  return dyadic(std::move(num), bits, std::move(err));
}

std::string TorusPoint::to_string() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < dim(); ++i) {
    if (i) os << ", ";
    if (kind_ == Kind::exact) {
      os << eqlab::to_string(coordinate(i));
    } else {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", coordinate_double(i));
      os << buf;
    }
  }
  os << ")";
  return os.str();
}

TorusPoint act_on_torus(const IntMatrix& g, const TorusPoint& x, int max_error_bits) {
  if (g.dim() != x.dim()) throw DimensionMismatch("act_on_torus: dimension mismatch");
  const std::size_t d = x.dim();
  std::vector<BigInt> num(d);
  for (std::size_t r = 0; r < d; ++r) {
    BigInt acc = 0;
    for (std::size_t c = 0; c < d; ++c) acc += g(r, c) * x.numerators()[c];
    num[r] = mod_floor(acc, x.denominator());
  }
  if (x.is_exact()) {
    RationalVector v{std::move(num), x.denominator()};
    return TorusPoint::exact(v);
  }
  BigInt err = x.error_ulps() * g.row_sum_norm();
  // err * 2^-bits <= 2^-max_error_bits  <=>  err <= 2^(bits - max_error_bits)
  long slack = static_cast<long>(x.precision_bits()) - max_error_bits;
  bool ok;
  if (slack < 0) {
    ok = err == 0;
  } else {
    BigInt limit = 1;
    limit <<= static_cast<unsigned long>(slack);
    ok = err <= limit;
  }
  if (!ok) {
    throw PrecisionExhausted("act_on_torus: error bound exceeds 2^-" + std::to_string(max_error_bits) +
                             " at " + std::to_string(x.precision_bits()) + " bits");
  }
  return TorusPoint::dyadic(std::move(num), x.precision_bits(), std::move(err));
}

std::vector<double> centered_difference(const TorusPoint& x, const TorusPoint& y) {
  if (x.dim() != y.dim()) throw DimensionMismatch("centered_difference: dimension mismatch");
  std::vector<double> out(x.dim());
  const Rational half(1, 2);
  for (std::size_t i = 0; i < x.dim(); ++i) {
    Rational diff = x.coordinate(i) - y.coordinate(i);
    // shift into [-1/2, 1/2)
    Rational shifted = diff + half;
    Rational centered = frac(shifted) - half;
    out[i] = to_double(centered);
  }
  return out;
}

StartPoint::StartPoint(std::vector<CoordinateSpec> coords) : coords_(std::move(coords)) {}

StartPoint StartPoint::from_rationals(const std::vector<Rational>& coords) {
  std::vector<CoordinateSpec> specs(coords.begin(), coords.end());
  return StartPoint(std::move(specs));
}

bool StartPoint::is_exact() const {
  for (const auto& c : coords_) {
    if (!std::holds_alternative<Rational>(c)) return false;
  }
  return true;
}

TorusPoint StartPoint::exact_point() const {
  std::vector<Rational> r;
  r.reserve(coords_.size());
  for (const auto& c : coords_) {
    if (!std::holds_alternative<Rational>(c)) throw std::logic_error("exact_point: irrational coordinate");
    r.push_back(std::get<Rational>(c));
  }
  return TorusPoint::exact(r);
}

BigInt surd_fixed_point(const Surd& s, unsigned bits) {
  if (s.c == 0) throw std::invalid_argument("surd: zero denominator");
  if (s.k < 0) throw std::invalid_argument("surd: negative radicand");
  BigInt scale = 1;
  scale <<= bits;
  // |b| sqrt(k) 2^bits = sqrt(b^2 k 4^bits), floored.
  BigInt radicand = s.b * s.b * s.k * scale * scale;
  BigInt root;
  mpz_sqrt(root.get_mpz_t(), radicand.get_mpz_t());
  BigInt numer = s.a * scale + (s.b < 0 ? BigInt(-root) : root);
  BigInt den = s.c;
  if (den < 0) {
    den = -den;
    numer = -numer;
  }
  BigInt q;
  mpz_fdiv_q(q.get_mpz_t(), numer.get_mpz_t(), den.get_mpz_t());
  return q;
}

TorusPoint StartPoint::evaluate(unsigned bits) const {
  std::vector<BigInt> num;
  num.reserve(coords_.size());
  BigInt err = 0;
  BigInt scale = 1;
  scale <<= bits;
  for (const auto& c : coords_) {
    if (const auto* r = std::get_if<Rational>(&c)) {
      BigInt n;
      BigInt top = r->get_num() * scale;
      mpz_fdiv_q(n.get_mpz_t(), top.get_mpz_t(), r->get_den_mpz_t());
      num.push_back(n);
      if (err < 1) err = 1;
    } else if (const auto* s = std::get_if<Surd>(&c)) {
      num.push_back(surd_fixed_point(*s, bits));
      if (err < 2) err = 2;
    } else {
      const auto& dd = std::get<DeclaredDecimal>(c);
      Rational value = parse_rational(dd.digits);
      BigInt n;
      BigInt top = value.get_num() * scale;
      mpz_fdiv_q(n.get_mpz_t(), top.get_mpz_t(), value.get_den_mpz_t());
      num.push_back(n);
      Rational e = dd.error * Rational(scale);
      BigInt ulps;
      mpz_cdiv_q(ulps.get_mpz_t(), e.get_num_mpz_t(), e.get_den_mpz_t());
      ulps += 1;
      if (err < ulps) err = ulps;
    }
  }
  return TorusPoint::dyadic(std::move(num), bits, std::move(err));
}

TorusPoint StartPoint::point(unsigned bits) const {
  return is_exact() ? exact_point() : evaluate(bits);
}

}  // namespace eqlab
