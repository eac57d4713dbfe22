#include "eqlab/spectrum.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "eqlab/diagnostics.hpp"
#include "eqlab/errors.hpp"

namespace eqlab {

namespace {

using u128 = unsigned __int128;
using i128 = __int128;

struct Neumaier {
  double s = 0, c = 0;
  void add(double x) {
    const double t = s + x;
    if (std::fabs(s) >= std::fabs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

// Phase f in (-1/2, 1/2) \ {0}: e^{2 i pi f} with cos even and sin odd
// exactly, so conjugate frequencies give conjugate sums.
inline void add_phase(long double f, double w, Neumaier& re, Neumaier& im) {
  const bool neg = f < 0;
  const double t = static_cast<double>(2.0L * std::numbers::pi_v<long double> * (neg ? -f : f));
  const double c = std::cos(t);
  const double s = std::sin(t);
  re.add(w * c);
  im.add(neg ? -w * s : w * s);
}

inline u128 mask_of(unsigned bits) { return bits >= 128 ? ~u128{0} : ((u128{1} << bits) - 1); }

u128 to_u128(const BigInt& v) {
  // v in [0, 2^128)
  BigInt lo = v & BigInt("18446744073709551615");
  BigInt hi = v >> 64;
  return (static_cast<u128>(mpz_get_ui(hi.get_mpz_t())) << 64) | static_cast<u128>(mpz_get_ui(lo.get_mpz_t()));
}

i128 to_i128_small(const BigInt& v) {
  // |v| < 2^63
  return static_cast<i128>(mpz_get_si(v.get_mpz_t()));
}

long double u128_over_pow2(u128 m, unsigned bits) { return std::ldexp(static_cast<long double>(m), -static_cast<int>(bits)); }

double l1(const Frequency& a) {
  double s = 0;
  for (long v : a) s += std::fabs(static_cast<double>(v));
  return s;
}

}  // namespace

PhaseTable::PhaseTable(const WalkEnsemble& ens) {
  const std::size_t n = ens.size();
  d_ = ens.dim();
  montecarlo_ = ens.mode == EnsembleMode::montecarlo;
  N_ = ens.samples;
  w_.resize(n);
  if (!montecarlo_) wq_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w_[i] = ens.weight(i);
    if (!montecarlo_) wq_[i] = ens.atoms[i].weight;
  }
  gnum_.resize(n);
  gden_.resize(n);
  bool all_dyadic = n > 0, all_exact = n > 0;
  unsigned bits = n > 0 ? ens.atoms[0].x.precision_bits() : 0;
  for (std::size_t i = 0; i < n; ++i) {
    const TorusPoint& x = ens.atoms[i].x;
    if (x.dim() != d_) throw DimensionMismatch("PhaseTable: mixed dimensions");
    gnum_[i] = x.numerators();
    if (x.is_exact()) {
      all_dyadic = false;
      gden_[i] = x.denominator();
      if (bit_length(x.denominator()) >= 62) all_exact = false;
    } else {
      all_exact = false;
      if (x.precision_bits() != bits) all_dyadic = false;
      gden_[i] = BigInt(1) << x.precision_bits();
      max_err_ = std::max(max_err_, to_double(x.error_bound()));
    }
  }
  if (all_dyadic && bits <= 128) {
    kind_ = Kind::dyadic128;
    bits_ = bits;
    un_.resize(n * d_);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d_; ++k) un_[i * d_ + k] = to_u128(gnum_[i][k]);
  } else if (all_exact) {
    kind_ = Kind::exact128;
    en_.resize(n * d_);
    den_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      den_[i] = to_i128_small(gden_[i]);
      for (std::size_t k = 0; k < d_; ++k) en_[i * d_ + k] = to_i128_small(gnum_[i][k]);
    }
  }
}

Coefficient PhaseTable::coefficient(const Frequency& a, bool reference) const {
  if (a.size() != d_) throw DimensionMismatch("fourier_coefficient: frequency dimension");
  const std::size_t n = w_.size();
  Neumaier re, im;
  // exact residues 0 and 1/2
  Rational q0 = 0, qh = 0;
  Neumaier f0, fh;
  auto bucket = [&](std::size_t i, bool half) {
    if (montecarlo_) {
      (half ? fh : f0).add(w_[i]);
    } else {
      (half ? qh : q0) += wq_[i];
    }
  };
  const Kind kind = reference ? Kind::generic : kind_;
  if (kind == Kind::dyadic128) {
    const u128 mask = mask_of(bits_);
    const u128 half = u128{1} << (bits_ - 1);
    std::vector<u128> ua(d_);
    for (std::size_t k = 0; k < d_; ++k) ua[k] = static_cast<u128>(static_cast<i128>(a[k]));
    for (std::size_t i = 0; i < n; ++i) {
      u128 r = 0;
      for (std::size_t k = 0; k < d_; ++k) r += ua[k] * un_[i * d_ + k];
      r &= mask;
      if (r == 0) {
        bucket(i, false);
      } else if (r == half) {
        bucket(i, true);
      } else if (r > half) {
        add_phase(-u128_over_pow2(((~r) + 1) & mask, bits_), w_[i], re, im);
      } else {
        add_phase(u128_over_pow2(r, bits_), w_[i], re, im);
      }
    }
  } else if (kind == Kind::exact128) {
    for (std::size_t i = 0; i < n; ++i) {
      const i128 den = den_[i];
      i128 r = 0;
      for (std::size_t k = 0; k < d_; ++k) {
        i128 ak = static_cast<i128>(a[k]) % den;
        if (ak < 0) ak += den;
        r = (r + ak * en_[i * d_ + k]) % den;
      }
      if (r == 0) {
        bucket(i, false);
      } else if (2 * r == den) {
        bucket(i, true);
      } else if (2 * r > den) {
        add_phase(-static_cast<long double>(den - r) / static_cast<long double>(den), w_[i], re, im);
      } else {
        add_phase(static_cast<long double>(r) / static_cast<long double>(den), w_[i], re, im);
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      BigInt s = 0;
      for (std::size_t k = 0; k < d_; ++k) s += BigInt(a[k]) * gnum_[i][k];
      const BigInt& den = gden_[i];
      const BigInt r = mod_floor(s, den);
      if (r == 0) {
        bucket(i, false);
      } else if (2 * r == den) {
        bucket(i, true);
      } else {
        const bool neg = 2 * r > den;
        Rational f(neg ? BigInt(den - r) : r, den);
        f.canonicalize();
        // numerator and denominator to long double without the 53-bit cut
        const long double v = static_cast<long double>(to_double(f));
        const long double corr = static_cast<long double>(to_double(f - Rational(static_cast<double>(v))));
        add_phase(neg ? -(v + corr) : v + corr, w_[i], re, im);
      }
    }
  }
  Coefficient c;
  const double b0 = montecarlo_ ? f0.value() : to_double(q0);
  const double bh = montecarlo_ ? fh.value() : to_double(qh);
  c.value = Complex((b0 - bh) + re.value(), im.value());
  if (montecarlo_ && N_ > 0) c.stderr_ = 1.0 / std::sqrt(static_cast<double>(N_));
  if (max_err_ > 0) c.error_bound = 2.0 * std::numbers::pi * l1(a) * max_err_;
  return c;
}

Coefficient fourier_coefficient(const WalkEnsemble& ens, const Frequency& a) { return PhaseTable(ens).coefficient(a); }

Complex fourier_coefficient(const ScaledMeasure& m, const Eigen::VectorXd& xi) {
  if (static_cast<std::size_t>(xi.size()) != m.D()) throw DimensionMismatch("fourier_coefficient: frequency dimension");
  Neumaier re, im;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double t = 2.0 * std::numbers::pi * xi.dot(m.vec(i));
    re.add(m.weights[i] * std::cos(t));
    im.add(m.weights[i] * std::sin(t));
  }
  return {re.value(), im.value()};
}

double FourierReport::max_abs(bool skip_zero) const {
  const std::size_t i = argmax(skip_zero);
  return i < coefficients.size() ? std::abs(coefficients[i].value) : 0.0;
}

std::size_t FourierReport::argmax(bool skip_zero) const {
  std::size_t best = coefficients.size();
  double bv = -1;
  for (std::size_t i = 0; i < coefficients.size(); ++i) {
    if (skip_zero && std::all_of(frequencies[i].begin(), frequencies[i].end(), [](long v) { return v == 0; }))
      continue;
    const double v = std::abs(coefficients[i].value);
    if (v > bv) {
      bv = v;
      best = i;
    }
  }
  return best;
}

std::vector<Frequency> frequency_box(std::size_t d, long A_max, bool include_zero) {
  if (A_max < 1) throw ConfigError("A_max", "must be at least 1");
  std::vector<Frequency> out;
  Frequency a(d, -A_max);
  while (true) {
    const bool zero = std::all_of(a.begin(), a.end(), [](long v) { return v == 0; });
    if (include_zero || !zero) out.push_back(a);
    std::size_t k = d;
    while (k > 0) {
      --k;
      if (a[k] < A_max) {
        ++a[k];
        break;
      }
      a[k] = -A_max;
      if (k == 0) return out;
    }
    if (d == 0) return out;
  }
}

FourierReport spectrum_at(const WalkEnsemble& ens, const std::vector<Frequency>& freqs, Execution exec) {
  const PhaseTable table(ens);
  FourierReport rep;
  rep.frequencies = freqs;
  rep.coefficients.resize(freqs.size());
  rep.n = ens.n;
  rep.mode = ens.mode;
  rep.samples = ens.samples;
  const auto m = static_cast<long>(freqs.size());
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < m; ++i) rep.coefficients[i] = table.coefficient(freqs[i]);
  } else {
    for (long i = 0; i < m; ++i) rep.coefficients[i] = table.coefficient(freqs[i], true);
  }
  return rep;
}

FourierReport spectrum_scan(const WalkEnsemble& ens, long A_max, bool include_zero, Execution exec) {
  return spectrum_at(ens, frequency_box(ens.dim(), A_max, include_zero), exec);
}

DecayFit decay_fit(const std::vector<double>& n, const std::vector<double>& magnitude, double floor) {
  if (n.size() != magnitude.size()) throw DimensionMismatch("decay_fit: one magnitude per grid point");
  if (n.size() < 4) throw std::invalid_argument("decay_fit: at least four grid points");
  DecayFit fit;
  std::size_t used = 0;
  while (used < n.size() && magnitude[used] > floor) ++used;
  if (used < n.size()) fit.truncated_at = static_cast<long>(n[used]);
  if (used < 2) throw InsufficientDecade("decay_fit: signal at the noise floor after " + std::to_string(used) + " points");
  fit.used = used;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < used; ++i) {
    mx += n[i];
    my += std::log(magnitude[i]);
  }
  mx /= static_cast<double>(used);
  my /= static_cast<double>(used);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < used; ++i) {
    const double dx = n[i] - mx, dy = std::log(magnitude[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  fit.rate = sxy / sxx;
  fit.intercept = my - fit.rate * mx;
  fit.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

namespace {

Frequency row_times(const Frequency& a, const IntMatrix& g) {
  const std::size_t d = g.dim();
  Frequency out(d);
  for (std::size_t j = 0; j < d; ++j) {
    BigInt s = 0;
    for (std::size_t i = 0; i < d; ++i) s += BigInt(a[i]) * g(i, j);
    if (!s.fits_slong_p()) throw BudgetExceeded("frequency entry exceeds 64 bits");
    out[j] = s.get_si();
  }
  return out;
}

using MatrixLaw = std::map<std::vector<BigInt>, Rational>;

MatrixLaw sum_law(const MatrixLaw& a, const MatrixLaw& b, int sign, std::size_t budget) {
  if (a.size() * b.size() > budget) throw BudgetExceeded("addstruct_check: support budget");
  MatrixLaw out;
  for (const auto& [ka, wa] : a)
    for (const auto& [kb, wb] : b) {
      std::vector<BigInt> k(ka.size());
      for (std::size_t i = 0; i < k.size(); ++i) k[i] = sign > 0 ? BigInt(ka[i] + kb[i]) : BigInt(ka[i] - kb[i]);
      out[std::move(k)] += wa * wb;
    }
  return out;
}

}  // namespace

AddStructResult addstruct_check(const GeneratorSystem& sys, const WalkEnsemble& nu, const Frequency& a0, double t0,
                                unsigned k, std::size_t budget) {
  if (k == 0) throw ConfigError("k", "must be positive");
  if (a0.size() != sys.dim() || nu.dim() != sys.dim()) throw DimensionMismatch("addstruct_check: dimensions");
  const PhaseTable table(nu);
  AddStructResult res;
  Complex c = 0;
  for (std::size_t i = 0; i < sys.size(); ++i)
    c += to_double(sys.weights[i]) * table.coefficient(row_times(a0, sys.generators[i])).value;
  res.coefficient = std::abs(c);
  // t0 is usually itself a measured coefficient; allow its last-bit rounding
  res.hypothesis = res.coefficient >= t0 * (1.0 - 1e-12);
  res.threshold = std::pow(t0, 2.0 * k) / 2.0;

  MatrixLaw mu;
  for (std::size_t i = 0; i < sys.size(); ++i) mu[sys.generators[i].entries()] += sys.weights[i];
  MatrixLaw sk = mu;
  for (unsigned j = 1; j < k; ++j) sk = sum_law(sk, mu, +1, budget);
  const MatrixLaw diff = sum_law(sk, sk, -1, budget);
  res.support = diff.size();

  std::vector<const std::pair<const std::vector<BigInt>, Rational>*> items;
  items.reserve(diff.size());
  for (const auto& kv : diff) items.push_back(&kv);
  const std::size_t d = sys.dim();
  std::vector<char> in_A(items.size(), 0);
  const auto m = static_cast<long>(items.size());
  std::vector<Frequency> freqs(items.size());
  for (long i = 0; i < m; ++i) {
    freqs[i].assign(d, 0);
    for (std::size_t col = 0; col < d; ++col) {
      BigInt s = 0;
      for (std::size_t row = 0; row < d; ++row) s += BigInt(a0[row]) * items[i]->first[row * d + col];
      if (!s.fits_slong_p()) throw BudgetExceeded("frequency entry exceeds 64 bits");
      freqs[i][col] = s.get_si();
    }
  }
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < m; ++i) in_A[i] = std::abs(table.coefficient(freqs[i]).value) >= res.threshold;
  Rational mass = 0;
  for (long i = 0; i < m; ++i)
    if (in_A[i]) {
      mass += items[i]->second;
      ++res.set_size;
    }
  res.mass = to_double(mass);
  res.holds = res.hypothesis && res.mass >= res.threshold;
  return res;
}

namespace {

// Points of [0,1)^d indexed for queries "which stored y have y - p in the
// body modulo Z^d". Bodies of half-width below 1/2 are tested on the
// centered difference through a periodic grid; wider bodies scan every
// stored point and also try the lifts in {-1,0,1}^d.
class TorusIndex {
 public:
  TorusIndex(std::size_t d, const ConvexBody& body) : d_(d) {
    const std::vector<double> h = body.extent();
    gd_ = std::min<std::size_t>(d, 4);
    double hm = 0, hall = 0;
    for (std::size_t k = 0; k < d; ++k) hall = std::max(hall, h[k]);
    for (std::size_t k = 0; k < gd_; ++k) hm = std::max(hm, h[k]);
    narrow_ = std::isfinite(hall) && hall < 0.5;
    box_.resize(d);
    for (std::size_t k = 0; k < d; ++k) box_[k] = h[k] * (1.0 + 1e-9) + 1e-15;
    if (narrow_ && hm > 0) {
      cell_ = hm;
      wrap_ = static_cast<long>(std::floor(1.0 / cell_));
      if (wrap_ < 3) wrap_ = 1;
    } else {
      cell_ = 1.0;
      wrap_ = 1;
    }
    if (d > kMaxDim) throw DimensionMismatch("torus index: dimension above 32");
    const Eigen::MatrixXd N = body.normalizer();
    rows_ = static_cast<std::size_t>(N.rows());
    norm_.resize(rows_ * d);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = 0; k < d; ++k)
        norm_[r * d + k] = N(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
    sizes_ = body.block_sizes();
    lifts_ = 1;
    if (!narrow_)
      for (std::size_t k = 0; k < d; ++k) lifts_ *= 3;
  }

  // All points of a cloud, stored cell by cell so that a query walks
  // contiguous memory.
  void insert_all(const PointCloud& pc) {
    std::vector<std::uint64_t> keys(pc.size());
    for (std::size_t i = 0; i < pc.size(); ++i) keys[i] = key(cell_of(pc.point(i)));
    std::vector<std::size_t> order(pc.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    pts_.reserve(pc.size() * d_);
    ids_.reserve(pc.size());
    for (auto i : order) insert(pc.point(i), i);
  }

  void insert(const double* p, std::size_t id) {
    pts_.insert(pts_.end(), p, p + d_);
    ids_.push_back(id);
    cells_[key(cell_of(p))].push_back(ids_.size() - 1);
  }

  bool member(const double* p, std::size_t slot) const {
    double zb[kMaxDim], yb[kMaxDim];
    const double* y = pts_.data() + slot * d_;
    for (std::size_t k = 0; k < d_; ++k) {
      double v = y[k] - p[k];
      if (v > 0.5)
        v -= v < 1.5 ? 1.0 : std::round(v);
      else if (v < -0.5)
        v += v > -1.5 ? 1.0 : -std::round(v);
      if (narrow_ && std::fabs(v) > box_[k]) return false;
      zb[k] = v;
    }
    if (narrow_) return inside(zb);
    for (std::size_t code = 0; code < lifts_; ++code) {
      std::size_t t = code;
      for (std::size_t k = 0; k < d_; ++k) {
        yb[k] = zb[k] + static_cast<double>(static_cast<long>(t % 3) - 1);
        t /= 3;
      }
      if (inside(yb)) return true;
    }
    return false;
  }

  // f(id) for every stored point in p + body; f returns false to stop.
  template <class F>
  void query(const double* p, F&& f) const {
    const Cell c = cell_of(p);
    std::size_t total = 1;
    if (wrap_ > 1)
      for (std::size_t k = 0; k < gd_; ++k) total *= 3;
    Cell k{};
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t t = code;
      for (std::size_t j = 0; j < gd_; ++j) {
        const long off = wrap_ > 1 ? static_cast<long>(t % 3) - 1 : 0;
        t /= 3;
        k[j] = ((c[j] + off) % wrap_ + wrap_) % wrap_;
      }
      auto it = cells_.find(key(k));
      if (it == cells_.end()) continue;
      for (auto slot : it->second)
        if (member(p, slot) && !f(ids_[slot])) return;
    }
  }

 private:
  static constexpr std::size_t kMaxDim = 32;
  // same test as ConvexBody::contains: every normalized block within 1
  bool inside(const double* z) const {
    constexpr double lim = (1.0 + 1e-12) * (1.0 + 1e-12);
    std::size_t r = 0;
    for (std::size_t b : sizes_) {
      double q = 0;
      for (std::size_t e = 0; e < b; ++e, ++r) {
        const double* row = norm_.data() + r * d_;
        double s = 0;
        for (std::size_t k = 0; k < d_; ++k) s += row[k] * z[k];
        q += s * s;
      }
      if (q > lim) return false;
    }
    return true;
  }
  using Cell = std::array<long, 4>;
  Cell cell_of(const double* p) const {
    Cell c{};
    if (wrap_ <= 1) return c;
    for (std::size_t k = 0; k < gd_; ++k) {
      const double v = p[k] - std::floor(p[k]);
      c[k] = std::min(static_cast<long>(std::floor(v / cell_)), wrap_ - 1);
    }
    return c;
  }
  std::uint64_t key(const Cell& c) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t k = 0; k < gd_; ++k) {
      const long v = c[k];
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ULL;
    }
    return h;
  }
  std::size_t d_, gd_ = 0;
  std::size_t rows_ = 0;
  std::vector<double> norm_;
  std::vector<double> box_;  // bounding half-widths, a prefilter
  std::vector<std::size_t> sizes_;
  bool narrow_ = false;
  double cell_ = 1;
  long wrap_ = 1;
  std::size_t lifts_ = 1;
  std::vector<double> pts_;
  std::vector<std::size_t> ids_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

}  // namespace

double captured_mass(const PointCloud& atoms, const std::vector<double>& weights, const PointCloud& X,
                     const ConvexBody& C) {
  if (weights.size() != atoms.size()) throw DimensionMismatch("captured_mass: one weight per atom");
  if (X.size() == 0) return 0;
  if (X.D != atoms.D || C.dim() != atoms.D) throw DimensionMismatch("captured_mass: dimensions");
  TorusIndex idx(atoms.D, C);
  for (std::size_t j = 0; j < X.size(); ++j) idx.insert(X.point(j), j);
  const auto n = static_cast<long>(atoms.size());
  std::vector<char> hit(atoms.size(), 0);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i)
    idx.query(atoms.point(i), [&](std::size_t) {
      hit[i] = 1;
      return false;
    });
  Neumaier s;
  for (long i = 0; i < n; ++i)
    if (hit[i]) s.add(weights[i]);
  return std::min(1.0, s.value());
}

GranulationReport granulate_torus(const PointCloud& atoms, const std::vector<double>& weights,
                                  const ConvexBody& Bstar, const ConvexBody& Cstar, const GranulateOptions& opt) {
  const std::size_t n = atoms.size(), d = atoms.D;
  if (weights.size() != n) throw DimensionMismatch("granulate: one weight per atom");
  if (Bstar.dim() != d || Cstar.dim() != d) throw DimensionMismatch("granulate: body dimension");
  GranulationReport rep;
  rep.Bstar = Bstar;
  rep.Cstar = Cstar;
  rep.X.D = d;
  if (n == 0) {
    rep.separated = true;
    return rep;
  }
  const std::size_t stride = opt.candidate_cap > 0 && n > opt.candidate_cap
                                 ? (n + opt.candidate_cap - 1) / opt.candidate_cap
                                 : 1;
  if (stride > 1) note(Warning::candidate_stride);
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < n; i += stride) cand.push_back(i);
  rep.candidates = cand.size();

  // neighborhood masses nu(c + C*)
  TorusIndex all(d, Cstar);
  all.insert_all(atoms);
  std::vector<double> mass(cand.size());
  const auto m = static_cast<long>(cand.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (long j = 0; j < m; ++j) {
    // query order is fixed by the index layout
    Neumaier s;
    all.query(atoms.point(cand[j]), [&](std::size_t id) {
      s.add(weights[id]);
      return true;
    });
    mass[j] = s.value();
  }

  std::vector<std::size_t> order(cand.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mass[a] > mass[b]; });
  TorusIndex chosen(d, Bstar);
  for (auto j : order) {
    const double* p = atoms.point(cand[j]);
    bool blocked = false;
    chosen.query(p, [&](std::size_t) {
      blocked = true;
      return false;
    });
    if (blocked) continue;
    chosen.insert(p, rep.atom_index.size());
    rep.atom_index.push_back(cand[j]);
    rep.masses.push_back(mass[j]);
    rep.X.push(p);
  }

  // (X - X) meets B* only at 0
  TorusIndex check(d, Bstar);
  for (std::size_t j = 0; j < rep.X.size(); ++j) check.insert(rep.X.point(j), j);
  rep.separated = true;
  for (std::size_t j = 0; j < rep.X.size() && rep.separated; ++j)
    check.query(rep.X.point(j), [&](std::size_t other) {
      if (other != j) rep.separated = false;
      return rep.separated;
    });

  rep.captured = captured_mass(atoms, weights, rep.X, Cstar);
  const double vol = std::min(1.0, Cstar.volume());
  rep.volume_heuristic = static_cast<double>(rep.X.size()) * vol;
  rep.granular = rep.captured > 2.0 * rep.volume_heuristic;
  return rep;
}

GranulationReport wiener_granulate(const PointCloud& atoms, const std::vector<double>& weights, const ConvexBody& B,
                                   const ConvexBody& C, const GranulateOptions& opt) {
  return granulate_torus(atoms, weights, B.polar(), C.polar(), opt);
}

PointCloud torus_cloud(const WalkEnsemble& ens) {
  PointCloud pc;
  pc.D = ens.dim();
  pc.xs.reserve(ens.size() * pc.D);
  for (const auto& a : ens.atoms)
    for (std::size_t k = 0; k < pc.D; ++k) pc.xs.push_back(a.x.coordinate_double(k));
  return pc;
}

std::vector<double> ensemble_weights(const WalkEnsemble& ens) {
  std::vector<double> w(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) w[i] = ens.weight(i);
  return w;
}

WalkEnsemble walk_law(const GeneratorSystem& sys, const StartPoint& x0, unsigned n, std::size_t exact_budget,
                      std::size_t samples, std::uint64_t seed) {
  try {
    EnumerateOptions eo;
    eo.atom_budget = exact_budget;
    return enumerate_exact(sys, x0, n, eo);
  } catch (const BudgetExceeded&) {
    note(Warning::montecarlo_fallback);
    return sample_paths(sys, x0, n, samples, seed);
  }
}

std::vector<IntMatrix> sheet_representatives(const GeneratorSystem& sys) {
  const std::size_t d = sys.dim();
  const int order = sys.has_labels() ? sys.group.order() : 1;
  std::vector<std::optional<IntMatrix>> rep(order);
  rep[0] = IntMatrix::identity(d);
  std::vector<std::pair<int, IntMatrix>> frontier{{0, IntMatrix::identity(d)}};
  int found = 1;
  for (int depth = 0; depth < 64 && found < order && !frontier.empty(); ++depth) {
    std::vector<std::pair<int, IntMatrix>> next;
    for (const auto& [l, g] : frontier)
      for (std::size_t i = 0; i < sys.size(); ++i) {
        const int nl = sys.group.mul(sys.label(i), l);
        if (rep[nl]) continue;
        IntMatrix h = sys.generators[i] * g;
        rep[nl] = h;
        ++found;
        next.emplace_back(nl, std::move(h));
      }
    frontier = std::move(next);
  }
  std::vector<IntMatrix> out;
  for (int l = 0; l < order; ++l) {
    if (!rep[l]) throw MissingLabels("sheet_representatives: label " + std::to_string(l) + " unreachable");
    out.push_back(*rep[l]);
  }
  return out;
}

Eigen::MatrixXd annihilator_subspace(const Frequency& a0, const IntMatrix& gamma, const AlgebraDecomposition& E) {
  const std::size_t d = gamma.dim();
  if (a0.size() != d || E.d != d) throw DimensionMismatch("annihilator_subspace: dimensions");
  Eigen::RowVectorXd a(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) a[static_cast<Eigen::Index>(i)] = static_cast<double>(a0[i]);
  const Eigen::RowVectorXd ag = a * gamma.to_double();
  Eigen::MatrixXd R(static_cast<Eigen::Index>(std::max<std::size_t>(E.dim(), 1)), static_cast<Eigen::Index>(d));
  R.setZero();
  for (std::size_t k = 0; k < E.dim(); ++k) R.row(static_cast<Eigen::Index>(k)) = ag * E.basis_matrix(k);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R, Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double tol = 1e-9 * std::max(1.0, s.size() > 0 ? s[0] : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > tol) ++rank;
  return svd.matrixV().rightCols(static_cast<Eigen::Index>(d) - rank);
}

WalkGranulation walk_granulate(const GeneratorSystem& sys, const AlgebraDecomposition& E, const QuasiNorm& qn,
                               const StartPoint& x0, const Frequency& a0, double t, unsigned n,
                               const WalkGranulateOptions& opt) {
  if (opt.tau <= 0 || opt.tau >= 0.5) throw ConfigError("tau", "must lie in (0, 1/2)");
  if (qn.dim() != sys.dim()) throw DimensionMismatch("walk_granulate: quasi-norm dimension");
  WalkGranulation out;
  const WalkEnsemble law = walk_law(sys, x0, n, opt.exact_budget, opt.samples, opt.seed);
  out.coefficient = std::abs(fourier_coefficient(law, a0).value);
  if (out.coefficient < t)
    throw HypothesisFailed("walk_granulate: |coefficient| = " + std::to_string(out.coefficient) + " below t = " +
                           std::to_string(t));
  out.n_back = opt.n_back < 0 ? n / 2 : std::min<unsigned>(static_cast<unsigned>(opt.n_back), n);
  out.nu = walk_law(sys, x0, n - out.n_back, opt.exact_budget, opt.samples, opt.seed + 1);
  out.exact = out.nu.mode == EnsembleMode::exact;
  out.r_sep = std::exp(-(1.0 - 2.0 * opt.tau) * out.n_back);
  out.r_nb = std::exp(-(1.0 - opt.tau) * out.n_back);
  const PointCloud cloud = torus_cloud(out.nu);
  const std::vector<double> w = ensemble_weights(out.nu);
  const std::vector<IntMatrix> reps = sheet_representatives(sys);
  double best = -1;
  for (std::size_t s = 0; s < reps.size(); ++s) {
    const Eigen::MatrixXd W = annihilator_subspace(a0, reps[s], E);
    GranulationReport r = granulate_torus(cloud, w, qn.neighborhood(W, out.r_sep), qn.neighborhood(W, out.r_nb));
    out.sheet_captured.push_back(r.captured);
    if (r.captured > best) {
      best = r.captured;
      out.report = std::move(r);
      out.sheet = static_cast<int>(s);
      out.W = W;
    }
  }
  return out;
}

}  // namespace eqlab
