#include "eqlab/multconv.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "eqlab/bigint.hpp"
#include "eqlab/diagnostics.hpp"
#include "eqlab/errors.hpp"
#include "eqlab/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace eqlab {

namespace {

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

// Weights accumulate as integers of 2^-120 so that merged sums do not depend
// on the order in which threads contribute.
using Fixed = __int128;
constexpr int kFixBits = 120;
inline Fixed to_fixed(double w) { return static_cast<Fixed>(w * 0x1p120); }
inline double from_fixed(Fixed f) { return std::ldexp(static_cast<double>(f), -kFixBits); }

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}
int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

// c[(i * D + j) * D + k]: coordinate k of b_i b_j
std::vector<double> mult_table(const AlgebraSpace& sp) {
  if (!sp.has_product()) throw std::logic_error("algebra product requested on a plain Euclidean space");
  const std::size_t D = sp.D;
  std::vector<double> c(D * D * D);
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j)
      for (std::size_t k = 0; k < D; ++k) c[(i * D + j) * D + k] = sp.mult[i * D + j][static_cast<Eigen::Index>(k)];
  return c;
}

inline void combine(const double* x, const double* y, double* z, std::size_t D, ConvMode mode,
                    const std::vector<double>& table) {
  switch (mode) {
    case ConvMode::add:
      for (std::size_t k = 0; k < D; ++k) z[k] = x[k] + y[k];
      break;
    case ConvMode::sub:
      for (std::size_t k = 0; k < D; ++k) z[k] = x[k] - y[k];
      break;
    case ConvMode::mul:
      for (std::size_t k = 0; k < D; ++k) z[k] = 0;
      for (std::size_t i = 0; i < D; ++i) {
        if (x[i] == 0) continue;
        for (std::size_t j = 0; j < D; ++j) {
          const double p = x[i] * y[j];
          if (p == 0) continue;
          const double* row = table.data() + (i * D + j) * D;
          for (std::size_t k = 0; k < D; ++k) z[k] += p * row[k];
        }
      }
      break;
  }
}

struct KeyHash {
  std::size_t operator()(const std::vector<long>& k) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (long v : k) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};
using GridMap = std::unordered_map<std::vector<long>, Fixed, KeyHash>;

ScaledMeasure from_grid(const GridMap& acc, double step, const ScaledMeasure& like) {
  std::vector<const GridMap::value_type*> items;
  items.reserve(acc.size());
  for (const auto& kv : acc)
    if (kv.second != 0) items.push_back(&kv);
  std::sort(items.begin(), items.end(), [](auto a, auto b) { return a->first < b->first; });
  ScaledMeasure out = like.empty_like();
  const std::size_t D = like.D();
  out.coords.reserve(items.size() * D);
  out.weights.reserve(items.size());
  for (auto it : items) {
    for (std::size_t k = 0; k < D; ++k) out.coords.push_back(static_cast<double>(it->first[k]) * step);
    out.weights.push_back(from_fixed(it->second));
  }
  return out;
}

inline long snap_index(double v, double step) {
  const double q = std::nearbyint(v / step);
  if (!(std::fabs(q) < 9.0e18)) throw BudgetExceeded("snap: coordinate out of range");
  return static_cast<long>(q);
}

// Pair products accumulated on the grid; f(i, j, out) writes the image of (i, j).
template <class F>
ScaledMeasure grid_pairs(std::size_t n, std::size_t m, const ScaledMeasure& like, const std::vector<double>& wa,
                         const std::vector<double>& wb, double step, std::size_t budget, F&& f) {
  const std::size_t D = like.D();
  const int T = thread_count();
  std::vector<GridMap> local(static_cast<std::size_t>(T));
  bool over = false;
  const auto ln = static_cast<long>(n);
#pragma omp parallel
  {
    GridMap& acc = local[static_cast<std::size_t>(thread_id())];
    std::vector<double> z(D);
    std::vector<long> key(D);
#pragma omp for schedule(dynamic, 16) reduction(|| : over)
    for (long i = 0; i < ln; ++i) {
      if (over) continue;
      for (std::size_t j = 0; j < m; ++j) {
        f(static_cast<std::size_t>(i), j, z.data());
        for (std::size_t k = 0; k < D; ++k) key[k] = snap_index(z[k], step);
        acc[key] += to_fixed(wa[static_cast<std::size_t>(i)] * wb[j]);
      }
      if (acc.size() > budget) over = true;
    }
  }
  if (over) throw BudgetExceeded("convolve: snapped support above the budget");
  GridMap& total = local[0];
  for (std::size_t t = 1; t < local.size(); ++t) {
    for (const auto& [k, v] : local[t]) total[k] += v;
    local[t].clear();
  }
  if (total.size() > budget) throw BudgetExceeded("convolve: snapped support above the budget");
  return from_grid(total, step, like);
}

// One-dimensional fast path: a dense array of grid cells.
template <class F>
ScaledMeasure dense_pairs_1d(std::size_t n, std::size_t m, const ScaledMeasure& like, const std::vector<double>& wa,
                             const std::vector<double>& wb, double step, long lo, long hi, F&& f) {
  const std::size_t cells = static_cast<std::size_t>(hi - lo + 1);
  const int T = thread_count();
  std::vector<std::vector<Fixed>> local(static_cast<std::size_t>(T));
  const auto ln = static_cast<long>(n);
#pragma omp parallel
  {
    auto& acc = local[static_cast<std::size_t>(thread_id())];
    acc.assign(cells, 0);
    double z = 0;
#pragma omp for schedule(dynamic, 16)
    for (long i = 0; i < ln; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        f(static_cast<std::size_t>(i), j, &z);
        const long c = std::clamp(snap_index(z, step), lo, hi);
        acc[static_cast<std::size_t>(c - lo)] += to_fixed(wa[static_cast<std::size_t>(i)] * wb[j]);
      }
  }
  std::vector<Fixed>& total = local[0];
  for (std::size_t t = 1; t < local.size(); ++t)
    for (std::size_t c = 0; c < cells; ++c) total[c] += local[t][c];
  ScaledMeasure out = like.empty_like();
  for (std::size_t c = 0; c < cells; ++c) {
    if (total[c] == 0) continue;
    out.coords.push_back(static_cast<double>(lo + static_cast<long>(c)) * step);
    out.weights.push_back(from_fixed(total[c]));
  }
  return out;
}

// Grid indices when every coordinate is an exact multiple of step.
bool grid_indices(const ScaledMeasure& eta, double step, std::vector<long>& idx) {
  idx.resize(eta.coords.size());
  for (std::size_t i = 0; i < eta.coords.size(); ++i) {
    const double q = eta.coords[i] / step;
    if (!(std::fabs(q) < 0x1p52) || q != std::nearbyint(q) || static_cast<double>(static_cast<long>(q)) * step != eta.coords[i])
      return false;
    idx[i] = static_cast<long>(q);
  }
  return true;
}

// Sums and differences of two grid measures on R are index sums and differences.
ScaledMeasure lattice_pairs_1d(const ScaledMeasure& a, const ScaledMeasure& b, const std::vector<long>& ia,
                               const std::vector<long>& ib, bool subtract, double step) {
  const auto [amin, amax] = std::minmax_element(ia.begin(), ia.end());
  const auto [bmin, bmax] = std::minmax_element(ib.begin(), ib.end());
  const long lo = subtract ? *amin - *bmax : *amin + *bmin;
  const long hi = subtract ? *amax - *bmin : *amax + *bmax;
  if (hi - lo >= (1L << 28)) throw BudgetExceeded("convolve: lattice range");
  const std::size_t cells = static_cast<std::size_t>(hi - lo + 1);
  // weights as 63-bit fixed point; a product is exact at scale 2^-126
  auto fix63 = [](double w) { return static_cast<std::uint64_t>(std::nearbyint(std::ldexp(w, 63))); };
  std::vector<std::uint64_t> fb(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) fb[j] = fix63(b.weights[j]);
  std::vector<long> jb(ib.size());
  for (std::size_t j = 0; j < ib.size(); ++j) jb[j] = (subtract ? -ib[j] : ib[j]) - lo;
  const int T = thread_count();
  std::vector<std::vector<unsigned __int128>> local(static_cast<std::size_t>(T));
  const auto ln = static_cast<long>(ia.size());
  const std::size_t m = ib.size();
#pragma omp parallel
  {
    auto& acc = local[static_cast<std::size_t>(thread_id())];
    acc.assign(cells, 0);
#pragma omp for schedule(dynamic, 16)
    for (long i = 0; i < ln; ++i) {
      const unsigned __int128 fi = fix63(a.weights[static_cast<std::size_t>(i)]);
      unsigned __int128* base = acc.data() + ia[static_cast<std::size_t>(i)];
      for (std::size_t j = 0; j < m; ++j) base[jb[j]] += fi * fb[j];
    }
  }
  std::vector<unsigned __int128>& total = local[0];
  for (std::size_t t = 1; t < local.size(); ++t)
    for (std::size_t c = 0; c < cells; ++c) total[c] += local[t][c];
  ScaledMeasure out = a.empty_like();
  for (std::size_t c = 0; c < cells; ++c) {
    if (total[c] == 0) continue;
    out.coords.push_back(static_cast<double>(lo + static_cast<long>(c)) * step);
    out.weights.push_back(std::ldexp(static_cast<double>(total[c]), -126));
  }
  return out;
}

void check_compatible(const ScaledMeasure& a, const ScaledMeasure& b) {
  if (a.D() != b.D()) throw DimensionMismatch("convolve: ambient dimensions differ");
  if (a.space.d != b.space.d) throw DimensionMismatch("convolve: ambient algebras differ");
}

}  // namespace

double ball_volume(std::size_t D, double radius) {
  const double d = static_cast<double>(D);
  return std::pow(std::numbers::pi, d / 2) / std::tgamma(d / 2 + 1) * std::pow(radius, d);
}

double ball_overlap_volume(std::size_t D, double delta, double r) {
  if (r >= 2 * delta) return 0;
  if (r <= 0) return ball_volume(D, delta);
  // 2 V_{D-1} delta^D int_0^phi sin^D, phi = acos(r / 2 delta)
  const double phi = std::acos(r / (2 * delta));
  const double s = std::sin(phi), c = std::cos(phi);
  double I_even = phi, I_odd = 1 - c;  // I_0, I_1
  double I = D % 2 == 0 ? I_even : I_odd;
  for (std::size_t k = D % 2 == 0 ? 2 : 3; k <= D; k += 2) {
    const double kd = static_cast<double>(k);
    I = -std::pow(s, kd - 1) * c / kd + (kd - 1) / kd * I;
  }
  (void)I_even;
  (void)I_odd;
  return 2 * ball_volume(D - 1, 1.0) * std::pow(delta, static_cast<double>(D)) * I;
}

double l2_norm_at_scale(const ScaledMeasure& eta) { return l2_norm_at_scale(eta, eta.delta); }

double l2_norm_at_scale(const ScaledMeasure& eta, double delta) {
  if (!(delta > 0)) throw ConfigError("delta", "must be positive");
  const std::size_t n = eta.size(), D = eta.D();
  if (n == 0) return 0;
  const std::size_t gd = std::min<std::size_t>(D, 4);
  const double cell = 2 * delta;
  std::unordered_map<std::vector<long>, std::vector<std::size_t>, KeyHash> grid;
  std::vector<std::vector<long>> cell_of(n, std::vector<long>(gd));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < gd; ++k) cell_of[i][k] = static_cast<long>(std::floor(eta.point(i)[k] / cell));
    grid[cell_of[i]].push_back(i);
  }
  std::size_t total = 1;
  for (std::size_t k = 0; k < gd; ++k) total *= 3;
  std::vector<double> partial(n);
  const auto ln = static_cast<long>(n);
  const double V = ball_volume(D, delta);
#pragma omp parallel for schedule(dynamic, 64)
  for (long i = 0; i < ln; ++i) {
    std::vector<long> k(gd);
    Neumaier s;
    const double* xi = eta.point(static_cast<std::size_t>(i));
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t t = code;
      for (std::size_t j = 0; j < gd; ++j) {
        k[j] = cell_of[static_cast<std::size_t>(i)][j] + static_cast<long>(t % 3) - 1;
        t /= 3;
      }
      auto it = grid.find(k);
      if (it == grid.end()) continue;
      for (auto j : it->second) {
        const double* xj = eta.point(j);
        double r2 = 0;
        for (std::size_t q = 0; q < D; ++q) r2 += (xi[q] - xj[q]) * (xi[q] - xj[q]);
        const double r = std::sqrt(r2);
        if (r < 2 * delta) s.add(eta.weights[j] * ball_overlap_volume(D, delta, r));
      }
    }
    partial[static_cast<std::size_t>(i)] = eta.weights[static_cast<std::size_t>(i)] * s.value();
  }
  Neumaier tot;
  for (double p : partial) tot.add(p);
  return std::sqrt(std::max(0.0, tot.value())) / V;
}

ScaledMeasure convolve(const ScaledMeasure& eta, const ScaledMeasure& nu, ConvMode mode, const ConvolveOptions& opt) {
  check_compatible(eta, nu);
  const std::size_t D = eta.D(), n = eta.size(), m = nu.size();
  const std::vector<double> table = mode == ConvMode::mul ? mult_table(eta.space) : std::vector<double>{};
  auto f = [&](std::size_t i, std::size_t j, double* z) { combine(eta.point(i), nu.point(j), z, D, mode, table); };
  if (n * m <= opt.budget) {
    ScaledMeasure out = eta.empty_like();
    out.coords.resize(n * m * D);
    out.weights.resize(n * m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        f(i, j, out.coords.data() + (i * m + j) * D);
        out.weights[i * m + j] = eta.weights[i] * nu.weights[j];
      }
    return out;
  }
  const double step = opt.snap > 0 ? opt.snap : eta.delta / 4;
  note(Warning::grid_coarsening);
  if (D == 1 && mode != ConvMode::mul) {
    std::vector<long> ia, ib;
    if (grid_indices(eta, step, ia) && grid_indices(nu, step, ib)) {
      ScaledMeasure out = lattice_pairs_1d(eta, nu, ia, ib, mode == ConvMode::sub, step);
      if (out.size() > opt.budget) throw BudgetExceeded("convolve: snapped support above the budget");
      return out;
    }
    // far beyond the budget the inputs are snapped first; each image moves by at most one step
    if (static_cast<double>(n) * static_cast<double>(m) > 64.0 * static_cast<double>(opt.budget)) {
      const ScaledMeasure a = snap_to_grid(eta, step), b = snap_to_grid(nu, step);
      if (grid_indices(a, step, ia) && grid_indices(b, step, ib)) {
        ScaledMeasure out = lattice_pairs_1d(a, b, ia, ib, mode == ConvMode::sub, step);
        if (out.size() > opt.budget) throw BudgetExceeded("convolve: snapped support above the budget");
        return out;
      }
    }
  }
  if (D == 1) {
    double lo = 0, hi = 0;
    auto [amin, amax] = std::minmax_element(eta.coords.begin(), eta.coords.end());
    auto [bmin, bmax] = std::minmax_element(nu.coords.begin(), nu.coords.end());
    if (mode == ConvMode::add) {
      lo = *amin + *bmin;
      hi = *amax + *bmax;
    } else if (mode == ConvMode::sub) {
      lo = *amin - *bmax;
      hi = *amax - *bmin;
    } else {
      const double c[4] = {*amin * *bmin * table[0], *amin * *bmax * table[0], *amax * *bmin * table[0],
                           *amax * *bmax * table[0]};
      lo = *std::min_element(c, c + 4);
      hi = *std::max_element(c, c + 4);
    }
    const long ilo = snap_index(lo, step) - 1, ihi = snap_index(hi, step) + 1;
    if (static_cast<double>(ihi - ilo) <= 64.0 * static_cast<double>(opt.budget)) {
      ScaledMeasure out = dense_pairs_1d(n, m, eta, eta.weights, nu.weights, step, ilo, ihi, f);
      if (out.size() > opt.budget) throw BudgetExceeded("convolve: snapped support above the budget");
      return out;
    }
  }
  return grid_pairs(n, m, eta, eta.weights, nu.weights, step, opt.budget, f);
}

ScaledMeasure snap_to_grid(const ScaledMeasure& eta, double step) {
  if (!(step > 0)) throw ConfigError("snap", "must be positive");
  GridMap acc;
  std::vector<long> key(eta.D());
  for (std::size_t i = 0; i < eta.size(); ++i) {
    for (std::size_t k = 0; k < eta.D(); ++k) key[k] = snap_index(eta.point(i)[k], step);
    acc[key] += to_fixed(eta.weights[i]);
  }
  return from_grid(acc, step, eta);
}

ScaledMeasure cube_difference(const ScaledMeasure& eta, const ConvolveOptions& opt) {
  const ScaledMeasure c3 = convolve(convolve(eta, eta, ConvMode::mul, opt), eta, ConvMode::mul, opt);
  return convolve(c3, c3, ConvMode::sub, opt);
}

ScaledMeasure tensor_pushforward(const ScaledMeasure& eta1, const ScaledMeasure& eta2, const ConvolveOptions& opt) {
  check_compatible(eta1, eta2);
  const std::size_t D = eta1.D(), n = eta1.size(), m = eta2.size();
  ScaledMeasure like;
  like.space = AlgebraSpace::euclidean(D * D);
  like.delta = eta1.delta;
  auto f = [&](std::size_t i, std::size_t j, double* z) {
    const double* a = eta1.point(i);
    const double* b = eta2.point(j);
    for (std::size_t p = 0; p < D; ++p)
      for (std::size_t q = 0; q < D; ++q) z[p * D + q] = a[p] * b[q];
  };
  if (n * m <= opt.budget) {
    ScaledMeasure out = like;
    out.coords.resize(n * m * D * D);
    out.weights.resize(n * m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        f(i, j, out.coords.data() + (i * m + j) * D * D);
        out.weights[i * m + j] = eta1.weights[i] * eta2.weights[j];
      }
    return out;
  }
  const double step = opt.snap > 0 ? opt.snap : eta1.delta / 4;
  return grid_pairs(n, m, like, eta1.weights, eta2.weights, step, opt.budget, f);
}

// ---------------------------------------------------------------- audits

namespace {

std::vector<std::size_t> heaviest(const ScaledMeasure& eta, std::size_t k) {
  std::vector<std::size_t> idx(eta.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(k), idx.end(), [&](std::size_t a, std::size_t b) {
    return eta.weights[a] != eta.weights[b] ? eta.weights[a] > eta.weights[b] : a < b;
  });
  idx.resize(k);
  return idx;
}

std::vector<double> default_rhos(double delta) {
  std::vector<double> r;
  for (double rho = delta; rho <= 1.0 + 1e-12; rho *= 2) r.push_back(rho);
  if (r.empty()) r.push_back(delta);
  return r;
}

struct SlabBest {
  double mass = -1;
  double start = 0;
};

// For sorted projections, the heaviest window [p_i, p_i + 2 rho).
void best_windows(const std::vector<double>& p, const std::vector<double>& w, const std::vector<double>& rhos,
                  std::vector<SlabBest>& best) {
  const std::size_t n = p.size();
  std::vector<double> prefix(n + 1, 0);
  {
    Neumaier s;
    for (std::size_t i = 0; i < n; ++i) {
      s.add(w[i]);
      prefix[i + 1] = s.value();
    }
  }
  best.assign(rhos.size(), SlabBest{});
  for (std::size_t r = 0; r < rhos.size(); ++r) {
    const double width = 2 * rhos[r];
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (j < i) j = i;
      while (j < n && p[j] - p[i] < width) ++j;
      const double m = prefix[j] - prefix[i];
      if (m > best[r].mass) best[r] = {m, p[i]};
    }
  }
}

// LSD radix sort of (key, weight) by key; keys are ordered through their
// IEEE bit patterns.
void radix_sort(std::vector<std::pair<double, double>>& v) {
  const std::size_t n = v.size();
  if (n < 2) return;
  std::vector<std::uint64_t> key(n), key2(n);
  std::vector<double> w(n), w2(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t u;
    std::memcpy(&u, &v[i].first, sizeof u);
    key[i] = (u >> 63) ? ~u : (u | (1ULL << 63));
    w[i] = v[i].second;
  }
  constexpr int kBits = 11;
  constexpr std::uint64_t kMask = (1u << kBits) - 1;
  std::vector<std::size_t> count((1u << kBits) + 1);
  for (int shift = 0; shift < 64; shift += kBits) {
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++count[((key[i] >> shift) & kMask) + 1];
    if (count[((key[0] >> shift) & kMask) + 1] == n) continue;  // digit constant
    for (std::size_t b = 1; b < count.size(); ++b) count[b] += count[b - 1];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t dst = count[(key[i] >> shift) & kMask]++;
      key2[dst] = key[i];
      w2[dst] = w[i];
    }
    key.swap(key2);
    w.swap(w2);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t u = key[i];
    u = (u >> 63) ? (u & ~(1ULL << 63)) : ~u;
    std::memcpy(&v[i].first, &u, sizeof u);
    v[i].second = w[i];
  }
}

bool is_dup(const std::vector<Eigen::VectorXd>& normals, const Eigen::VectorXd& v) {
  for (const auto& u : normals)
    if (std::fabs(u.dot(v)) > 1 - 1e-12) return true;
  return false;
}

}  // namespace

std::vector<Eigen::VectorXd> sample_normals(const ScaledMeasure& eta, const AffineScanOptions& opt) {
  const auto D = static_cast<Eigen::Index>(eta.D());
  std::vector<Eigen::VectorXd> normals;
  Rng rng(opt.seed, 0, 5);
  for (std::size_t t = 0; t < opt.random_normals; ++t) {
    Eigen::VectorXd v(D);
    for (Eigen::Index k = 0; k < D; ++k) v[k] = rng.normal();
    if (v.norm() == 0) continue;
    v.normalize();
    if (!is_dup(normals, v)) normals.push_back(v);
  }
  // hyperplanes through D of the heaviest atoms
  const std::vector<std::size_t> heavy = heaviest(eta, opt.heavy_atoms);
  const std::size_t h = heavy.size(), Du = eta.D();
  if (h >= Du && Du > 0) {
    std::vector<std::size_t> comb(Du);
    std::iota(comb.begin(), comb.end(), 0);
    std::size_t tuples = 0;
    while (tuples < opt.tuple_cap) {
      ++tuples;
      Eigen::MatrixXd M(D - 1 > 0 ? D - 1 : 0, D);
      for (Eigen::Index r = 0; r + 1 < D; ++r)
        for (Eigen::Index k = 0; k < D; ++k)
          M(r, k) = eta.point(heavy[comb[static_cast<std::size_t>(r) + 1]])[k] - eta.point(heavy[comb[0]])[k];
      Eigen::VectorXd v;
      if (D == 1) {
        v = Eigen::VectorXd::Ones(1);
      } else {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
        const Eigen::VectorXd& s = svd.singularValues();
        const double smax = s.size() ? s[0] : 0;
        // degenerate tuples do not determine a hyperplane
        if (smax > 0 && s[s.size() - 1] > 1e-9 * smax) v = svd.matrixV().col(D - 1);
      }
      if (v.size() == D && !is_dup(normals, v)) normals.push_back(v.normalized());
      // next combination
      std::size_t i = Du;
      while (i > 0 && comb[i - 1] == h - Du + (i - 1)) --i;
      if (i == 0) break;
      ++comb[i - 1];
      for (std::size_t j = i; j < Du; ++j) comb[j] = comb[j - 1] + 1;
    }
  }
  return normals;
}

AffineScan affine_scan(const ScaledMeasure& eta, const std::vector<double>& rhos, const AffineScanOptions& opt) {
  AffineScan res;
  res.rhos = rhos;
  const std::vector<Eigen::VectorXd> normals = sample_normals(eta, opt);
  res.normals = normals.size();
  const std::size_t n = eta.size();
  std::vector<std::vector<SlabBest>> per(normals.size());
  const auto ln = static_cast<long>(normals.size());
#pragma omp parallel for schedule(dynamic)
  for (long t = 0; t < ln; ++t) {
    const std::size_t D = eta.D();
    const Eigen::VectorXd& l = normals[static_cast<std::size_t>(t)];
    std::vector<std::pair<double, double>> proj(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = eta.point(i);
      double v = 0;
      for (std::size_t k = 0; k < D; ++k) v += l[static_cast<Eigen::Index>(k)] * x[k];
      proj[i] = {v, eta.weights[i]};
    }
    radix_sort(proj);
    std::vector<double> p(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = proj[i].first;
      w[i] = proj[i].second;
    }
    best_windows(p, w, rhos, per[t]);
  }
  res.mass.assign(rhos.size(), 0);
  res.offset.assign(rhos.size(), 0);
  res.normal.assign(rhos.size(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(eta.D())));
  for (std::size_t r = 0; r < rhos.size(); ++r) {
    for (std::size_t t = 0; t < normals.size(); ++t)
      if (per[t][r].mass > res.mass[r]) {
        res.mass[r] = per[t][r].mass;
        res.offset[r] = per[t][r].start + rhos[r];
        res.normal[r] = normals[t];
      }
  }
  return res;
}

namespace {

double det_of(const ScaledMeasure& eta, const std::vector<double>& table, const double* x, const double* y) {
  const std::size_t D = eta.D();
  if (D == 1) return (x[0] - (y ? y[0] : 0.0)) * table[0];
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D));
  for (std::size_t i = 0; i < D; ++i) {
    const double xi = x[i] - (y ? y[i] : 0.0);
    if (xi == 0) continue;
    for (std::size_t j = 0; j < D; ++j)
      for (std::size_t k = 0; k < D; ++k)
        L(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) += xi * table[(i * D + j) * D + k];
  }
  if (D == 4) return Eigen::Matrix4d(L).determinant();
  return L.determinant();
}

double norm_of(const double* x, std::size_t D) {
  double s = 0;
  for (std::size_t k = 0; k < D; ++k) s += x[k] * x[k];
  return std::sqrt(s);
}

ScaledMeasure restrict(const ScaledMeasure& eta, const std::vector<char>& keep) {
  ScaledMeasure out = eta.empty_like();
  for (std::size_t i = 0; i < eta.size(); ++i)
    if (keep[i]) out.push(eta.point(i), eta.weights[i]);
  return out;
}

}  // namespace

EssResult essential_part(const ScaledMeasure& eta, double eps, double kappa, double tau, const EssOptions& opt) {
  const double delta = eta.delta;
  const double R = std::pow(delta, -eps), t = std::pow(delta, eps), allowance = 3 * std::pow(delta, tau);
  const std::size_t D = eta.D();
  const bool has_det = eta.space.has_product();
  const std::vector<double> table = has_det ? mult_table(eta.space) : std::vector<double>{};
  EssResult res;
  std::vector<char> keep(eta.size(), 1);
  Neumaier rb, rd;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    if (norm_of(eta.point(i), D) > R) {
      keep[i] = 0;
      rb.add(eta.weights[i]);
    } else if (has_det && std::fabs(det_of(eta, table, eta.point(i), nullptr)) <= t) {
      keep[i] = 0;
      rd.add(eta.weights[i]);
    }
  }
  res.removed_ball = rb.value();
  res.removed_det = rd.value();
  ScaledMeasure cur = restrict(eta, keep);
  const std::vector<double> rhos = opt.rhos.empty() ? default_rhos(delta) : opt.rhos;
  Neumaier ra;
  for (res.iterations = 0; res.iterations < opt.max_iterations && cur.size() > 0; ++res.iterations) {
    const AffineScan scan = affine_scan(cur, rhos, opt.scan);
    int heavy = 0;
    long target = -1;
    const double half = cur.mass() / 2;
    for (std::size_t r = 0; r < rhos.size(); ++r) {
      if (scan.mass[r] <= std::pow(delta, -eps) * std::pow(rhos[r], kappa) * (1 + 1e-12)) continue;
      // a slab holding half of what is left is the measure itself, not an exceptional part
      if (scan.mass[r] <= allowance && scan.mass[r] < half) {
        target = static_cast<long>(r);
        break;
      }
      ++heavy;
    }
    res.remaining_offenders = heavy;
    if (target < 0) break;
    const auto r = static_cast<std::size_t>(target);
    const double lo = scan.offset[r] - rhos[r];
    std::vector<char> k2(cur.size(), 1);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const double p = scan.normal[r].dot(cur.vec(i));
      if (p >= lo && p - lo < 2 * rhos[r]) {
        k2[i] = 0;
        ra.add(cur.weights[i]);
      }
    }
    cur = restrict(cur, k2);
  }
  res.removed_affine = ra.value();
  res.removed = res.removed_ball + res.removed_det + res.removed_affine;
  res.measure = std::move(cur);
  res.passing = res.removed <= allowance && res.remaining_offenders == 0;
  return res;
}

NCAuditReport nc_audit(const ScaledMeasure& eta, const NCAuditOptions& opt) {
  NCAuditReport rep;
  rep.eps = opt.eps;
  rep.tau = opt.tau;
  rep.kappas = opt.kappas;
  rep.delta = opt.delta > 0 ? opt.delta : eta.delta;
  const double delta = rep.delta;
  const std::size_t D = eta.D(), n = eta.size();
  rep.ball_radius = std::pow(delta, -opt.eps);
  Neumaier out;
  std::vector<char> outside(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (norm_of(eta.point(i), D) > rep.ball_radius) {
      outside[i] = 1;
      out.add(eta.weights[i]);
    }
  rep.outside_mass = out.value();
  rep.support_pass = rep.outside_mass == 0;

  rep.det_available = eta.space.has_product();
  rep.det_threshold = opt.det_threshold > 0 ? opt.det_threshold : std::pow(delta, opt.eps);
  Neumaier decomp;
  if (rep.det_available) {
    const std::vector<double> table = mult_table(eta.space);
    std::vector<long> centers{-1};
    for (auto i : heaviest(eta, opt.scan.heavy_atoms)) centers.push_back(static_cast<long>(i));
    Rng rng(opt.scan.seed, 1, 5);
    for (std::size_t t = 0; t < opt.det_centers && n > 0; ++t) centers.push_back(static_cast<long>(rng.below(n)));
    std::vector<double> mass(centers.size());
    const auto lc = static_cast<long>(centers.size());
#pragma omp parallel for schedule(dynamic)
    for (long c = 0; c < lc; ++c) {
      const double* y = centers[c] < 0 ? nullptr : eta.point(static_cast<std::size_t>(centers[c]));
      Neumaier s;
      for (std::size_t i = 0; i < n; ++i)
        if (std::fabs(det_of(eta, table, eta.point(i), y)) <= rep.det_threshold) s.add(eta.weights[i]);
      mass[c] = s.value();
    }
    rep.small_det_at_zero = mass[0];
    for (std::size_t c = 0; c < centers.size(); ++c)
      if (mass[c] > rep.small_det_mass) {
        rep.small_det_mass = mass[c];
        rep.small_det_center = centers[c];
      }
    for (std::size_t i = 0; i < n; ++i)
      if (outside[i] || std::fabs(det_of(eta, table, eta.point(i), nullptr)) <= rep.det_threshold)
        decomp.add(eta.weights[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (outside[i]) decomp.add(eta.weights[i]);
  }
  rep.small_det_pass = rep.small_det_mass <= std::pow(delta, opt.tau);
  rep.decomposition_mass = decomp.value();

  rep.rhos = opt.rhos.empty() ? default_rhos(delta) : opt.rhos;
  const AffineScan scan = affine_scan(eta, rep.rhos, opt.scan);
  rep.affine_mass = scan.mass;
  rep.normals = scan.normals;
  {
    std::vector<double> xs, ys;
    for (std::size_t r = 0; r < rep.rhos.size(); ++r)
      if (scan.mass[r] > 0) {
        xs.push_back(std::log(rep.rhos[r]));
        ys.push_back(std::log(scan.mass[r]));
      }
    if (xs.size() >= 2) {
      const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
      const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
      double sxx = 0, sxy = 0, syy = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
      }
      rep.kappa_hat = sxx > 0 ? sxy / sxx : 0;
      rep.r2 = syy > 0 && sxx > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    }
  }
  for (double kappa : opt.kappas) {
    bool ok = true;
    for (std::size_t r = 0; r < rep.rhos.size(); ++r)
      if (rep.rhos[r] >= delta * (1 - 1e-12) &&
          scan.mass[r] > std::pow(delta, -opt.eps) * std::pow(rep.rhos[r], kappa) * (1 + 1e-12))
        ok = false;
    rep.affine_pass.push_back(ok);
    rep.nc_pass.push_back(ok && rep.small_det_pass && rep.decomposition_mass <= std::pow(delta, opt.tau));
  }
  return rep;
}

// ---------------------------------------------------------------- growth

namespace {

PointCloud pair_images(const PointCloud& A, const Eigen::MatrixXd* f, bool symmetric, std::size_t budget) {
  const std::size_t n = A.size(), D = A.D;
  const std::size_t pairs = symmetric ? n * (n + 1) / 2 : n * n;
  if (pairs > budget) throw BudgetExceeded("sumproduct_check: pair budget");
  PointCloud out;
  out.D = D;
  out.xs.reserve(pairs * D);
  std::vector<double> fy(D), z(D);
  for (std::size_t j = 0; j < n; ++j) {
    const double* y = A.point(j);
    if (f) {
      for (std::size_t a = 0; a < D; ++a) {
        double s = 0;
        for (std::size_t b = 0; b < D; ++b) s += (*f)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * y[b];
        fy[a] = s;
      }
    } else {
      std::copy(y, y + D, fy.begin());
    }
    for (std::size_t i = symmetric ? j : 0; i < n; ++i) {
      const double* x = A.point(i);
      for (std::size_t a = 0; a < D; ++a) z[a] = x[a] + fy[a];
      out.push(z.data());
    }
  }
  return out;
}

}  // namespace

double additive_energy(const PointCloud& A, const Eigen::MatrixXd& f, double delta) {
  const std::size_t n = A.size(), D = A.D;
  if (n == 0) return 0;
  const PointCloud img = pair_images(A, &f, false, std::numeric_limits<std::size_t>::max());
  const std::size_t m = img.size(), gd = std::min<std::size_t>(D, 4);
  std::unordered_map<std::vector<long>, std::vector<std::size_t>, KeyHash> grid;
  std::vector<long> key(gd);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < gd; ++k) key[k] = static_cast<long>(std::floor(img.point(i)[k] / delta));
    grid[key].push_back(i);
  }
  std::size_t total = 1;
  for (std::size_t k = 0; k < gd; ++k) total *= 3;
  double count = 0;
  const auto lm = static_cast<long>(m);
#pragma omp parallel for schedule(dynamic, 256) reduction(+ : count)
  for (long i = 0; i < lm; ++i) {
    std::vector<long> c(gd), k(gd);
    const double* x = img.point(static_cast<std::size_t>(i));
    for (std::size_t q = 0; q < gd; ++q) c[q] = static_cast<long>(std::floor(x[q] / delta));
    std::size_t local = 0;
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t t = code;
      for (std::size_t q = 0; q < gd; ++q) {
        k[q] = c[q] + static_cast<long>(t % 3) - 1;
        t /= 3;
      }
      auto it = grid.find(k);
      if (it == grid.end()) continue;
      for (auto j : it->second) {
        double r2 = 0;
        const double* y = img.point(j);
        for (std::size_t q = 0; q < D; ++q) r2 += (x[q] - y[q]) * (x[q] - y[q]);
        if (r2 <= delta * delta) ++local;
      }
    }
    count += static_cast<double>(local);
  }
  const double nd = static_cast<double>(n);
  return count / (nd * nd * nd);
}

GrowthReport sumproduct_check(const PointCloud& A, const std::vector<Eigen::MatrixXd>& B, double delta,
                              std::size_t pair_budget) {
  if (!(delta > 0)) throw ConfigError("delta", "must be positive");
  GrowthReport rep;
  rep.delta = delta;
  if (A.size() == 0) return rep;
  rep.N_A = covering_number(A, delta);
  rep.N_AA = covering_number(pair_images(A, nullptr, true, pair_budget), delta);
  for (std::size_t t = 0; t < B.size(); ++t) {
    const auto& f = B[t];
    if (static_cast<std::size_t>(f.rows()) != A.D || static_cast<std::size_t>(f.cols()) != A.D)
      throw DimensionMismatch("sumproduct_check: f must act on E");
    const std::size_t N = covering_number(pair_images(A, &f, false, pair_budget), delta);
    rep.N_AfA.push_back(N);
    rep.energy.push_back(additive_energy(A, f, delta));
    if (N > rep.N_AfA_best) {
      rep.N_AfA_best = N;
      rep.best_f = t;
    }
  }
  rep.ratio_AA = static_cast<double>(rep.N_AA) / static_cast<double>(rep.N_A);
  rep.ratio_AfA = static_cast<double>(rep.N_AfA_best) / static_cast<double>(rep.N_A);
  const double growth = std::max(rep.ratio_AA, rep.ratio_AfA);
  rep.growth_exponent = std::log(growth) / std::log(1 / delta);
  return rep;
}

// ---------------------------------------------------------------- generation

namespace {

// Lattice points packed into 64 bits; each coordinate gets 64 / D bits.
struct Packer {
  std::size_t D;
  unsigned bits;
  long lim;
  explicit Packer(std::size_t d) : D(d), bits(static_cast<unsigned>(64 / d)) {
    lim = bits >= 63 ? std::numeric_limits<long>::max() / 2 : (1L << (bits - 1)) - 1;
  }
  std::uint64_t pack(const long* k) const {
    std::uint64_t out = 0;
    for (std::size_t i = 0; i < D; ++i) {
      if (k[i] > lim || k[i] < -lim) throw BudgetExceeded("generation_probe: lattice range");
      const std::uint64_t u = static_cast<std::uint64_t>(k[i] + lim) & (bits >= 64 ? ~0ULL : ((1ULL << bits) - 1));
      out = bits >= 64 ? u : (out << bits) | u;
    }
    return out;
  }
  void unpack(std::uint64_t v, long* k) const {
    for (std::size_t i = D; i-- > 0;) {
      const std::uint64_t mask = bits >= 64 ? ~0ULL : ((1ULL << bits) - 1);
      k[i] = static_cast<long>(v & mask) - lim;
      v = bits >= 64 ? 0 : v >> bits;
    }
  }
};

}  // namespace

GenerationProbe generation_probe(const ScaledMeasure& A, unsigned s, double delta, double eps0, std::size_t budget) {
  if (s == 0 || s > 3) throw ConfigError("s", "must lie in 1..3");
  const std::size_t D = A.D();
  if (D == 0 || D > 4) throw ConfigError("dimension", "generation_probe handles dimension 1..4");
  if (!(delta > 0)) throw ConfigError("delta", "must be positive");
  const std::vector<double> table = mult_table(A.space);
  const Packer pk(D);
  // A and -A
  std::vector<double> signed_pts;
  for (std::size_t i = 0; i < A.size(); ++i)
    for (double sg : {1.0, -1.0})
      for (std::size_t k = 0; k < D; ++k) signed_pts.push_back(sg * A.point(i)[k]);
  const std::size_t na = signed_pts.size() / D;
  std::vector<long> key(D);
  std::vector<double> x(D), z(D);
  auto snap = [&](const double* p) {
    for (std::size_t k = 0; k < D; ++k) key[k] = snap_index(p[k], delta);
    return pk.pack(key.data());
  };
  std::unordered_set<std::uint64_t> level, products;
  for (std::size_t i = 0; i < na; ++i) level.insert(snap(signed_pts.data() + i * D));
  products = level;
  for (unsigned j = 2; j <= s; ++j) {
    if (level.size() * na > budget) throw BudgetExceeded("generation_probe: product budget");
    std::vector<std::uint64_t> cur(level.begin(), level.end());
    std::sort(cur.begin(), cur.end());
    std::unordered_set<std::uint64_t> next;
    for (auto v : cur) {
      pk.unpack(v, key.data());
      for (std::size_t k = 0; k < D; ++k) x[k] = static_cast<double>(key[k]) * delta;
      for (std::size_t i = 0; i < na; ++i) {
        combine(x.data(), signed_pts.data() + i * D, z.data(), D, ConvMode::mul, table);
        next.insert(snap(z.data()));
      }
    }
    level = std::move(next);
    products.insert(level.begin(), level.end());
  }
  std::vector<std::vector<long>> P;
  for (auto v : products) {
    pk.unpack(v, key.data());
    P.push_back(key);
  }
  std::sort(P.begin(), P.end());
  std::vector<long> zero(D, 0);
  std::unordered_set<std::uint64_t> sums{pk.pack(zero.data())};
  std::vector<std::uint64_t> frontier{pk.pack(zero.data())};
  for (unsigned j = 1; j <= s; ++j) {
    if (frontier.size() * P.size() > budget) throw BudgetExceeded("generation_probe: sum budget");
    std::vector<std::uint64_t> next;
    std::vector<long> a(D), b(D);
    for (auto v : frontier) {
      pk.unpack(v, a.data());
      for (const auto& p : P) {
        for (std::size_t k = 0; k < D; ++k) b[k] = a[k] + p[k];
        const std::uint64_t u = pk.pack(b.data());
        if (sums.insert(u).second) next.push_back(u);
      }
    }
    frontier = std::move(next);
  }
  GenerationProbe res;
  res.elements = sums.size();
  // lattice points of Ball(0, delta^eps0)
  const double r = std::pow(delta, eps0);
  const long K = static_cast<long>(std::floor(r / delta + 1e-12));
  std::vector<long> g(D, -K);
  double cells = 1;
  for (std::size_t k = 0; k < D; ++k) cells *= static_cast<double>(2 * K + 1);
  if (cells > static_cast<double>(budget)) throw BudgetExceeded("generation_probe: target grid budget");
  while (true) {
    double n2 = 0;
    for (long v : g) n2 += static_cast<double>(v) * static_cast<double>(v);
    if (n2 * delta * delta <= r * r * (1 + 1e-12)) {
      ++res.grid_points;
      bool hit = sums.count(pk.pack(g.data())) > 0;
      for (std::size_t k = 0; k < D && !hit; ++k)
        for (long off : {-1L, 1L}) {
          g[k] += off;
          hit = hit || sums.count(pk.pack(g.data())) > 0;
          g[k] -= off;
        }
      if (hit) ++res.covered;
    }
    std::size_t k = 0;
    while (k < D && g[k] == K) g[k++] = -K;
    if (k == D) break;
    ++g[k];
  }
  res.coverage = res.grid_points ? static_cast<double>(res.covered) / static_cast<double>(res.grid_points) : 1.0;
  return res;
}

// ---------------------------------------------------------------- flattening

FlattenTrajectory flatten_pipeline(const ScaledMeasure& eta, unsigned k, double eps, double kappa, double tau,
                                   const FlattenOptions& opt) {
  FlattenTrajectory tr;
  NCAuditOptions ao = opt.audit;
  ao.eps = eps;
  ao.tau = tau;
  ao.kappas = {kappa};
  tr.audit = nc_audit(eta, ao);
  const double delta = eta.delta;
  ScaledMeasure cur = eta;
  tr.steps.push_back({l2_norm_at_scale(cur), cur.mass(), 0, cur.size()});
  for (unsigned j = 0; j < k; ++j) {
    const double nrm = tr.steps.back().norm;
    if (j > 0 && nrm * nrm <= std::pow(delta, -kappa)) {
      tr.floor_reached = true;
      break;
    }
    const EssResult e = essential_part(cur, eps, kappa, tau, opt.ess);
    cur = cube_difference(e.measure, opt.conv);
    tr.steps.push_back({l2_norm_at_scale(cur), cur.mass(), e.removed, cur.size()});
    const double ratio = tr.steps.back().norm / nrm;
    tr.ratios.push_back(ratio);
    tr.decreased.push_back(ratio < 1);
    tr.exponent.push_back(std::log(ratio) / std::log(delta));
  }
  if (!tr.floor_reached && k > 0 && tr.steps.size() == k + 1) {
    const double nrm = tr.steps.back().norm;
    tr.floor_reached = nrm * nrm <= std::pow(delta, -kappa);
  }
  if (!tr.exponent.empty())
    tr.fitted_exponent =
        std::accumulate(tr.exponent.begin(), tr.exponent.end(), 0.0) / static_cast<double>(tr.exponent.size());
  return tr;
}

// ---------------------------------------------------------------- Fourier

namespace {

// Atoms with rational coordinates, merged exactly.
using ExactLaw = std::map<std::vector<Rational>, Rational>;

ExactLaw exact_law(const ScaledMeasure& eta) {
  ExactLaw law;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    std::vector<Rational> x(eta.D());
    for (std::size_t k = 0; k < eta.D(); ++k) x[k] = Rational(eta.point(i)[k]);
    law[x] += Rational(eta.weights[i]);
  }
  return law;
}

ExactLaw exact_conv(const ExactLaw& a, const ExactLaw& b, ConvMode mode, const std::vector<Rational>& table,
                    std::size_t D, std::size_t budget) {
  if (a.size() * b.size() > budget) throw BudgetExceeded("power_inequality_check: exact atom budget");
  ExactLaw out;
  std::vector<Rational> z(D);
  for (const auto& [x, wx] : a)
    for (const auto& [y, wy] : b) {
      for (std::size_t k = 0; k < D; ++k) {
        if (mode == ConvMode::sub) {
          z[k] = x[k] - y[k];
        } else if (mode == ConvMode::add) {
          z[k] = x[k] + y[k];
        } else {
          z[k] = 0;
        }
      }
      if (mode == ConvMode::mul)
        for (std::size_t i = 0; i < D; ++i)
          for (std::size_t j = 0; j < D; ++j) {
            const Rational p = x[i] * y[j];
            if (p == 0) continue;
            for (std::size_t k = 0; k < D; ++k)
              if (table[(i * D + j) * D + k] != 0) z[k] += p * table[(i * D + j) * D + k];
          }
      out[z] += wx * wy;
    }
  return out;
}

// Dyadic laws: every coordinate is X / 2^K with X kept modulo 2^128.
struct DyadicLaw {
  bool valid = false;
  int K = 0;
  std::size_t D = 0;
  std::vector<unsigned __int128> X;
  std::vector<double> w;
};

unsigned __int128 low128(const BigInt& v) {
  BigInt r;
  mpz_fdiv_r_2exp(r.get_mpz_t(), v.get_mpz_t(), 128);
  const unsigned __int128 lo = mpz_getlimbn(r.get_mpz_t(), 0);
  const unsigned __int128 hi = mpz_size(r.get_mpz_t()) > 1 ? mpz_getlimbn(r.get_mpz_t(), 1) : 0;
  return lo | (hi << 64);
}

DyadicLaw dyadic_form(const ExactLaw& law) {
  DyadicLaw out;
  out.D = law.empty() ? 0 : law.begin()->first.size();
  static_assert(sizeof(mp_limb_t) == 8);
  int K = 0;
  for (const auto& [x, w] : law)
    for (const auto& c : x) {
      const mpz_srcptr den = c.get_den_mpz_t();
      if (mpz_popcount(den) != 1) return out;
      K = std::max(K, static_cast<int>(mpz_scan1(den, 0)));
    }
  if (K > 120) return out;
  out.K = K;
  for (const auto& [x, w] : law) {
    for (const auto& c : x) {
      const int k = static_cast<int>(mpz_scan1(c.get_den_mpz_t(), 0));
      BigInt num(c.get_num());
      num <<= static_cast<mp_bitcnt_t>(K - k);
      out.X.push_back(low128(num));
    }
    out.w.push_back(to_double(w));
  }
  out.valid = true;
  return out;
}

double dyadic_fourier_abs(const DyadicLaw& law, const Eigen::VectorXd& xi, bool& ok) {
  // xi_k = M_k 2^-S
  const std::size_t D = law.D;
  int S = 0;
  std::vector<int> sk(D, 0);
  for (std::size_t k = 0; k < D; ++k) {
    int e = 0;
    const double f = std::frexp(xi[static_cast<Eigen::Index>(k)], &e);
    if (f != 0) {
      const auto mant = static_cast<long long>(std::ldexp(std::fabs(f), 53));
      sk[k] = std::max(0, 53 - e - __builtin_ctzll(static_cast<unsigned long long>(mant)));
    }
    S = std::max(S, sk[k]);
  }
  if (law.K + S > 127) {
    ok = false;
    return 0;
  }
  std::vector<unsigned __int128> Mk(D);
  for (std::size_t k = 0; k < D; ++k) {
    const double v = std::ldexp(xi[static_cast<Eigen::Index>(k)], S);
    if (!(std::fabs(v) < 0x1p126)) {
      ok = false;
      return 0;
    }
    const __int128 iv = static_cast<__int128>(v);
    Mk[k] = static_cast<unsigned __int128>(iv);
  }
  const int bits = law.K + S;
  const unsigned __int128 mask = (static_cast<unsigned __int128>(1) << bits) - 1;
  const long double scale = std::ldexp(1.0L, -bits);
  Neumaier re, im;
  for (std::size_t i = 0; i < law.w.size(); ++i) {
    unsigned __int128 P = 0;
    for (std::size_t k = 0; k < D; ++k) P += Mk[k] * law.X[i * D + k];
    P &= mask;
    long double ph = static_cast<long double>(P) * scale;
    if (ph > 0.5L) ph -= 1.0L;
    const double a = static_cast<double>(2 * std::numbers::pi_v<long double> * ph);
    re.add(law.w[i] * std::cos(a));
    im.add(law.w[i] * std::sin(a));
  }
  ok = true;
  return std::hypot(re.value(), im.value());
}

double exact_fourier_abs(const ExactLaw& law, const DyadicLaw& dy, const Eigen::VectorXd& xi) {
  if (dy.valid) {
    bool ok = false;
    const double v = dyadic_fourier_abs(dy, xi, ok);
    if (ok) return v;
  }
  Neumaier re, im;
  for (const auto& [x, w] : law) {
    // <xi, x> reduced modulo 1 term by term before rounding
    double ph = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const Rational t = Rational(xi[static_cast<Eigen::Index>(k)]) * x[k];
      ph += to_double(frac(t));
    }
    const double a = 2 * std::numbers::pi * ph;
    const double wd = to_double(w);
    re.add(wd * std::cos(a));
    im.add(wd * std::sin(a));
  }
  return std::hypot(re.value(), im.value());
}

}  // namespace

PowerInequality power_inequality_check(const ScaledMeasure& eta, unsigned m, const std::vector<Eigen::VectorXd>& xis,
                                       std::size_t budget) {
  if (m == 0) throw ConfigError("m", "must be positive");
  const std::size_t D = eta.D();
  const std::vector<double> dt = mult_table(eta.space);
  std::vector<Rational> table(dt.size());
  for (std::size_t i = 0; i < dt.size(); ++i) table[i] = Rational(dt[i]);
  const ExactLaw e = exact_law(eta);
  const ExactLaw e3 = exact_conv(exact_conv(e, e, ConvMode::mul, table, D, budget), e, ConvMode::mul, table, D, budget);
  const ExactLaw mu = exact_conv(e3, e3, ConvMode::sub, table, D, budget);
  ExactLaw lhs_law = e3, rhs_law = mu;
  for (unsigned j = 1; j < m; ++j) {
    lhs_law = exact_conv(lhs_law, e3, ConvMode::mul, table, D, budget);
    rhs_law = exact_conv(rhs_law, mu, ConvMode::mul, table, D, budget);
  }
  PowerInequality res;
  res.slack = kInf;
  res.lhs.resize(xis.size());
  res.rhs.resize(xis.size());
  const DyadicLaw lhs_dy = dyadic_form(lhs_law), rhs_dy = dyadic_form(rhs_law);
  const auto lx = static_cast<long>(xis.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < lx; ++i) {
    res.lhs[i] = std::pow(exact_fourier_abs(lhs_law, lhs_dy, xis[i]), std::ldexp(1.0, static_cast<int>(m)));
    res.rhs[i] = exact_fourier_abs(rhs_law, rhs_dy, xis[i]);
  }
  for (std::size_t i = 0; i < xis.size(); ++i)
    if (res.rhs[i] - res.lhs[i] < res.slack) {
      res.slack = res.rhs[i] - res.lhs[i];
      res.worst = i;
    }
  return res;
}

FourierDecayTable multiplicative_fourier_decay(const std::vector<ScaledMeasure>& etas, unsigned s_max,
                                               const std::vector<Eigen::VectorXd>& xis, const ConvolveOptions& opt) {
  if (etas.empty()) throw ConfigError("etas", "at least one measure");
  FourierDecayTable tab;
  ConvolveOptions co = opt;
  if (co.snap <= 0) {
    co.snap = etas[0].delta / 64;
    co.budget = std::max<std::size_t>(co.budget, std::size_t{1} << 22);
  }
  ScaledMeasure cur = etas[0];
  for (unsigned s = 1; s <= s_max; ++s) {
    if (s > 1) cur = convolve(cur, etas[(s - 1) % etas.size()], ConvMode::mul, co);
    std::vector<double> mags(xis.size());
    const auto lx = static_cast<long>(xis.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < lx; ++i) mags[i] = std::abs(fourier_coefficient(cur, xis[i]));
    tab.s.push_back(s);
    tab.max_abs.push_back(mags.empty() ? 0 : *std::max_element(mags.begin(), mags.end()));
    tab.magnitudes.push_back(std::move(mags));
  }
  tab.nonincreasing = true;
  for (std::size_t i = 1; i < tab.max_abs.size(); ++i)
    if (tab.max_abs[i] > tab.max_abs[i - 1] * (1 + 1e-12)) tab.nonincreasing = false;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < tab.max_abs.size(); ++i)
    if (tab.max_abs[i] > 0) {
      xs.push_back(tab.s[i]);
      ys.push_back(std::log(tab.max_abs[i]));
    }
  if (xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    tab.trend = sxy / sxx;
  }
  return tab;
}

ScaledMeasure uniform_net(double a, double b, double step, double delta) {
  if (!(b >= a) || !(step > 0)) throw ConfigError("net", "needs a <= b and a positive step");
  ScaledMeasure m;
  m.space = AlgebraSpace::reals();
  m.delta = delta;
  const long K = std::lround((b - a) / step);
  for (long k = 0; k <= K; ++k) {
    const double x = a + static_cast<double>(k) * step;
    m.push(&x, 1.0 / static_cast<double>(K + 1));
  }
  return m;
}

ScaledMeasure random_small_measure(std::size_t atoms, double delta, std::uint64_t seed, std::uint64_t index) {
  Rng rng(seed, index, 8);
  ScaledMeasure m;
  m.space = AlgebraSpace::reals();
  m.delta = delta;
  std::vector<double> w(atoms);
  double total = 0;
  for (std::size_t i = 0; i < atoms; ++i) {
    const double x = std::ldexp(std::round(std::ldexp(4 * rng.uniform() - 2, 8)), -8);
    w[i] = 1 + std::abs(4 * rng.uniform() - 2);
    total += w[i];
    m.push(&x, 0);
  }
  for (std::size_t i = 0; i < atoms; ++i) m.weights[i] = w[i] / total;
  return m;
}

std::vector<Eigen::VectorXd> random_frequencies(std::size_t count, double scale, std::uint64_t seed,
                                                std::uint64_t index) {
  Rng rng(seed, index, 9);
  std::vector<Eigen::VectorXd> out;
  for (std::size_t k = 0; k < count; ++k) {
    Eigen::VectorXd x(1);
    x[0] = std::ldexp(std::round(std::ldexp(scale * (2 * rng.uniform() - 1), 6)), -6);
    out.push_back(x);
  }
  return out;
}

ScaledMeasure dirac(const AlgebraSpace& space, const Eigen::VectorXd& x, double delta) {
  if (static_cast<std::size_t>(x.size()) != space.D) throw DimensionMismatch("dirac: dimension");
  ScaledMeasure m;
  m.space = space;
  m.delta = delta;
  m.push(x, 1.0);
  return m;
}

}  // namespace eqlab
