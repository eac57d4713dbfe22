#include "eqlab/walk.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <omp.h>

#include "eqlab/errors.hpp"
#include "eqlab/precision.hpp"

namespace eqlab {
namespace {

using u128 = unsigned __int128;
using i128 = __int128;

int max_error_bits_for(double target_error) {
  return static_cast<int>(std::floor(-std::log2(target_error)));
}

// Dense double matrices in row-major flat buffers; d is tiny.
void mul_into(const double* g, const double* q, double* out, std::size_t d) {
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      double s = 0;
      for (std::size_t k = 0; k < d; ++k) s += g[r * d + k] * q[k * d + c];
      out[r * d + c] = s;
    }
}

double max_abs(const double* q, std::size_t n) {
  double m = 0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(q[i]));
  return m;
}

double op_norm(const double* q, std::size_t d) {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      q, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  if (d == 1) return std::abs(q[0]);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()[0];
}

std::vector<double> flat(const IntMatrix& g) {
  const Eigen::MatrixXd m = g.to_double();
  std::vector<double> v(g.dim() * g.dim());
  for (std::size_t r = 0; r < g.dim(); ++r)
    for (std::size_t c = 0; c < g.dim(); ++c) v[r * g.dim() + c] = m(r, c);
  return v;
}

std::vector<double> flat(const Eigen::MatrixXd& m) {
  const auto d = static_cast<std::size_t>(m.rows());
  std::vector<double> v(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) v[r * d + c] = m(r, c);
  return v;
}

BigInt to_bigint(u128 x) {
  BigInt hi = static_cast<unsigned long>(x >> 64);
  BigInt lo = static_cast<unsigned long>(static_cast<std::uint64_t>(x));
  hi <<= 64;
  return hi + lo;
}

u128 to_u128(const BigInt& x) {
  BigInt hi = x >> 64;
  BigInt lo = x - (hi << 64);
  return (static_cast<u128>(mpz_get_ui(hi.get_mpz_t())) << 64) | static_cast<u128>(mpz_get_ui(lo.get_mpz_t()));
}

std::vector<std::vector<std::int64_t>> int_generators(const GeneratorSystem& sys) {
  std::vector<std::vector<std::int64_t>> out;
  for (const auto& g : sys.generators) {
    if (!g.fits_int64()) return {};
    out.push_back(g.to_int64());
  }
  return out;
}

struct PathResult {
  std::vector<BigInt> num;
  BigInt den;  // exact kernels
  int label = 0;
  std::optional<IntMatrix> product;
};

}  // namespace

Rational WalkEnsemble::total_weight() const {
  Rational t = 0;
  for (const auto& a : atoms) t += a.weight;
  return t;
}

MeanCI mean_ci(const std::vector<double>& x) {
  MeanCI r;
  if (x.empty()) return r;
  double s = 0;
  for (double v : x) s += v;
  r.mean = s / static_cast<double>(x.size());
  if (x.size() > 1) {
    double ss = 0;
    for (double v : x) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / static_cast<double>(x.size() - 1));
  }
  r.ci = 1.96 * r.stddev / std::sqrt(static_cast<double>(x.size()));
  return r;
}

unsigned working_bits(const GeneratorSystem& sys, const StartPoint& x0, unsigned n, double target_error) {
  if (x0.is_exact()) return 0;
  // starting error is at most 2 ulps: one extra bit
  return static_cast<unsigned>(required_guard_bits(n, sys.generators, target_error) + 2);
}

WalkEnsemble enumerate_exact(const GeneratorSystem& sys, const StartPoint& x0, unsigned n,
                             const EnumerateOptions& opt) {
  if (x0.dim() != sys.dim()) throw DimensionMismatch("enumerate_exact: start point dimension");
  unsigned bits = working_bits(sys, x0, n, opt.target_error);
  const int meb = max_error_bits_for(opt.target_error);
  for (int attempt = 0;; ++attempt) {
    try {
      std::vector<WalkAtom> atoms(1);
      atoms[0].x = x0.point(bits);
      atoms[0].weight = 1;
      if (opt.keep_products) atoms[0].product = IntMatrix::identity(sys.dim());
      for (unsigned step = 0; step < n; ++step) {
        if (atoms.size() * sys.size() > opt.atom_budget)
          throw BudgetExceeded("enumerate_exact: level " + std::to_string(step + 1) + " needs " +
                               std::to_string(atoms.size() * sys.size()) + " candidates, budget " +
                               std::to_string(opt.atom_budget));
        std::map<std::vector<BigInt>, std::size_t> index;
        std::vector<WalkAtom> next;
        for (const auto& a : atoms) {
          for (std::size_t i = 0; i < sys.size(); ++i) {
            WalkAtom b;
            b.x = act_on_torus(sys.generators[i], a.x, meb);
            b.label = sys.group.mul(sys.label(i), a.label);
            b.weight = a.weight * sys.weights[i];
            if (opt.keep_products) b.product = sys.generators[i] * *a.product;
            std::vector<BigInt> key = b.x.numerators();
            key.push_back(b.x.denominator());
            key.push_back(b.label);
            if (b.product) key.insert(key.end(), b.product->entries().begin(), b.product->entries().end());
            auto [it, fresh] = index.emplace(std::move(key), next.size());
            if (fresh) {
              next.push_back(std::move(b));
            } else {
              WalkAtom& m = next[it->second];
              m.weight += b.weight;
              // merged atoms share x; keep the larger error bound
              if (!m.x.is_exact() && b.x.error_ulps() > m.x.error_ulps()) m.x = b.x;
            }
          }
        }
        atoms = std::move(next);
      }
      WalkEnsemble e;
      e.mode = EnsembleMode::exact;
      e.atoms = std::move(atoms);
      e.n = n;
      e.samples = e.atoms.size();
      e.precision_bits = bits;
      return e;
    } catch (const PrecisionExhausted&) {
      if (attempt >= 6 || bits == 0) throw;
      bits *= 2;
    }
  }
}

namespace {

// Fast kernel: dyadic numerators modulo 2^bits with bits <= 128, int64
// generators, two's-complement wraparound.
void run_dyadic_u128(const std::vector<std::vector<std::int64_t>>& gens, const GeneratorSampler& pick,
                     const GeneratorSystem& sys, const TorusPoint& start, unsigned n, std::size_t N,
                     std::uint64_t seed, bool keep_products, std::vector<PathResult>& out) {
  const std::size_t d = start.dim();
  const unsigned bits = start.precision_bits();
  const u128 mask = bits >= 128 ? ~static_cast<u128>(0) : ((static_cast<u128>(1) << bits) - 1);
  std::vector<u128> x0(d);
  for (std::size_t i = 0; i < d; ++i) x0[i] = to_u128(start.numerators()[i]);
  const long long NN = static_cast<long long>(N);
#pragma omp parallel
  {
    std::vector<u128> x(d), y(d);
#pragma omp for schedule(static)
    for (long long p = 0; p < NN; ++p) {
      Rng rng(seed, static_cast<std::uint64_t>(p), 0);
      x = x0;
      int lab = 0;
      std::optional<IntMatrix> prod;
      if (keep_products) prod = IntMatrix::identity(d);
      for (unsigned s = 0; s < n; ++s) {
        const std::size_t gi = pick(rng);
        const auto& g = gens[gi];
        for (std::size_t r = 0; r < d; ++r) {
          u128 acc = 0;
          for (std::size_t c = 0; c < d; ++c) acc += static_cast<u128>(static_cast<i128>(g[r * d + c])) * x[c];
          y[r] = acc & mask;
        }
        std::swap(x, y);
        lab = sys.group.mul(sys.label(gi), lab);
        if (prod) prod = sys.generators[gi] * *prod;
      }
      PathResult& res = out[static_cast<std::size_t>(p)];
      res.num.resize(d);
      for (std::size_t i = 0; i < d; ++i) res.num[i] = to_bigint(x[i]);
      res.label = lab;
      res.product = std::move(prod);
    }
  }
}

// Fast kernel: exact rational numerators modulo q with int128 accumulation.
void run_exact_i128(const std::vector<std::vector<std::int64_t>>& gens, const GeneratorSampler& pick,
                    const GeneratorSystem& sys, const TorusPoint& start, unsigned n, std::size_t N,
                    std::uint64_t seed, bool keep_products, std::vector<PathResult>& out) {
  const std::size_t d = start.dim();
  const i128 q = static_cast<i128>(mpz_get_si(start.denominator().get_mpz_t()));
  std::vector<i128> x0(d);
  for (std::size_t i = 0; i < d; ++i) x0[i] = static_cast<i128>(mpz_get_si(start.numerators()[i].get_mpz_t()));
  const long long NN = static_cast<long long>(N);
#pragma omp parallel
  {
    std::vector<i128> x(d), y(d);
#pragma omp for schedule(static)
    for (long long p = 0; p < NN; ++p) {
      Rng rng(seed, static_cast<std::uint64_t>(p), 0);
      x = x0;
      int lab = 0;
      std::optional<IntMatrix> prod;
      if (keep_products) prod = IntMatrix::identity(d);
      for (unsigned s = 0; s < n; ++s) {
        const std::size_t gi = pick(rng);
        const auto& g = gens[gi];
        for (std::size_t r = 0; r < d; ++r) {
          i128 acc = 0;
          for (std::size_t c = 0; c < d; ++c) acc = (acc + static_cast<i128>(g[r * d + c]) * x[c]) % q;
          if (acc < 0) acc += q;
          y[r] = acc;
        }
        std::swap(x, y);
        lab = sys.group.mul(sys.label(gi), lab);
        if (prod) prod = sys.generators[gi] * *prod;
      }
      PathResult& res = out[static_cast<std::size_t>(p)];
      res.num.resize(d);
      for (std::size_t i = 0; i < d; ++i) res.num[i] = static_cast<long>(x[i]);
      res.label = lab;
      res.product = std::move(prod);
    }
  }
}

// Reference path: arbitrary precision through act_on_torus, one path at a
// time, in index order.
std::vector<WalkAtom> run_reference(const GeneratorSampler& pick, const GeneratorSystem& sys,
                                    const TorusPoint& start, unsigned n, std::size_t N, std::uint64_t seed,
                                    bool keep_products, int meb) {
  std::vector<WalkAtom> atoms(N);
  for (std::size_t p = 0; p < N; ++p) {
    Rng rng(seed, p, 0);
    TorusPoint x = start;
    int lab = 0;
    std::optional<IntMatrix> prod;
    if (keep_products) prod = IntMatrix::identity(start.dim());
    for (unsigned s = 0; s < n; ++s) {
      const std::size_t gi = pick(rng);
      x = act_on_torus(sys.generators[gi], x, meb);
      lab = sys.group.mul(sys.label(gi), lab);
      if (prod) prod = sys.generators[gi] * *prod;
    }
    atoms[p].x = std::move(x);
    atoms[p].label = lab;
    atoms[p].product = std::move(prod);
  }
  return atoms;
}

}  // namespace

WalkEnsemble sample_paths(const GeneratorSystem& sys, const StartPoint& x0, unsigned n, std::size_t N,
                          std::uint64_t seed, const SampleOptions& opt) {
  if (N == 0) throw std::invalid_argument("sample_paths: N must be positive");
  if (x0.dim() != sys.dim()) throw DimensionMismatch("sample_paths: start point dimension");
  const GeneratorSampler pick(sys.weights);
  const auto gens = int_generators(sys);
  const int meb = max_error_bits_for(opt.target_error);
  unsigned bits = working_bits(sys, x0, n, opt.target_error);
  const Rational w(1, static_cast<long>(N));
  for (int attempt = 0;; ++attempt) {
    try {
      const TorusPoint start = x0.point(bits);
      WalkEnsemble e;
      e.mode = EnsembleMode::montecarlo;
      e.n = n;
      e.seed = seed;
      e.samples = N;
      e.precision_bits = bits;
      const bool exact = start.is_exact();
      const bool fast_dyadic = !exact && !gens.empty() && bits <= 128;
      const bool fast_exact = exact && !gens.empty() && start.denominator() < (BigInt(1) << 62) && [&] {
        std::size_t eb = 0;
        for (const auto& g : sys.generators) eb = std::max(eb, g.max_entry_bits());
        return eb + 62 + 8 < 126;
      }();
      if (opt.execution == Execution::serial_reference || !(fast_dyadic || fast_exact)) {
        e.atoms = run_reference(pick, sys, start, n, N, seed, opt.keep_products, meb);
        for (auto& a : e.atoms) a.weight = w;
        return e;
      }
      std::vector<PathResult> res(N);
      if (fast_dyadic) {
        run_dyadic_u128(gens, pick, sys, start, n, N, seed, opt.keep_products, res);
      } else {
        run_exact_i128(gens, pick, sys, start, n, N, seed, opt.keep_products, res);
      }
      // worst-case error bound over all words, identical for every path
      BigInt err = start.error_ulps();
      BigInt norm = 1;
      for (const auto& g : sys.generators) norm = std::max(norm, g.row_sum_norm());
      for (unsigned s = 0; s < n && !exact; ++s) err *= norm;
      if (!exact) {
        const long slack = static_cast<long>(bits) - meb;
        if (slack < 0 || err > (BigInt(1) << static_cast<unsigned long>(slack)))
          throw PrecisionExhausted("sample_paths: error bound exceeded");
      }
      e.atoms.resize(N);
      for (std::size_t p = 0; p < N; ++p) {
        WalkAtom& a = e.atoms[p];
        if (exact) {
          a.x = TorusPoint::exact(RationalVector{std::move(res[p].num), start.denominator()});
        } else {
          a.x = TorusPoint::dyadic(std::move(res[p].num), bits, err);
        }
        a.label = res[p].label;
        a.weight = w;
        a.product = std::move(res[p].product);
      }
      return e;
    } catch (const PrecisionExhausted&) {
      if (attempt >= 6 || bits == 0) throw;
      bits *= 2;
    }
  }
}

LyapunovProfile lyapunov_estimate(const GeneratorSystem& sys, const AlgebraDecomposition& dec, unsigned n,
                                  std::size_t N, std::uint64_t seed, const LyapunovOptions& opt) {
  if (!dec.decomposed()) throw std::logic_error("lyapunov_estimate: algebra not decomposed");
  const std::size_t d = sys.dim(), r = dec.factor_count(), dd = d * d;
  const GeneratorSampler pick(sys.weights);
  std::vector<std::vector<double>> gens;
  for (const auto& g : sys.generators) gens.push_back(flat(g));
  std::vector<std::vector<double>> starts;
  for (const auto& e : dec.idempotents) starts.push_back(flat(e));
  starts.push_back(flat(Eigen::MatrixXd::Identity(d, d)));
  const unsigned burn = n == 0 ? 0 : static_cast<unsigned>(std::floor(opt.burn_in_fraction * n));
  const unsigned span = n - burn;
  // est[p * (r + 1) + j]; the last slot is the full product
  std::vector<double> est(N * (r + 1), 0.0);
  const long long NN = static_cast<long long>(N);
  const unsigned every = std::max(1u, opt.renormalize_every);
  auto body = [&](long long p, std::vector<double>& q, std::vector<double>& tmp) {
    Rng rng(seed, static_cast<std::uint64_t>(p), 1);
    std::vector<double> logscale(r + 1, 0.0), at_burn(r + 1, 0.0);
    for (std::size_t j = 0; j <= r; ++j) std::copy(starts[j].begin(), starts[j].end(), q.begin() + j * dd);
    for (std::size_t j = 0; j <= r; ++j) {
      if (burn == 0) at_burn[j] = std::log(op_norm(q.data() + j * dd, d));
    }
    for (unsigned s = 1; s <= n; ++s) {
      const auto& g = gens[pick(rng)];
      for (std::size_t j = 0; j <= r; ++j) {
        mul_into(g.data(), q.data() + j * dd, tmp.data(), d);
        if (j < r) {
          // re-project so rounding leakage into faster factors cannot grow
          mul_into(starts[j].data(), tmp.data(), q.data() + j * dd, d);
        } else {
          std::copy(tmp.begin(), tmp.begin() + dd, q.begin() + j * dd);
        }
        if (s % every == 0) {
          const double m = max_abs(q.data() + j * dd, dd);
          if (m > 0) {
            for (std::size_t k = 0; k < dd; ++k) q[j * dd + k] /= m;
            logscale[j] += std::log(m);
          }
        }
        if (s == burn) at_burn[j] = std::log(op_norm(q.data() + j * dd, d)) + logscale[j];
      }
    }
    for (std::size_t j = 0; j <= r; ++j) {
      const double end = std::log(op_norm(q.data() + j * dd, d)) + logscale[j];
      est[static_cast<std::size_t>(p) * (r + 1) + j] = span == 0 ? 0.0 : (end - at_burn[j]) / span;
    }
  };
  if (opt.execution == Execution::serial_reference) {
    std::vector<double> q((r + 1) * dd), tmp(dd);
    for (long long p = 0; p < NN; ++p) body(p, q, tmp);
  } else {
#pragma omp parallel
    {
      std::vector<double> q((r + 1) * dd), tmp(dd);
#pragma omp for schedule(static)
      for (long long p = 0; p < NN; ++p) body(p, q, tmp);
    }
  }
  LyapunovProfile prof;
  prof.samples = N;
  prof.word_length = n;
  prof.burn_in = burn;
  for (std::size_t j = 0; j <= r; ++j) {
    std::vector<double> col(N);
    for (std::size_t p = 0; p < N; ++p) col[p] = est[p * (r + 1) + j];
    const MeanCI m = mean_ci(col);
    if (j < r) {
      prof.exponents.push_back(m.mean);
      prof.ci_radius.push_back(m.ci);
      prof.stddev.push_back(m.stddev);
    } else {
      prof.top = m.mean;
      prof.top_ci = m.ci;
    }
  }
  return prof;
}

DeviationTable large_deviation_probe(const GeneratorSystem& sys, double lambda, double omega,
                                     const std::vector<unsigned>& n_grid, std::size_t N, std::uint64_t seed) {
  DeviationTable t;
  t.omega = omega;
  t.lambda = lambda;
  if (n_grid.empty()) return t;
  std::vector<unsigned> grid = n_grid;
  std::sort(grid.begin(), grid.end());
  const std::size_t d = sys.dim(), dd = d * d, G = grid.size();
  const GeneratorSampler pick(sys.weights);
  std::vector<std::vector<double>> gens;
  for (const auto& g : sys.generators) gens.push_back(flat(g));
  std::vector<unsigned char> hit(N * G, 0);
  const long long NN = static_cast<long long>(N);
#pragma omp parallel
  {
    std::vector<double> q(dd), tmp(dd);
#pragma omp for schedule(static)
    for (long long p = 0; p < NN; ++p) {
      Rng rng(seed, static_cast<std::uint64_t>(p), 3);
      std::fill(q.begin(), q.end(), 0.0);
      for (std::size_t i = 0; i < d; ++i) q[i * d + i] = 1;
      double logscale = 0;
      std::size_t gi = 0;
      for (unsigned s = 1; s <= grid.back(); ++s) {
        mul_into(gens[pick(rng)].data(), q.data(), tmp.data(), d);
        q.swap(tmp);
        if (s % 32 == 0) {
          const double m = max_abs(q.data(), dd);
          for (double& v : q) v /= m;
          logscale += std::log(m);
        }
        while (gi < G && grid[gi] == s) {
          const double ln = std::log(op_norm(q.data(), d)) + logscale;
          hit[static_cast<std::size_t>(p) * G + gi] = std::abs(ln / s - lambda) >= omega;
          ++gi;
        }
      }
    }
  }
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < G; ++k) {
    std::size_t c = 0;
    for (std::size_t p = 0; p < N; ++p) c += hit[p * G + k];
    DeviationRow row;
    row.n = grid[k];
    row.probability = static_cast<double>(c) / static_cast<double>(N);
    row.stderr_ = std::sqrt(row.probability * (1 - row.probability) / static_cast<double>(N));
    if (row.probability > 0) {
      xs.push_back(row.n);
      ys.push_back(std::log(row.probability));
    }
    if (!t.rows.empty()) {
      const auto& prev = t.rows.back();
      const double se = std::sqrt(prev.stderr_ * prev.stderr_ + row.stderr_ * row.stderr_);
      if (row.probability > prev.probability + 1.96 * se + 1.0 / static_cast<double>(N)) t.monotone = false;
    }
    t.rows.push_back(row);
  }
  t.fitted_points = static_cast<int>(xs.size());
  if (xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    t.slope = sxx > 0 ? sxy / sxx : 0.0;
  }
  return t;
}

ReturnTimeStats induced_return_times(const GeneratorSystem& sys, unsigned m, std::size_t N, std::uint64_t seed,
                                     std::uint64_t max_steps) {
  if (!sys.has_labels()) throw MissingLabels("induced_return_times: coset labels required");
  if (m == 0) throw std::invalid_argument("induced_return_times: m must be positive");
  const GeneratorSampler pick(sys.weights);
  const int F = sys.group.order();
  ReturnTimeStats st;
  st.m = m;
  st.group_order = F;
  st.first_return.assign(N, 0);
  std::vector<double> renewal(N, 0.0);
  std::vector<std::uint64_t> occupancy(N * static_cast<std::size_t>(F), 0);
  const long long NN = static_cast<long long>(N);
  int capped = 0;
#pragma omp parallel for schedule(static) reduction(| : capped)
  for (long long p = 0; p < NN; ++p) {
    Rng rng(seed, static_cast<std::uint64_t>(p), 2);
    int lab = 0;
    std::uint64_t t = 0, returns = 0;
    while (returns < m) {
      if (t >= max_steps) {
        capped = 1;
        break;
      }
      lab = sys.group.mul(sys.label(pick(rng)), lab);
      ++t;
      ++occupancy[static_cast<std::size_t>(p) * F + lab];
      if (lab == 0) {
        ++returns;
        if (returns == 1) st.first_return[static_cast<std::size_t>(p)] = t;
      }
    }
    renewal[static_cast<std::size_t>(p)] = static_cast<double>(t) / m;
  }
  if (capped) throw BudgetExceeded("induced_return_times: a path exceeded the step cap");
  std::vector<double> tau(N);
  for (std::size_t p = 0; p < N; ++p) tau[p] = static_cast<double>(st.first_return[p]);
  const MeanCI a = mean_ci(tau), b = mean_ci(renewal);
  st.mean = a.mean;
  st.stddev = a.stddev;
  st.ci_radius = a.ci;
  st.renewal_mean = b.mean;
  st.renewal_ci = b.ci;
  st.label_frequency.assign(F, 0.0);
  double total = 0;
  for (std::size_t p = 0; p < N; ++p)
    for (int f = 0; f < F; ++f) {
      st.label_frequency[f] += static_cast<double>(occupancy[p * F + f]);
      total += static_cast<double>(occupancy[p * F + f]);
    }
  for (double& f : st.label_frequency) f /= total;
  return st;
}

ScaledMeasure rescaled_walk_measure(const GeneratorSystem& sys, const AlgebraDecomposition& dec,
                                    const RescalingMap& map, unsigned n, std::size_t N, std::uint64_t seed,
                                    const std::vector<bool>& compact, const RescaledOptions& opt) {
  if (!dec.decomposed()) throw std::logic_error("rescaled_walk_measure: algebra not decomposed");
  if (map.exponents.size() != dec.factor_count()) throw DimensionMismatch("rescaled_walk_measure: exponents");
  std::vector<std::size_t> factors = opt.factors;
  if (factors.empty()) {
    for (std::size_t j = 0; j < dec.factor_count(); ++j)
      if (j >= compact.size() || !compact[j]) factors.push_back(j);
  }
  if (factors.empty()) throw std::invalid_argument("rescaled_walk_measure: E' is trivial");
  const Eigen::MatrixXd B = scope_basis(dec, DetScope::of(factors));
  ScaledMeasure out;
  out.space = AlgebraSpace::from_basis(B, dec.d);
  out.delta = opt.delta > 0 ? opt.delta : std::exp(-static_cast<double>(n));
  const std::size_t d = dec.d, dd = d * d, D = out.space.D, fold = std::max(1u, opt.fold);
  const GeneratorSampler pick(sys.weights);
  std::vector<std::vector<double>> gens;
  for (const auto& g : sys.generators) gens.push_back(flat(g));
  // combined rescaled projector: sum over E' of e^{-n lambda_j} e_j
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(d, d);
  for (auto j : factors) R += std::exp(-map.n * map.exponents[j]) * dec.idempotents[j];
  out.coords.assign(N * D, 0.0);
  out.weights.assign(N, 1.0 / static_cast<double>(N));
  const long long NN = static_cast<long long>(N);
#pragma omp parallel
  {
    std::vector<double> q(dd), tmp(dd);
#pragma omp for schedule(static)
    for (long long i = 0; i < NN; ++i) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(D);
      for (std::size_t k = 0; k < fold; ++k) {
        Rng rng(seed, static_cast<std::uint64_t>(i) * fold + k, 4);
        std::fill(q.begin(), q.end(), 0.0);
        for (std::size_t t = 0; t < d; ++t) q[t * d + t] = 1;
        double logscale = 0;
        for (unsigned s = 1; s <= n; ++s) {
          const std::size_t gi = pick(rng);
          mul_into(gens[gi].data(), q.data(), tmp.data(), d);
          q.swap(tmp);
          if (s % 32 == 0) {
            const double m = max_abs(q.data(), dd);
            for (double& v : q) v /= m;
            logscale += std::log(m);
          }
        }
        if (n == 0) {
          // the law of the first step, as for mu itself
          Rng r0(seed, static_cast<std::uint64_t>(i) * fold + k, 4);
          q = gens[pick(r0)];
        }
        Eigen::MatrixXd P(d, d);
        for (std::size_t r = 0; r < d; ++r)
          for (std::size_t c = 0; c < d; ++c) P(r, c) = q[r * d + c] * std::exp(logscale);
        acc += B.transpose() * vec(R * P);
      }
      for (std::size_t t = 0; t < D; ++t) out.coords[static_cast<std::size_t>(i) * D + t] = acc[t];
    }
  }
  return out;
}

}  // namespace eqlab
