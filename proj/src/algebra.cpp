#include "eqlab/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>
#include <numeric>

#include "eqlab/errors.hpp"

namespace eqlab {
namespace {

QVector qmul(const QVector& a, const QVector& b, std::size_t d) {
  QVector c(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t k = 0; k < d; ++k) {
      const Rational& x = a[r * d + k];
      if (x == 0) continue;
      for (std::size_t s = 0; s < d; ++s) {
        const Rational& y = b[k * d + s];
        if (y != 0) c[r * d + s] += x * y;
      }
    }
  return c;
}

QVector qidentity(std::size_t d) {
  QVector v(d * d);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1;
  return v;
}

Eigen::MatrixXd orthonormal_columns(const Eigen::MatrixXd& a, double rank_tol = 1e-10) {
  if (a.cols() == 0) return Eigen::MatrixXd(a.rows(), 0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  while (r < s.size() && s[r] > rank_tol * std::max(1.0, s[0])) ++r;
  return svd.matrixU().leftCols(r);
}

Eigen::MatrixXd columns_of(const std::vector<QVector>& vs, std::size_t m) {
  Eigen::MatrixXd a(m, vs.size());
  for (std::size_t k = 0; k < vs.size(); ++k)
    for (std::size_t i = 0; i < m; ++i) a(i, k) = to_double(vs[k][i]);
  return a;
}

AlgebraDecomposition from_span(const RationalSpan& span, std::size_t d) {
  AlgebraDecomposition dec;
  dec.d = d;
  dec.algebra_basis = span.basis();
  dec.basis_orthonormal = orthonormal_columns(columns_of(dec.algebra_basis, d * d));
  return dec;
}

// closest fraction with denominator <= max_den by continued fractions
std::optional<Rational> reconstruct(double x, long max_den, double tol) {
  if (!std::isfinite(x)) return std::nullopt;
  long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double v = x;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(v);
    if (std::abs(a) > 1e12) break;
    const long ai = static_cast<long>(a);
    const long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    if (std::abs(x - static_cast<double>(p1) / static_cast<double>(q1)) <= tol) return Rational(p1, q1);
    const double f = v - a;
    if (f < 1e-15) break;
    v = 1.0 / f;
  }
  if (q1 > 0 && std::abs(x - static_cast<double>(p1) / static_cast<double>(q1)) <= tol) return Rational(p1, q1);
  return std::nullopt;
}

double fro(const Eigen::MatrixXd& m) { return m.norm(); }

}  // namespace

Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
  const auto d = m.rows();
  Eigen::VectorXd v(d * m.cols());
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[r * m.cols() + c] = m(r, c);
  return v;
}

Eigen::MatrixXd unvec(const Eigen::VectorXd& v, std::size_t d) {
  Eigen::MatrixXd m(d, d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) m(r, c) = v[r * d + c];
  return m;
}

QVector vec_exact(const IntMatrix& m) {
  QVector v(m.dim() * m.dim());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = Rational(m.entries()[i]);
  return v;
}

Eigen::MatrixXd to_eigen(const QVector& vm, std::size_t d) {
  Eigen::MatrixXd m(d, d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) m(r, c) = to_double(vm[r * d + c]);
  return m;
}

AlgebraDecomposition generate_algebra_from(const std::vector<IntMatrix>& elements, std::size_t d) {
  RationalSpan span(d * d);
  std::deque<QVector> work;
  const QVector one = qidentity(d);
  span.add(one);
  work.push_back(one);
  std::vector<QVector> gens;
  for (const auto& g : elements) {
    if (g.dim() != d) throw DimensionMismatch("generate_algebra: dimension mismatch");
    gens.push_back(vec_exact(g));
  }
  // every word is reached by right multiplication from a shorter one, and a
  // word already in the span contributes nothing new after extension
  while (!work.empty()) {
    QVector x = std::move(work.front());
    work.pop_front();
    for (const auto& g : gens) {
      QVector y = qmul(x, g, d);
      if (span.add(y)) work.push_back(std::move(y));
    }
  }
  return from_span(span, d);
}

AlgebraDecomposition generate_algebra(const GeneratorSystem& sys) {
  return generate_algebra_from(sys.generators, sys.dim());
}

AlgebraDecomposition generate_identity_component_algebra(const GeneratorSystem& sys, int max_rounds) {
  if (!sys.has_labels()) throw MissingLabels("identity component requires coset labels");
  const std::size_t d = sys.dim();
  const int F = sys.group.order();
  std::vector<RationalSpan> spans(F, RationalSpan(d * d));
  std::vector<std::deque<QVector>> work(F);
  spans[0].add(qidentity(d));
  work[0].push_back(qidentity(d));
  std::vector<QVector> gens;
  for (const auto& g : sys.generators) gens.push_back(vec_exact(g));
  for (int round = 0; round < max_rounds; ++round) {
    bool grew = false;
    std::vector<std::deque<QVector>> next(F);
    for (int gamma = 0; gamma < F; ++gamma) {
      for (const auto& x : work[gamma]) {
        for (std::size_t i = 0; i < gens.size(); ++i) {
          const int target = sys.group.mul(sys.label(i), gamma);
          QVector y = qmul(gens[i], x, d);
          if (spans[target].add(y)) {
            next[target].push_back(std::move(y));
            grew = true;
          }
        }
      }
    }
    work = std::move(next);
    if (!grew) break;
  }
  // S_0 spans the label-trivial words; close it under multiplication too
  std::vector<QVector> s0 = spans[0].basis();
  RationalSpan alg(d * d);
  std::deque<QVector> q;
  for (const auto& b : s0) {
    if (alg.add(b)) q.push_back(b);
  }
  while (!q.empty()) {
    QVector x = std::move(q.front());
    q.pop_front();
    for (const auto& b : s0) {
      QVector y = qmul(x, b, d);
      if (alg.add(y)) q.push_back(std::move(y));
    }
  }
  return from_span(alg, d);
}

AlgebraDecomposition compute_center(AlgebraDecomposition dec) {
  const std::size_t d = dec.d, D = dec.dim(), m = d * d;
  // coefficient of c_k in entry (j, e) of [z, b_j] for z = sum_k c_k b_k
  std::vector<std::vector<QVector>> comm(D, std::vector<QVector>(D));
  for (std::size_t k = 0; k < D; ++k)
    for (std::size_t j = 0; j < D; ++j) {
      QVector a = qmul(dec.algebra_basis[k], dec.algebra_basis[j], d);
      QVector b = qmul(dec.algebra_basis[j], dec.algebra_basis[k], d);
      for (std::size_t e = 0; e < m; ++e) a[e] -= b[e];
      comm[k][j] = std::move(a);
    }
  std::vector<QVector> rows;
  for (std::size_t j = 0; j < D; ++j)
    for (std::size_t e = 0; e < m; ++e) {
      QVector row(D);
      bool nz = false;
      for (std::size_t k = 0; k < D; ++k) {
        row[k] = comm[k][j][e];
        nz = nz || row[k] != 0;
      }
      if (nz) rows.push_back(std::move(row));
    }
  RationalSpan center(m);
  for (const auto& c : nullspace(rows, D)) {
    QVector z(m);
    for (std::size_t k = 0; k < D; ++k) {
      if (c[k] == 0) continue;
      for (std::size_t e = 0; e < m; ++e) z[e] += c[k] * dec.algebra_basis[k][e];
    }
    center.add(z);
  }
  dec.center_basis = center.basis();
  return dec;
}

namespace {

struct Cluster {
  std::vector<int> members;
};

// Single-linkage clusters of the eigenvalues, then merged with their
// conjugates. Returns nullopt when a cluster is not one real eigenvalue or
// one conjugate pair.
std::optional<std::vector<Cluster>> cluster_eigenvalues(const Eigen::VectorXcd& ev, double gap, double& min_gap) {
  const int n = static_cast<int>(ev.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool close = std::abs(ev[i] - ev[j]) < gap || std::abs(ev[i] - std::conj(ev[j])) < gap;
      if (close) parent[find(i)] = find(j);
    }
  std::vector<Cluster> out;
  std::vector<int> slot(n, -1);
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(out.size());
      out.emplace_back();
    }
    out[slot[r]].members.push_back(i);
  }
  min_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (find(i) != find(j)) min_gap = std::min(min_gap, std::abs(ev[i] - ev[j]));
  for (const auto& c : out) {
    if (c.members.size() == 1) {
      if (std::abs(ev[c.members[0]].imag()) >= gap) return std::nullopt;
    } else if (c.members.size() == 2) {
      const auto a = ev[c.members[0]], b = ev[c.members[1]];
      if (std::abs(a - std::conj(b)) >= gap || std::abs(a.imag()) < gap) return std::nullopt;
    } else {
      return std::nullopt;
    }
  }
  return out;
}

}  // namespace

AlgebraDecomposition wedderburn_decompose(AlgebraDecomposition dec, const WedderburnOptions& opt) {
  if (dec.center_basis.empty()) dec = compute_center(std::move(dec));
  const std::size_t d = dec.d, m = d * d, c = dec.center_basis.size();
  RationalSpan cspan(m);
  for (const auto& z : dec.center_basis) cspan.add(z);
  const QVector one_coords = cspan.coordinates(qidentity(d));
  Rng rng(opt.seed, 0x5eed5ULL);

  std::vector<Eigen::MatrixXd> idem;
  double min_gap = 0;
  int attempt = 0;
  for (;; ++attempt) {
    if (attempt >= opt.max_attempts)
      throw AmbiguousClusters("wedderburn_decompose: eigenvalue clusters ambiguous after " +
                              std::to_string(opt.max_attempts) + " random central elements");
    QVector z(m);
    for (std::size_t k = 0; k < c; ++k) {
      const long coef = static_cast<long>(rng.below(101)) - 50;
      if (coef == 0) continue;
      for (std::size_t e = 0; e < m; ++e) z[e] += Rational(coef) * dec.center_basis[k][e];
    }
    Eigen::MatrixXd L(c, c);
    for (std::size_t k = 0; k < c; ++k) {
      const QVector coords = cspan.coordinates(qmul(z, dec.center_basis[k], d));
      for (std::size_t i = 0; i < c; ++i) L(i, k) = to_double(coords[i]);
    }
    const double scale = std::max(1.0, L.norm());
    Eigen::EigenSolver<Eigen::MatrixXd> es(L / scale);
    if (es.info() != Eigen::Success) continue;
    const Eigen::VectorXcd ev = es.eigenvalues();
    auto clusters = cluster_eigenvalues(ev, 1e3 * opt.tol, min_gap);
    if (!clusters) continue;
    const Eigen::MatrixXcd V = es.eigenvectors();
    const Eigen::MatrixXcd Vinv = V.inverse();
    Eigen::VectorXcd one(c);
    for (std::size_t i = 0; i < c; ++i) one[i] = to_double(one_coords[i]);
    const Eigen::VectorXcd w = Vinv * one;
    idem.clear();
    for (const auto& cl : *clusters) {
      Eigen::VectorXcd sel = Eigen::VectorXcd::Zero(c);
      for (int i : cl.members) sel[i] = w[i];
      const Eigen::VectorXd coords = (V * sel).real();
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(d, d);
      for (std::size_t k = 0; k < c; ++k) e += coords[k] * to_eigen(dec.center_basis[k], d);
      idem.push_back(e);
    }
    break;
  }

  // factor dimension = trace of y -> e y on E = dim e E
  const Eigen::MatrixXd& B = dec.basis_orthonormal;
  std::vector<std::pair<int, std::size_t>> order;
  for (std::size_t j = 0; j < idem.size(); ++j) {
    const double tr = left_multiplication(B, idem[j], d).trace();
    order.emplace_back(static_cast<int>(std::lround(tr)), j);
  }
  std::stable_sort(order.begin(), order.end(), [](auto a, auto b) { return a.first > b.first; });
  std::vector<Eigen::MatrixXd> sorted;
  dec.factor_dims.clear();
  for (auto [dim, j] : order) {
    sorted.push_back(idem[j]);
    dec.factor_dims.push_back(dim);
  }
  idem = std::move(sorted);

  // exact certificate when every entry has a small denominator
  dec.rational_idempotents.reset();
  {
    std::vector<QVector> rat;
    bool ok = true;
    for (const auto& e : idem) {
      QVector q(m);
      for (std::size_t i = 0; i < m && ok; ++i) {
        auto r = reconstruct(e(i / d, i % d), opt.rational_max_den, 1e-7);
        if (!r) ok = false;
        else q[i] = *r;
      }
      if (!ok) break;
      rat.push_back(std::move(q));
    }
    if (ok) {
      QVector sum(m);
      for (std::size_t i = 0; i < rat.size() && ok; ++i) {
        for (std::size_t e = 0; e < m; ++e) sum[e] += rat[i][e];
        for (std::size_t j = 0; j < rat.size() && ok; ++j) {
          const QVector p = qmul(rat[i], rat[j], d);
          ok = (i == j) ? p == rat[i] : std::all_of(p.begin(), p.end(), [](const Rational& x) { return x == 0; });
        }
        for (const auto& b : dec.algebra_basis) {
          if (!ok) break;
          ok = qmul(rat[i], b, d) == qmul(b, rat[i], d);
        }
        ok = ok && cspan.contains(rat[i]);
      }
      ok = ok && sum == qidentity(d);
      if (ok) {
        for (std::size_t j = 0; j < idem.size(); ++j) idem[j] = to_eigen(rat[j], d);
        dec.rational_idempotents = std::move(rat);
      }
    }
  }

  DecompositionResiduals res;
  res.attempts = attempt + 1;
  res.cluster_gap = min_gap;
  res.rational = dec.rational_idempotents.has_value();
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < idem.size(); ++i) {
    total += idem[i];
    res.idempotent = std::max(res.idempotent, fro(idem[i] * idem[i] - idem[i]));
    for (std::size_t j = 0; j < idem.size(); ++j)
      if (i != j) res.orthogonality = std::max(res.orthogonality, fro(idem[i] * idem[j]));
    for (std::size_t k = 0; k < dec.dim(); ++k) {
      const Eigen::MatrixXd b = dec.basis_matrix(k);
      res.commutation = std::max(res.commutation, fro(idem[i] * b - b * idem[i]) / fro(b));
    }
  }
  res.unit = fro(total - Eigen::MatrixXd::Identity(d, d));
  dec.residuals = res;
  dec.idempotents = std::move(idem);
  const double worst = std::max({res.idempotent, res.orthogonality, res.unit, res.commutation});
  if (worst >= opt.tol)
    throw ToleranceExceeded("wedderburn_decompose: residual " + std::to_string(worst) + " exceeds tolerance");

  dec.factor_bases.clear();
  for (const auto& e : dec.idempotents) {
    Eigen::MatrixXd cols(m, dec.dim());
    for (std::size_t k = 0; k < dec.dim(); ++k) cols.col(k) = vec(e * dec.basis_matrix(k));
    dec.factor_bases.push_back(orthonormal_columns(cols, 1e-8));
  }
  return dec;
}

AlgebraDecomposition decompose(const GeneratorSystem& sys, const WedderburnOptions& opt) {
  return wedderburn_decompose(compute_center(generate_algebra(sys)), opt);
}

Eigen::MatrixXd left_multiplication(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& x, std::size_t d) {
  Eigen::MatrixXd img(basis.rows(), basis.cols());
  for (Eigen::Index k = 0; k < basis.cols(); ++k) img.col(k) = vec(x * unvec(basis.col(k), d));
  return basis.transpose() * img;
}

Eigen::MatrixXd scope_basis(const AlgebraDecomposition& dec, const DetScope& scope) {
  if (scope.kind == DetScope::Kind::whole) return dec.basis_orthonormal;
  if (!dec.decomposed()) throw std::logic_error("det_on_algebra: factors requested before decomposition");
  Eigen::Index cols = 0;
  for (auto j : scope.factors) cols += dec.factor_bases.at(j).cols();
  Eigen::MatrixXd all(dec.ambient_dim(), cols);
  Eigen::Index at = 0;
  for (auto j : scope.factors) {
    all.middleCols(at, dec.factor_bases[j].cols()) = dec.factor_bases[j];
    at += dec.factor_bases[j].cols();
  }
  return orthonormal_columns(all, 1e-8);
}

double det_on_algebra(const AlgebraDecomposition& dec, const Eigen::MatrixXd& x, const DetScope& scope) {
  const Eigen::MatrixXd B = scope_basis(dec, scope);
  return left_multiplication(B, x, dec.d).determinant();
}

ModuleDecomposition decompose_module(const GeneratorSystem& sys, const AlgebraDecomposition& dec,
                                     const LyapunovProfile& profile, const ModuleOptions& opt) {
  if (!dec.decomposed()) throw std::logic_error("decompose_module: algebra not decomposed");
  const std::size_t r = dec.factor_count(), d = dec.d;
  if (profile.exponents.size() != r) throw DimensionMismatch("decompose_module: one exponent per factor required");
  ModuleDecomposition md;
  md.d = d;
  std::vector<Eigen::MatrixXd> gens;
  for (const auto& g : sys.generators) gens.push_back(g.to_double());
  const GeneratorSampler pick(sys.weights);

  std::vector<bool> compact(r, false);
  md.max_word_norm_ratio.assign(r, 0.0);
  for (std::size_t j = 0; j < r; ++j) {
    const bool ci_has_zero = std::abs(profile.exponents[j]) <= profile.ci_radius[j];
    const double base = dec.idempotents[j].norm();
    double worst = 1.0;
    if (ci_has_zero) {
      for (int w = 0; w < opt.compact_words && worst <= opt.compact_bound; ++w) {
        Rng rng(opt.seed, static_cast<std::uint64_t>(w), j);
        const int len = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(opt.compact_max_len)));
        Eigen::MatrixXd q = dec.idempotents[j];
        for (int s = 0; s < len; ++s) {
          q = gens[pick(rng)] * q;
          worst = std::max(worst, q.norm() / base);
          if (worst > opt.compact_bound) break;
        }
      }
    }
    md.max_word_norm_ratio[j] = ci_has_zero ? worst : std::numeric_limits<double>::infinity();
    compact[j] = ci_has_zero && worst <= opt.compact_bound;
  }

  // compact factors form V_0; the rest are grouped by exponent
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> v0;
  for (std::size_t j = 0; j < r; ++j) {
    if (compact[j]) {
      v0.push_back(j);
      continue;
    }
    bool placed = false;
    for (auto& g : groups) {
      const std::size_t i = g.front();
      const double diff = std::abs(profile.exponents[i] - profile.exponents[j]);
      if (diff < opt.grouping_tol) {
        if (diff > profile.ci_radius[i] + profile.ci_radius[j])
          throw GroupingAmbiguous("decompose_module: exponents within tolerance but confidence intervals disjoint");
        g.push_back(j);
        placed = true;
        break;
      }
    }
    if (!placed) groups.push_back({j});
  }
  auto make_block = [&](const std::vector<std::size_t>& fs, bool is_compact) {
    ModuleBlock b;
    b.factors = fs;
    b.compact = is_compact;
    b.projector = Eigen::MatrixXd::Zero(d, d);
    double lam = 0, ci = 0;
    for (auto j : fs) {
      b.projector += dec.idempotents[j];
      lam += profile.exponents[j];
      ci = std::max(ci, profile.ci_radius[j]);
    }
    b.exponent = is_compact ? 0.0 : lam / static_cast<double>(fs.size());
    b.ci_radius = ci;
    b.basis = orthonormal_columns(b.projector, 1e-8);
    return b;
  };
  if (!v0.empty()) md.blocks.push_back(make_block(v0, true));
  for (const auto& g : groups) md.blocks.push_back(make_block(g, false));
  return md;
}

Eigen::MatrixXd rescale(const AlgebraDecomposition& dec, const RescalingMap& map, const Eigen::MatrixXd& x) {
  if (map.exponents.size() != dec.factor_count()) throw DimensionMismatch("rescale: one exponent per factor required");
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (std::size_t j = 0; j < dec.factor_count(); ++j) y += std::exp(-map.n * map.exponents[j]) * dec.project(j, x);
  return y;
}

}  // namespace eqlab
