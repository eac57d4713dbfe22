#include "eqlab/quasigeom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "eqlab/diagnostics.hpp"
#include "eqlab/errors.hpp"

namespace eqlab {

// ---------------------------------------------------------------- bodies

ConvexBody ConvexBody::ball(std::size_t D, double r) {
  return product({BodyBlock{Eigen::MatrixXd::Identity(D, D), r}});
}

ConvexBody ConvexBody::product(std::vector<BodyBlock> blocks, const Eigen::MatrixXd& free_basis) {
  ConvexBody b;
  if (blocks.empty()) throw std::invalid_argument("ConvexBody: no blocks");
  b.D_ = static_cast<std::size_t>(blocks.front().L.cols());
  for (const auto& bl : blocks) {
    if (static_cast<std::size_t>(bl.L.cols()) != b.D_) throw DimensionMismatch("ConvexBody: block width");
    if (!(bl.radius > 0)) throw std::invalid_argument("ConvexBody: radius must be positive");
  }
  b.blocks_ = std::move(blocks);
  const auto D = static_cast<Eigen::Index>(b.D_);
  if (free_basis.cols() > 0) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(free_basis);
    b.free_ = qr.householderQ() * Eigen::MatrixXd::Identity(D, free_basis.cols());
    b.kill_ = Eigen::MatrixXd::Identity(D, D) - b.free_ * b.free_.transpose();
  } else {
    b.free_ = Eigen::MatrixXd(D, 0);
    b.kill_ = Eigen::MatrixXd::Identity(D, D);
  }
  return b;
}

double ConvexBody::gauge(const double* z) const {
  Eigen::Map<const Eigen::VectorXd> v(z, static_cast<Eigen::Index>(D_));
  double g = 0;
  if (has_free_directions()) {
    const Eigen::VectorXd w = kill_ * v;
    for (const auto& b : blocks_) g = std::max(g, (b.L * w).norm() / b.radius);
  } else {
    for (const auto& b : blocks_) g = std::max(g, (b.L * v).norm() / b.radius);
  }
  return g;
}

ConvexBody ConvexBody::scaled(double c) const {
  ConvexBody b = *this;
  for (auto& bl : b.blocks_) bl.radius *= c;
  return b;
}

std::vector<std::size_t> ConvexBody::block_sizes() const {
  std::vector<std::size_t> s;
  for (const auto& b : blocks_) s.push_back(static_cast<std::size_t>(b.L.rows()));
  return s;
}

Eigen::MatrixXd ConvexBody::normalizer() const {
  Eigen::Index rows = 0;
  for (const auto& b : blocks_) rows += b.L.rows();
  Eigen::MatrixXd N(rows, static_cast<Eigen::Index>(D_));
  Eigen::Index at = 0;
  for (const auto& b : blocks_) {
    N.middleRows(at, b.L.rows()) = (b.L / b.radius) * kill_;
    at += b.L.rows();
  }
  return N;
}

ConvexBody ConvexBody::polar() const {
  if (has_free_directions()) throw std::logic_error("ConvexBody::polar: unbounded body");
  Eigen::Index rows = 0;
  for (const auto& b : blocks_) rows += b.L.rows();
  if (rows != static_cast<Eigen::Index>(D_)) throw std::logic_error("ConvexBody::polar: stacked map must be square");
  Eigen::MatrixXd L(rows, rows);
  Eigen::Index at = 0;
  for (const auto& b : blocks_) {
    L.middleRows(at, b.L.rows()) = b.L;
    at += b.L.rows();
  }
  // <xi, z> = <L^{-T} xi, L z>, so block b of L^{-T} xi pairs with block b of L z
  const Eigen::MatrixXd LinvT = L.inverse().transpose();
  std::vector<BodyBlock> out;
  at = 0;
  for (const auto& b : blocks_) {
    out.push_back({LinvT.middleRows(at, b.L.rows()), 1.0 / b.radius});
    at += b.L.rows();
  }
  return product(std::move(out));
}

std::vector<double> ConvexBody::extent() const {
  std::vector<double> h(D_, kInf);
  if (has_free_directions()) {
    // directions orthogonal to every free vector stay bounded only when
    // the free subspace is a coordinate-free complement; report infinity
    for (std::size_t i = 0; i < D_; ++i) {
      if (free_.row(static_cast<Eigen::Index>(i)).norm() > 1e-12) continue;
      h[i] = kInf;
    }
    return h;
  }
  Eigen::Index rows = 0;
  for (const auto& b : blocks_) rows += b.L.rows();
  Eigen::MatrixXd L(rows, static_cast<Eigen::Index>(D_));
  Eigen::Index at = 0;
  for (const auto& b : blocks_) {
    L.middleRows(at, b.L.rows()) = b.L;
    at += b.L.rows();
  }
  // z = L^+ u with u in the product of balls: h_i = sum_b r_b |(L^+)^T e_i restricted to b|
  const Eigen::MatrixXd Lp = L.completeOrthogonalDecomposition().pseudoInverse();
  for (std::size_t i = 0; i < D_; ++i) {
    double s = 0;
    at = 0;
    for (const auto& b : blocks_) {
      s += b.radius * Lp.row(static_cast<Eigen::Index>(i)).segment(at, b.L.rows()).norm();
      at += b.L.rows();
    }
    h[i] = s;
  }
  return h;
}

double ConvexBody::volume() const {
  if (has_free_directions()) return kInf;
  Eigen::Index rows = 0;
  for (const auto& b : blocks_) rows += b.L.rows();
  if (rows != static_cast<Eigen::Index>(D_)) return kInf;
  Eigen::MatrixXd L(rows, rows);
  Eigen::Index at = 0;
  double v = 1;
  for (const auto& b : blocks_) {
    L.middleRows(at, b.L.rows()) = b.L;
    at += b.L.rows();
    const double k = static_cast<double>(b.L.rows());
    v *= std::pow(std::numbers::pi, k / 2) / std::tgamma(k / 2 + 1) * std::pow(b.radius, k);
  }
  return v / std::abs(L.determinant());
}

// ---------------------------------------------------------------- quasi-norm

QuasiNorm::QuasiNorm(std::vector<QuasiBlock> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw std::invalid_argument("QuasiNorm: no blocks");
  d_ = static_cast<std::size_t>(blocks_.front().projector.rows());
}

QuasiNorm QuasiNorm::from_module(const ModuleDecomposition& md) {
  std::vector<QuasiBlock> qb;
  for (const auto& b : md.blocks) {
    QuasiBlock q;
    q.projector = b.projector;
    q.basis = b.basis;
    q.compact = b.compact;
    q.alpha = b.compact ? kInf : 1.0 / std::abs(b.exponent);
    qb.push_back(std::move(q));
  }
  return QuasiNorm(std::move(qb));
}

QuasiNorm QuasiNorm::coordinate_blocks(const std::vector<std::size_t>& sizes, const std::vector<double>& lambdas) {
  const std::size_t d = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::vector<QuasiBlock> qb;
  std::size_t at = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    QuasiBlock q;
    q.projector = Eigen::MatrixXd::Zero(d, d);
    q.basis = Eigen::MatrixXd::Zero(d, sizes[i]);
    for (std::size_t k = 0; k < sizes[i]; ++k) {
      q.projector(at + k, at + k) = 1;
      q.basis(at + k, k) = 1;
    }
    q.compact = lambdas[i] <= 0;
    q.alpha = q.compact ? kInf : 1.0 / lambdas[i];
    qb.push_back(std::move(q));
    at += sizes[i];
  }
  return QuasiNorm(std::move(qb));
}

double QuasiNorm::operator()(const Eigen::VectorXd& v) const {
  double m = 0;
  for (const auto& b : blocks_) {
    const double n = (b.projector * v).norm();
    if (b.compact) {
      if (n > 1.0) return kInf;
    } else {
      m = std::max(m, std::pow(n, b.alpha));
    }
  }
  return m;
}

double QuasiNorm::operator()(const std::vector<double>& v) const {
  return (*this)(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

double QuasiNorm::noncompact(const Eigen::VectorXd& v) const {
  double m = 0;
  for (const auto& b : blocks_)
    if (!b.compact) m = std::max(m, std::pow((b.projector * v).norm(), b.alpha));
  return m;
}

double QuasiNorm::triangle_constant() const {
  // (a + b)^alpha <= max(1, 2^{alpha - 1}) (a^alpha + b^alpha)
  double amax = 0;
  for (const auto& b : blocks_)
    if (!b.compact) amax = std::max(amax, b.alpha);
  return std::max(1.0, std::pow(2.0, amax - 1.0));
}

bool QuasiNorm::has_compact_block() const {
  return std::any_of(blocks_.begin(), blocks_.end(), [](const QuasiBlock& b) { return b.compact; });
}

ConvexBody QuasiNorm::ball(double r) const {
  std::vector<BodyBlock> bl;
  for (const auto& b : blocks_) {
    BodyBlock x;
    x.L = b.basis.transpose() * b.projector;
    x.radius = b.compact ? 1.0 : std::pow(r, 1.0 / b.alpha);
    bl.push_back(std::move(x));
  }
  return ConvexBody::product(std::move(bl));
}

ConvexBody QuasiNorm::neighborhood(const Eigen::MatrixXd& W_basis, double r) const {
  ConvexBody b = ball(r);
  if (W_basis.cols() == 0) return b;
  return ConvexBody::product(b.blocks(), W_basis);
}

double qnorm(const QuasiNorm& qn, const Eigen::VectorXd& v) { return qn(v); }

TorusDistance qdist_torus_detail(const QuasiNorm& qn, const TorusPoint& x, const TorusPoint& y) {
  const std::vector<double> u = centered_difference(x, y);
  Eigen::Map<const Eigen::VectorXd> v(u.data(), static_cast<Eigen::Index>(u.size()));
  // the centered lift minimizes the Euclidean norm among all lifts
  if (v.norm() <= 0.5) return {qn(Eigen::VectorXd(v)), false};
  note(Warning::torus_cutoff);
  return {1.0, true};
}

double qdist_torus(const QuasiNorm& qn, const TorusPoint& x, const TorusPoint& y) {
  return qdist_torus_detail(qn, x, y).value;
}

double qdist_Y(const QuasiNorm& qn, const YPoint& a, const YPoint& b) {
  if (a.sheet != b.sheet) return kInf;
  return qdist_torus(qn, a.x, b.x);
}

double dist_affine(const QuasiNorm& qn, const Eigen::VectorXd& v, const Eigen::VectorXd& l, double c) {
  const double phi = l.dot(v) + c;
  double best = kInf;
  bool any = false;
  for (const auto& b : qn.blocks()) {
    if (b.compact) continue;
    for (Eigen::Index i = 0; i < b.basis.cols(); ++i) {
      const double li = l.dot(b.basis.col(i));
      if (std::abs(li) <= 1e-14 * std::max(1.0, l.norm())) continue;
      any = true;
      if (phi == 0) return 0.0;
      best = std::min(best, std::pow(std::abs(phi / li), b.alpha));
    }
  }
  if (!any) throw DegenerateHyperplane("dist_affine: the functional vanishes on every non-compact direction");
  return best;
}

ZQDistance dist_to_ZQ(const QuasiNorm& qn, const TorusPoint& x, long Q, const Eigen::MatrixXd& quotient) {
  if (Q < 1) throw std::invalid_argument("dist_to_ZQ: Q must be at least 1");
  const std::size_t d = x.dim();
  Eigen::MatrixXd kill = Eigen::MatrixXd::Identity(d, d);
  if (quotient.cols() > 0) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(quotient);
    const Eigen::MatrixXd U = qr.householderQ() * Eigen::MatrixXd::Identity(d, quotient.cols());
    kill -= U * U.transpose();
  }
  std::vector<Rational> xc(d);
  for (std::size_t i = 0; i < d; ++i) xc[i] = x.coordinate(i);
  Eigen::MatrixXd P0 = Eigen::MatrixXd::Zero(d, d);
  for (const auto& b : qn.blocks())
    if (b.compact) P0 += b.projector;

  ZQDistance best;
  std::size_t neigh = 1;
  for (std::size_t i = 0; i < d; ++i) neigh *= 3;
  std::vector<BigInt> p(d), p0(d);
  Eigen::VectorXd u(d);
  for (long q = 1; q <= Q; ++q) {
    for (std::size_t i = 0; i < d; ++i) p0[i] = floor_of(xc[i] * q + Rational(1, 2));
    for (std::size_t code = 0; code < neigh; ++code) {
      std::size_t c = code;
      for (std::size_t i = 0; i < d; ++i) {
        p[i] = p0[i] + static_cast<long>(c % 3) - 1;
        c /= 3;
        u[i] = to_double(xc[i] - Rational(p[i], q));
      }
      Eigen::VectorXd w = kill * u;
      Eigen::VectorXd v0 = P0 * w;
      const double n0 = v0.norm();
      bool excess = false;
      double value;
      Eigen::VectorXd rest = w;
      if (n0 <= static_cast<double>(Q)) {
        rest -= v0;  // absorbed by Ball_{V0}(0, Q)
      } else {
        excess = true;
        rest -= v0 * (static_cast<double>(Q) / n0);
      }
      bool cutoff = false;
      if (rest.norm() <= 0.5) {
        value = qn(rest);
      } else {
        value = 1.0;
        cutoff = true;
      }
      if (value < best.value) {
        best.value = value;
        best.q = q;
        best.p = p;
        best.v0 = v0;
        best.compact_excess = excess;
        best.cutoff = cutoff;
      }
    }
    if (best.value == 0) break;
  }
  if (best.cutoff) note(Warning::zq_cutoff);
  return best;
}

// ---------------------------------------------------------------- covers

namespace {

struct BallFit {
  Eigen::VectorXd c;
  double r2 = -1;
};

BallFit ball_from(const std::vector<Eigen::VectorXd>& R) {
  BallFit b;
  if (R.empty()) return b;
  const Eigen::VectorXd& p0 = R[0];
  b.c = p0;
  b.r2 = 0;
  if (R.size() == 1) return b;
  const auto m = static_cast<Eigen::Index>(R.size() - 1);
  Eigen::MatrixXd A(p0.size(), m);
  for (Eigen::Index i = 0; i < m; ++i) A.col(i) = R[static_cast<std::size_t>(i + 1)] - p0;
  const Eigen::MatrixXd G = A.transpose() * A;
  Eigen::VectorXd rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) rhs[i] = 0.5 * G(i, i);
  const Eigen::VectorXd lam = G.completeOrthogonalDecomposition().solve(rhs);
  b.c = p0 + A * lam;
  b.r2 = 0;
  for (const auto& p : R) b.r2 = std::max(b.r2, (p - b.c).squaredNorm());
  return b;
}

bool inside(const BallFit& b, const Eigen::VectorXd& p) {
  return b.r2 >= 0 && (p - b.c).squaredNorm() <= b.r2 * (1 + 1e-12) + 1e-24;
}

BallFit welzl(const std::vector<Eigen::VectorXd>& P, std::size_t n, std::vector<Eigen::VectorXd>& R,
              std::size_t k) {
  if (n == 0 || R.size() == k + 1) return ball_from(R);
  const Eigen::VectorXd& p = P[n - 1];
  BallFit b = welzl(P, n - 1, R, k);
  if (inside(b, p)) return b;
  R.push_back(p);
  b = welzl(P, n - 1, R, k);
  R.pop_back();
  return b;
}

double meb_radius(std::vector<Eigen::VectorXd> pts) {
  if (pts.empty()) return 0;
  // deterministic shuffle keeps the expected cost linear
  std::uint64_t s = 0x9e3779b97f4a7c15ULL ^ pts.size();
  for (std::size_t i = pts.size(); i > 1; --i) {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    std::swap(pts[i - 1], pts[(s >> 33) % i]);
  }
  std::vector<Eigen::VectorXd> R;
  const BallFit b = welzl(pts, pts.size(), R, static_cast<std::size_t>(pts[0].size()));
  return std::sqrt(std::max(0.0, b.r2));
}

// Per-block test that a set of normalized points fits in one translate.
struct Normalized {
  std::vector<std::size_t> sizes;
  std::vector<Eigen::VectorXd> z;  // all blocks stacked

  Normalized(const PointCloud& A, const ConvexBody& body) : sizes(body.block_sizes()) {
    const Eigen::MatrixXd N = body.normalizer();
    z.reserve(A.size());
    for (std::size_t i = 0; i < A.size(); ++i)
      z.push_back(N * Eigen::Map<const Eigen::VectorXd>(A.point(i), static_cast<Eigen::Index>(A.D)));
  }

  bool fits(const std::vector<std::size_t>& idx) const {
    Eigen::Index at = 0;
    for (std::size_t s : sizes) {
      std::vector<Eigen::VectorXd> pts;
      pts.reserve(idx.size());
      for (auto i : idx) pts.push_back(z[i].segment(at, static_cast<Eigen::Index>(s)));
      if (meb_radius(std::move(pts)) > 1.0 + 1e-9) return false;
      at += static_cast<Eigen::Index>(s);
    }
    return true;
  }

  // each block within 2: a necessary condition for sharing a translate
  bool near(std::size_t a, std::size_t b) const {
    Eigen::Index at = 0;
    for (std::size_t s : sizes) {
      if ((z[a].segment(at, static_cast<Eigen::Index>(s)) - z[b].segment(at, static_cast<Eigen::Index>(s))).norm() >
          2.0 + 1e-9)
        return false;
      at += static_cast<Eigen::Index>(s);
    }
    return true;
  }
};

// Hash grid over up to four coordinates of a point set.
class Grid {
 public:
  Grid(const std::vector<Eigen::VectorXd>& z, double cell, bool periodic = false,
       const std::vector<double>& cells_per_dim = {})
      : z_(z), cell_(cell), periodic_(periodic) {
    dims_ = z.empty() ? 0 : std::min<std::size_t>(4, static_cast<std::size_t>(z[0].size()));
    wrap_.assign(dims_, 0);
    if (periodic_) {
      for (std::size_t k = 0; k < dims_; ++k) {
        const long n = static_cast<long>(std::floor(cells_per_dim.empty() ? 1.0 / cell : cells_per_dim[k]));
        wrap_[k] = n >= 3 ? n : 0;
      }
    }
    for (std::size_t i = 0; i < z.size(); ++i) cells_[key(cell_of(z[i]))].push_back(i);
  }

  template <class F>
  void for_neighbors(const Eigen::VectorXd& p, F&& f) const {
    std::vector<long> c = cell_of(p), k(dims_);
    std::size_t total = 1;
    for (std::size_t i = 0; i < dims_; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t t = code;
      bool dup = false;
      for (std::size_t i = 0; i < dims_; ++i) {
        const long off = static_cast<long>(t % 3) - 1;
        t /= 3;
        if (periodic_ && wrap_[i] == 0 && off != 0) dup = true;
        k[i] = c[i] + off;
        if (periodic_ && wrap_[i] > 0) k[i] = ((k[i] % wrap_[i]) + wrap_[i]) % wrap_[i];
      }
      if (dup) continue;
      auto it = cells_.find(key(k));
      if (it == cells_.end()) continue;
      for (auto i : it->second) f(i);
    }
  }

 private:
  std::vector<long> cell_of(const Eigen::VectorXd& p) const {
    std::vector<long> c(dims_);
    for (std::size_t i = 0; i < dims_; ++i) {
      if (periodic_ && wrap_[i] == 0) {
        c[i] = 0;
        continue;
      }
      double v = p[static_cast<Eigen::Index>(i)];
      if (periodic_) v -= std::floor(v);
      c[i] = static_cast<long>(std::floor(v / cell_));
      if (periodic_ && wrap_[i] > 0) c[i] = std::min(c[i], wrap_[i] - 1);
    }
    return c;
  }
  static std::uint64_t key(const std::vector<long>& c) {
    std::uint64_t h = 1469598103934665603ULL;
    for (long v : c) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h *= 1099511628211ULL;
    }
    return h;
  }
  const std::vector<Eigen::VectorXd>& z_;
  double cell_;
  bool periodic_;
  std::size_t dims_ = 0;
  std::vector<long> wrap_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

}  // namespace

double min_enclosing_radius(const Eigen::MatrixXd& pts) {
  std::vector<Eigen::VectorXd> v;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) v.push_back(pts.col(i));
  return meb_radius(std::move(v));
}

std::size_t covering_number(const PointCloud& A, const ConvexBody& body) {
  const std::size_t n = A.size();
  if (n == 0) return 0;
  if (body.dim() != A.D) throw DimensionMismatch("covering_number: dimension");
  const Normalized nz(A, body);
  if (nz.z[0].size() == 1) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = nz.z[i][0];
    std::sort(v.begin(), v.end());
    std::size_t count = 0;
    for (std::size_t i = 0; i < n;) {
      const double start = v[i];
      ++count;
      while (i < n && v[i] <= start + 2.0 + 1e-9) ++i;
    }
    return count;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (Eigen::Index k = 0; k < nz.z[a].size(); ++k)
      if (nz.z[a][k] != nz.z[b][k]) return nz.z[a][k] < nz.z[b][k];
    return a < b;
  });
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[order[i]] = i;
  // within one translate every normalized coordinate differs by at most 2
  const Grid grid(nz.z, 2.0);
  std::vector<bool> covered(n, false);
  std::size_t count = 0;
  for (std::size_t seed : order) {
    if (covered[seed]) continue;
    ++count;
    covered[seed] = true;
    std::vector<std::size_t> cand;
    grid.for_neighbors(nz.z[seed], [&](std::size_t i) {
      if (!covered[i] && nz.near(seed, i)) cand.push_back(i);
    });
    std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
    std::vector<std::size_t> cluster{seed};
    for (auto c : cand) {
      cluster.push_back(c);
      if (nz.fits(cluster)) {
        covered[c] = true;
      } else {
        cluster.pop_back();
      }
    }
  }
  return count;
}

std::size_t covering_number(const PointCloud& A, double delta) {
  return covering_number(A, ConvexBody::ball(A.D, delta));
}

std::size_t covering_number_exact(const PointCloud& A, const ConvexBody& body) {
  const std::size_t n = A.size();
  if (n > 16) throw BudgetExceeded("covering_number_exact: at most 16 points");
  if (n == 0) return 0;
  const Normalized nz(A, body);
  const std::size_t full = (std::size_t{1} << n) - 1;
  std::vector<char> ok(full + 1, 0);
  ok[0] = 1;
  for (std::size_t S = 1; S <= full; ++S) {
    // coverable sets are closed under taking subsets
    const std::size_t low = S & (~S + 1);
    if (!ok[S ^ low]) continue;
    bool sub_ok = true;
    for (std::size_t T = S; T && sub_ok; T &= T - 1) sub_ok = ok[S ^ (T & (~T + 1))];
    if (!sub_ok) continue;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (S >> i & 1) idx.push_back(i);
    ok[S] = nz.fits(idx);
  }
  std::vector<unsigned char> f(full + 1, 255);
  f[0] = 0;
  for (std::size_t S = 1; S <= full; ++S) {
    const std::size_t low = S & (~S + 1);
    const std::size_t rest = S ^ low;
    // translates containing the lowest point
    for (std::size_t T = rest;; T = (T - 1) & rest) {
      const std::size_t U = T | low;
      if (ok[U] && f[S ^ U] + 1 < f[S]) f[S] = static_cast<unsigned char>(f[S ^ U] + 1);
      if (T == 0) break;
    }
  }
  return f[full];
}

SeparatedResult separated_subset(const PointCloud& A, const std::vector<double>& weights, const ConvexBody& body,
                                 bool periodic) {
  const std::size_t n = A.size();
  if (weights.size() != n) throw DimensionMismatch("separated_subset: one weight per point");
  SeparatedResult res;
  res.owner.assign(n, static_cast<std::size_t>(-1));
  if (n == 0) return res;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  const auto D = static_cast<Eigen::Index>(A.D);
  std::vector<Eigen::VectorXd> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = Eigen::Map<const Eigen::VectorXd>(A.point(i), D);
  const std::vector<double> h = body.extent();
  double cell = 0;
  for (std::size_t k = 0; k < std::min<std::size_t>(4, A.D); ++k) cell = std::max(cell, h[k]);
  std::vector<Eigen::VectorXd> accepted_pts;
  std::vector<std::size_t> accepted_idx;
  auto diff = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd v = a - b;
    if (periodic)
      for (Eigen::Index k = 0; k < D; ++k) v[k] -= std::round(v[k]);
    return v;
  };
  const bool use_grid = std::isfinite(cell) && cell > 0 && (!periodic || cell < 0.25);
  if (!use_grid) {
    for (auto i : order) {
      std::size_t own = static_cast<std::size_t>(-1);
      for (std::size_t s = 0; s < accepted_idx.size() && own == static_cast<std::size_t>(-1); ++s)
        if (body.contains(diff(pts[i], accepted_pts[s]))) own = accepted_idx[s];
      if (own == static_cast<std::size_t>(-1)) {
        accepted_pts.push_back(pts[i]);
        accepted_idx.push_back(i);
        res.selected.push_back(i);
        own = i;
      }
      res.owner[i] = own;
    }
    return res;
  }
  // incremental grid over accepted points
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells;
  const std::size_t gd = std::min<std::size_t>(4, A.D);
  const long wrap = periodic ? static_cast<long>(std::floor(1.0 / cell)) : 0;
  auto cell_of = [&](const Eigen::VectorXd& p) {
    std::vector<long> c(gd);
    for (std::size_t k = 0; k < gd; ++k) {
      double v = p[static_cast<Eigen::Index>(k)];
      if (periodic) v -= std::floor(v);
      c[k] = static_cast<long>(std::floor(v / cell));
      if (periodic) c[k] = std::min(c[k], wrap - 1);
    }
    return c;
  };
  auto key = [](const std::vector<long>& c) {
    std::uint64_t hsh = 1469598103934665603ULL;
    for (long v : c) {
      hsh ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (hsh << 6) + (hsh >> 2);
      hsh *= 1099511628211ULL;
    }
    return hsh;
  };
  std::size_t total = 1;
  for (std::size_t k = 0; k < gd; ++k) total *= 3;
  for (auto i : order) {
    const std::vector<long> c = cell_of(pts[i]);
    std::vector<long> k(gd);
    std::size_t own = static_cast<std::size_t>(-1);
    for (std::size_t code = 0; code < total && own == static_cast<std::size_t>(-1); ++code) {
      std::size_t t = code;
      for (std::size_t j = 0; j < gd; ++j) {
        k[j] = c[j] + static_cast<long>(t % 3) - 1;
        t /= 3;
        if (periodic) k[j] = ((k[j] % wrap) + wrap) % wrap;
      }
      auto it = cells.find(key(k));
      if (it == cells.end()) continue;
      for (auto s : it->second) {
        if (body.contains(diff(pts[i], pts[s]))) {
          own = s;
          break;
        }
      }
    }
    if (own == static_cast<std::size_t>(-1)) {
      cells[key(c)].push_back(i);
      res.selected.push_back(i);
      own = i;
    }
    res.owner[i] = own;
  }
  return res;
}

}  // namespace eqlab
