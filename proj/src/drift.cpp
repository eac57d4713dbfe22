#include "eqlab/drift.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "eqlab/diagnostics.hpp"
#include "eqlab/errors.hpp"

namespace eqlab {

double DriftConfig::effective_cap() const { return cap > 0 ? cap : std::pow(1e-12, -alpha); }

void DriftConfig::validate() const {
  if (!(alpha > 0)) throw ConfigError("alpha", "must be positive");
  if (!(lambda > 0) || !(lambda < 1)) throw ConfigError("lambda", "must lie in (0, 1)");
  if (Q < 1) throw ConfigError("Q", "must be at least 1");
  if (!std::isfinite(effective_cap()) || effective_cap() <= 0) throw ConfigError("cap", "must be finite and positive");
}

double phi_from_distance(const DriftConfig& cfg, double distance) {
  const double cap = cfg.effective_cap();
  if (distance <= 0) return cap;
  if (std::isinf(distance)) return 0;
  return std::min(cap, std::pow(distance, -cfg.alpha));
}

PhiValue phi_Q(const DriftConfig& cfg, const QuasiNorm& qn, const TorusPoint& y, const Eigen::MatrixXd& quotient) {
  PhiValue out;
  out.distance = dist_to_ZQ(qn, y, cfg.Q, quotient).value;
  out.value = phi_from_distance(cfg, out.distance);
  out.capped = out.value >= cfg.effective_cap();
  if (out.capped) note(Warning::phi_capped);
  return out;
}

std::vector<TorusPoint> drift_grid(std::size_t d, std::size_t count, long denominator) {
  if (d == 0 || denominator < 1) throw ConfigError("grid", "needs d >= 1 and a positive denominator");
  // phi_d: the positive root of x^{d+1} = x + 1
  double g = 2;
  for (int it = 0; it < 64; ++it) g = std::pow(1 + g, 1.0 / static_cast<double>(d + 1));
  std::vector<double> theta(d);
  for (std::size_t k = 0; k < d; ++k) theta[k] = std::pow(1 / g, static_cast<double>(k + 1));
  std::vector<TorusPoint> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<Rational> c(d);
    for (std::size_t k = 0; k < d; ++k) {
      const double v = std::fmod(0.5 + theta[k] * static_cast<double>(i + 1), 1.0);
      long num = std::lround(v * static_cast<double>(denominator)) % denominator;
      c[k] = Rational(num, denominator);
      c[k].canonicalize();
    }
    out.push_back(TorusPoint::exact(c));
  }
  return out;
}

double median_of_means(const std::vector<double>& x, std::size_t blocks, double* ci) {
  if (x.empty()) throw std::invalid_argument("median_of_means: empty sample");
  blocks = std::clamp<std::size_t>(blocks, 1, x.size());
  std::vector<double> means(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * x.size() / blocks, hi = (b + 1) * x.size() / blocks;
    double s = 0;
    for (std::size_t i = lo; i < hi; ++i) s += x[i];
    means[b] = s / static_cast<double>(hi - lo);
  }
  std::vector<double> sorted = means;
  std::sort(sorted.begin(), sorted.end());
  const double med = blocks % 2 ? sorted[blocks / 2] : 0.5 * (sorted[blocks / 2 - 1] + sorted[blocks / 2]);
  if (ci) {
    double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(blocks), v = 0;
    for (double b : means) v += (b - m) * (b - m);
    const double sd = blocks > 1 ? std::sqrt(v / static_cast<double>(blocks - 1)) : 0;
    *ci = 2 * sd / std::sqrt(static_cast<double>(blocks));
  }
  return med;
}

namespace {

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// phi(g y) for every word and every y; out[y][i].
std::vector<std::vector<double>> phi_images(const GeneratorSystem& sys, const QuasiNorm& qn, const DriftConfig& cfg,
                                            const std::vector<TorusPoint>& ys, unsigned n, std::size_t N,
                                            std::uint64_t seed, std::vector<std::vector<char>>& capped) {
  SampleOptions so;
  so.keep_products = true;
  const WalkEnsemble words = sample_paths(sys, StartPoint::from_rationals(std::vector<Rational>(sys.dim())), n, N,
                                          seed, so);
  std::vector<std::vector<double>> out(ys.size(), std::vector<double>(N));
  capped.assign(ys.size(), std::vector<char>(N, 0));
  const auto lN = static_cast<long>(N);
  const double cap = cfg.effective_cap();
  for (std::size_t j = 0; j < ys.size(); ++j) {
#pragma omp parallel for schedule(dynamic, 64)
    for (long i = 0; i < lN; ++i) {
      const TorusPoint gy = act_on_torus(*words.atoms[static_cast<std::size_t>(i)].product, ys[j]);
      const double v = phi_from_distance(cfg, dist_to_ZQ(qn, gy, cfg.Q).value);
      out[j][static_cast<std::size_t>(i)] = v;
      capped[j][static_cast<std::size_t>(i)] = v >= cap;
    }
    note(Warning::phi_capped, static_cast<std::uint64_t>(std::count(capped[j].begin(), capped[j].end(), 1)));
  }
  return out;
}

}  // namespace

MargulisTable margulis_check(const GeneratorSystem& sys, const QuasiNorm& qn, const DriftConfig& cfg,
                             const std::vector<TorusPoint>& ys, unsigned n, std::size_t N, std::uint64_t seed,
                             const MargulisOptions& opt) {
  cfg.validate();
  if (N == 0) throw ConfigError("N", "must be positive");
  if (qn.dim() != sys.dim()) throw DimensionMismatch("margulis_check: quasi-norm dimension");
  MargulisTable tab;
  tab.cfg = cfg;
  tab.n = n;
  tab.N = N;
  tab.seed = seed;
  tab.decay = std::exp(-cfg.lambda * cfg.alpha * static_cast<double>(n));
  std::vector<std::vector<char>> capped, capped_h;
  const auto fit = phi_images(sys, qn, cfg, ys, n, N, seed, capped);
  std::vector<std::vector<double>> hold;
  if (opt.holdout) hold = phi_images(sys, qn, cfg, ys, n, N, seed ^ 0x9E3779B97F4A7C15ULL, capped_h);
  double residual = 0;
  for (std::size_t j = 0; j < ys.size(); ++j) {
    MargulisRow row;
    row.y = ys[j].to_double();
    const PhiValue py = phi_Q(cfg, qn, ys[j]);
    row.phi_y = py.value;
    row.y_capped = py.capped;
    row.estimate = median_of_means(fit[j], opt.blocks, &row.ci);
    if (opt.holdout) row.holdout = median_of_means(hold[j], opt.blocks, &row.holdout_ci);
    row.q50 = quantile(fit[j], 0.5);
    row.q90 = quantile(fit[j], 0.9);
    row.q99 = quantile(fit[j], 0.99);
    row.max = *std::max_element(fit[j].begin(), fit[j].end());
    row.capped_fraction = static_cast<double>(std::count(capped[j].begin(), capped[j].end(), 1)) /
                          static_cast<double>(N);
    residual = std::max(residual, row.estimate - tab.decay * row.phi_y);
    tab.rows.push_back(std::move(row));
  }
  const double logQ = std::log(static_cast<double>(cfg.Q));
  if (residual <= 1 || cfg.Q == 1)
    tab.C = residual <= 1 ? 0 : kInf;
  else
    tab.C = std::log(residual) / logQ;
  tab.C_finite = std::isfinite(tab.C);
  tab.all_hold = tab.all_hold_holdout = true;
  const double QC = tab.C_finite ? std::pow(static_cast<double>(cfg.Q), tab.C) : kInf;
  for (auto& row : tab.rows) {
    row.rhs = tab.decay * row.phi_y + QC;
    // the fit makes this an identity up to the last rounding
    row.holds = row.estimate <= row.rhs * (1 + 1e-12);
    row.holds_holdout = !opt.holdout || row.holdout - row.holdout_ci <= row.rhs * (1 + 1e-12);
    tab.all_hold = tab.all_hold && row.holds;
    tab.all_hold_holdout = tab.all_hold_holdout && row.holds_holdout;
  }
  return tab;
}

// ---------------------------------------------------------------- bootstrap

namespace {

std::vector<double> centered(const double* a, const double* b, std::size_t d) {
  std::vector<double> z(d);
  for (std::size_t k = 0; k < d; ++k) {
    double v = a[k] - b[k];
    v -= std::nearbyint(v);
    z[k] = v;
  }
  return z;
}

// Index of the point of X whose body contains y, or -1; the first in order.
long locate(const PointCloud& X, const ConvexBody& body, const double* y) {
  for (std::size_t i = 0; i < X.size(); ++i) {
    const std::vector<double> z = centered(y, X.point(i), X.D);
    if (body.contains(z.data())) return static_cast<long>(i);
  }
  return -1;
}

Eigen::MatrixXd random_word(const GeneratorSystem& sys, const GeneratorSampler& pick, unsigned m, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(sys.dim());
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(d, d);
  for (unsigned s = 0; s < m; ++s) g = sys.generators[pick(rng)].to_double() * g;
  return g;
}

}  // namespace

BootstrapResult bootstrap_step(const GeneratorSystem& sys, const QuasiNorm& qn, const WalkEnsemble& nu,
                               const PointCloud& X, const Eigen::MatrixXd& W, double r, double rho, unsigned m,
                               double eps, std::uint64_t seed, const BootstrapOptions& opt) {
  const std::size_t d = sys.dim();
  if (X.D != d || nu.dim() != d) throw DimensionMismatch("bootstrap_step: dimensions");
  if (!(rho > 0) || !(r > 0)) throw ConfigError("rho", "radii must be positive");
  if (!(std::exp(static_cast<double>((d + 1) * m)) * rho < r))
    throw ConfigError("rho", "scale gap e^{(d+1)m} rho < r violated");
  BootstrapResult res;
  res.m = m;
  res.r1 = std::exp(-static_cast<double>(m) * (1 + eps)) * r;
  res.rho1 = std::exp(-static_cast<double>(m) * (1 - eps)) * rho;
  const PointCloud cloud = torus_cloud(nu);
  const std::vector<double> w = ensemble_weights(nu);
  const std::size_t na = cloud.size();
  const ConvexBody body = qn.neighborhood(W, rho);
  if (m == 0) {
    res.X1 = X;
    res.found = true;
    res.pushed = captured_mass(cloud, w, X, body);
    res.intersection = res.pushed;
    res.target = std::pow(res.pushed, static_cast<double>(d)) - 1;
    res.captured = captured_mass(cloud, w, X, qn.neighborhood(W, res.rho1));
    res.groups = X.size();
    res.separated = true;
    return res;
  }
  // hits[p][j]: the point of X containing g_p x_j
  const std::size_t P = std::max<std::size_t>(1, std::min(opt.pool, opt.tuples * d));
  std::vector<Eigen::MatrixXd> pool(P);
  {
    const GeneratorSampler pick(sys.weights);
    for (std::size_t p = 0; p < P; ++p) {
      Rng rng(seed, p, 6);
      pool[p] = random_word(sys, pick, m, rng);
    }
  }
  std::vector<std::vector<long>> hits(P, std::vector<long>(na));
  std::vector<double> pushed(P);
  const auto lP = static_cast<long>(P);
#pragma omp parallel for schedule(dynamic)
  for (long p = 0; p < lP; ++p) {
    std::vector<double> gx(d);
    double s = 0;
    for (std::size_t j = 0; j < na; ++j) {
      const double* x = cloud.point(j);
      for (std::size_t a = 0; a < d; ++a) {
        double v = 0;
        for (std::size_t b = 0; b < d; ++b)
          v += pool[static_cast<std::size_t>(p)](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * x[b];
        gx[a] = v - std::floor(v);
      }
      const long h = locate(X, body, gx.data());
      hits[static_cast<std::size_t>(p)][j] = h;
      if (h >= 0) s += w[j];
    }
    pushed[static_cast<std::size_t>(p)] = s;
  }
  res.pushed = std::accumulate(pushed.begin(), pushed.end(), 0.0) / static_cast<double>(P);
  res.target = std::pow(res.pushed, static_cast<double>(d)) - std::exp(-opt.c * static_cast<double>(m));
  // tuples of pool indices
  std::vector<std::size_t> best_tuple;
  double best = -1;
  for (std::size_t t = 0; t < opt.tuples; ++t) {
    Rng rng(seed, t, 7);
    std::vector<std::size_t> tup(d);
    for (auto& v : tup) v = rng.below(P);
    double s = 0;
    for (std::size_t j = 0; j < na; ++j) {
      bool all = true;
      for (auto p : tup)
        if (hits[p][j] < 0) {
          all = false;
          break;
        }
      if (all) s += w[j];
    }
    ++res.tuples_tried;
    if (s >= res.target && s > best) {
      best = s;
      best_tuple = tup;
    }
  }
  if (best_tuple.empty()) return res;
  res.found = true;
  res.intersection = best;
  // one cell per nonempty intersection g_1^-1 B(x_1) n ... n g_d^-1 B(x_d)
  std::map<std::vector<long>, std::pair<double, std::size_t>> cells;  // mass, heaviest atom
  for (std::size_t j = 0; j < na; ++j) {
    std::vector<long> key(d);
    bool all = true;
    for (std::size_t i = 0; i < d && all; ++i) {
      key[i] = hits[best_tuple[i]][j];
      all = key[i] >= 0;
    }
    if (!all) continue;
    auto [it, fresh] = cells.try_emplace(key, 0.0, j);
    it->second.first += w[j];
    if (!fresh && w[j] > w[it->second.second]) it->second.second = j;
  }
  res.groups = cells.size();
  std::vector<std::pair<double, std::size_t>> order;
  for (const auto& [k, v] : cells) order.push_back(v);
  std::stable_sort(order.begin(), order.end(), [](auto a, auto b) { return a.first > b.first; });
  const ConvexBody sep = qn.neighborhood(W, res.r1);
  res.X1.D = d;
  for (const auto& [mass, j] : order) {
    if (res.X1.size() >= X.size()) break;
    if (locate(res.X1, sep, cloud.point(j)) >= 0) continue;
    res.X1.push(cloud.point(j));
    res.masses.push_back(mass);
  }
  res.trimmed = res.groups - res.X1.size();
  res.separated = true;
  for (std::size_t a = 0; a < res.X1.size(); ++a)
    for (std::size_t b = a + 1; b < res.X1.size(); ++b)
      if (sep.contains(centered(res.X1.point(a), res.X1.point(b), d).data())) res.separated = false;
  res.captured = captured_mass(cloud, w, res.X1, qn.neighborhood(W, res.rho1));
  return res;
}

// ---------------------------------------------------------------- snap

DiophantineSnap diophantine_snap(const QuasiNorm& qn, const TorusPoint& y, double rho, double beta, long Q_max,
                                 const Eigen::MatrixXd& quotient) {
  if (!(rho > 0) || !(rho < 1)) throw ConfigError("rho", "must lie in (0, 1)");
  if (!(beta > 0)) throw ConfigError("beta", "must be positive");
  DiophantineSnap out;
  out.threshold = std::pow(rho, 1 - beta);
  const double lim = std::floor(std::pow(rho, -beta) * (1 + 1e-12));
  out.Q_limit = std::max<long>(1, std::min<long>(Q_max, lim >= 9e18 ? Q_max : static_cast<long>(lim)));
  // strict improvement only, so ties keep the smaller q
  const ZQDistance best = dist_to_ZQ(qn, y, out.Q_limit, quotient);
  out.Q = best.q;
  out.distance = best.value;
  out.witness = best.p;
  out.pass = out.distance <= out.threshold;
  return out;
}

// ---------------------------------------------------------------- end to end

E2ERecord theorem_e2e(const GeneratorSystem& sys, const AlgebraDecomposition& E, const QuasiNorm& qn,
                      const StartPoint& x0, const Frequency& a0, double t, unsigned n, double lambda,
                      const E2EOptions& opt) {
  if (!(lambda > 0) || !(lambda < 1)) throw ConfigError("lambda", "must lie in (0, 1)");
  if (a0.size() != sys.dim()) throw DimensionMismatch("theorem_e2e: frequency dimension");
  E2ERecord rec;
  rec.a0 = a0;
  rec.t = t;
  rec.lambda = lambda;
  rec.n = n;
  rec.C_max = opt.C_max;
  rec.bound = std::exp(-lambda * static_cast<double>(n));
  double a_norm = 0;
  for (long v : a0) a_norm += static_cast<double>(v) * static_cast<double>(v);
  a_norm = std::sqrt(a_norm);
  if (!(t > 0)) throw ConfigError("t", "must be positive");
  if (a_norm == 0) throw ConfigError("a0", "must be nonzero");
  const double level = std::log(a_norm / t);
  if (t <= 1 && static_cast<double>(n) < opt.n_factor * level)
    throw ConfigError("n", "below n_factor log(|a0| / t)");
  const unsigned bits = 192;
  const TorusPoint xp = x0.point(bits);
  rec.x0 = xp.to_string();

  // hypothesis and granulation
  const WalkGranulation wg = walk_granulate(sys, E, qn, x0, a0, t, n, opt.granulate);
  rec.coefficient = wg.coefficient;
  rec.hypothesis = true;
  rec.sheet = wg.sheet;
  rec.granules = wg.report.X.size();
  rec.granulated_mass = wg.report.captured;
  rec.n0 = wg.n_back;

  // bootstrap sweeps
  const std::size_t d = sys.dim();
  PointCloud X = wg.report.X;
  std::vector<double> masses = wg.report.masses;
  double r = wg.r_sep, rho = wg.r_nb;
  unsigned m = static_cast<unsigned>(std::floor(opt.granulate.tau * wg.n_back / (2.0 * static_cast<double>(d))));
  unsigned time = n - wg.n_back;
  for (unsigned k = 0; k < opt.sweeps && m > 0 && m <= time && X.size() > 0; ++k) {
    time -= m;
    const WalkEnsemble nu =
        walk_law(sys, x0, time, opt.granulate.exact_budget, opt.granulate.samples, opt.seed + k);
    const BootstrapResult b = bootstrap_step(sys, qn, nu, X, wg.W, r, rho, m, opt.eps, opt.seed + 100 + k,
                                             opt.bootstrap);
    E2ESweep sw{m, time, b.r1, b.rho1, b.captured, b.X1.size(), b.found};
    rec.sweeps.push_back(sw);
    if (!b.found || b.X1.size() == 0) {
      time += m;
      break;
    }
    X = b.X1;
    masses = b.masses;
    r = b.r1;
    rho = b.rho1;
    m = static_cast<unsigned>(std::floor(m * (1 - opt.eps / static_cast<double>(d))));
  }
  rec.n1 = n - time;

  // the heaviest concentration point, snapped
  if (X.size() == 0) return rec;
  const std::size_t best = static_cast<std::size_t>(
      std::max_element(masses.begin(), masses.end()) - masses.begin());
  rec.y.assign(X.point(best), X.point(best) + d);
  std::vector<Rational> yc(d);
  for (std::size_t k = 0; k < d; ++k) yc[k] = Rational(rec.y[k]);
  const TorusPoint y = TorusPoint::exact(yc);
  // the passing snap of least distance; earlier betas win ties
  for (double beta : opt.betas) {
    DiophantineSnap s = diophantine_snap(qn, y, rho, beta, opt.Q_max, wg.W);
    if ((s.pass && !rec.snap.pass) || (s.pass == rec.snap.pass && s.distance < rec.snap.distance) ||
        rec.snap.Q == 0) {
      rec.beta = beta;
      rec.snap = std::move(s);
    }
  }
  if (!rec.snap.pass) return rec;
  rec.Q = rec.snap.Q;
  rec.distance = dist_to_ZQ(qn, xp, rec.Q, wg.W).value;
  rec.C_fit = rec.Q <= 1 ? 0 : std::log(static_cast<double>(rec.Q)) / level;
  rec.distance_ok = rec.distance <= rec.bound;
  rec.Q_ok = static_cast<double>(rec.Q) <= std::pow(a_norm / t, opt.C_max) * (1 + 1e-12);
  rec.pass = rec.hypothesis && rec.distance_ok && rec.Q_ok;
  return rec;
}

}  // namespace eqlab
