#include "eqlab/report.hpp"

#include <cmath>

#include "eqlab/io.hpp"

namespace eqlab {

Json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

Json nums(const std::vector<double>& x) {
  Json a = Json::array();
  for (double v : x) a.push_back(num(v));
  return a;
}

namespace {

Json matrix(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
    a.push_back(row);
  }
  return a;
}

Json int_matrix(const IntMatrix& g) {
  Json a = Json::array();
  for (std::size_t r = 0; r < g.dim(); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < g.dim(); ++c) {
      const BigInt& z = g(r, c);
      if (z.fits_slong_p()) row.push_back(z.get_si());
      else row.push_back(to_string(z));
    }
    a.push_back(row);
  }
  return a;
}

Json cloud(const PointCloud& X) {
  Json a = Json::array();
  for (std::size_t i = 0; i < X.size(); ++i) {
    Json p = Json::array();
    for (std::size_t k = 0; k < X.D; ++k) p.push_back(num(X.point(i)[k]));
    a.push_back(p);
  }
  return a;
}

Json body(const ConvexBody& b) {
  Json blocks = Json::array();
  for (const auto& bl : b.blocks()) blocks.push_back({{"L", matrix(bl.L)}, {"radius", num(bl.radius)}});
  Json out{{"dim", b.dim()}, {"blocks", blocks}};
  if (b.has_free_directions()) out["free_basis"] = matrix(b.free_basis());
  return out;
}

Json bools(const std::vector<bool>& v) {
  Json a = Json::array();
  for (bool b : v) a.push_back(b);
  return a;
}

Json bigs(const std::vector<BigInt>& v) {
  Json a = Json::array();
  for (const auto& z : v) a.push_back(to_string(z));
  return a;
}

std::string decimal_row(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_decimal(v[i]);
  return s;
}

}  // namespace

Json to_json(const AlgebraDecomposition& dec) {
  Json out{{"d", dec.d}, {"dim", dec.dim()}, {"center_dim", dec.center_basis.size()}};
  out["factor_dims"] = dec.factor_dims;
  const auto& r = dec.residuals;
  out["residuals"] = {{"idempotent", num(r.idempotent)},   {"orthogonality", num(r.orthogonality)},
                      {"unit", num(r.unit)},               {"commutation", num(r.commutation)},
                      {"cluster_gap", num(r.cluster_gap)}, {"attempts", r.attempts},
                      {"rational", r.rational}};
  Json ids = Json::array();
  if (dec.rational_idempotents) {
    for (const auto& v : *dec.rational_idempotents) {
      Json e = Json::array();
      for (const auto& q : v) e.push_back(to_string(q));
      ids.push_back(e);
    }
  } else {
    for (const auto& e : dec.idempotents) {
      Json m = Json::array();
      const Eigen::VectorXd v = vec(e);
      for (Eigen::Index i = 0; i < v.size(); ++i) m.push_back(format_decimal(v[i]));
      ids.push_back(m);
    }
  }
  out["idempotents"] = ids;  // vectorized row-major
  return out;
}

Json to_json(const LyapunovProfile& p) {
  return {{"exponents", nums(p.exponents)}, {"ci_radius", nums(p.ci_radius)}, {"stddev", nums(p.stddev)},
          {"top", num(p.top)},              {"top_ci", num(p.top_ci)},        {"samples", p.samples},
          {"word_length", p.word_length},   {"burn_in", p.burn_in}};
}

Json to_json(const ModuleDecomposition& md) {
  Json blocks = Json::array();
  for (const auto& b : md.blocks)
    blocks.push_back({{"dim", b.basis.cols()},
                      {"factors", b.factors},
                      {"exponent", num(b.exponent)},
                      {"ci_radius", num(b.ci_radius)},
                      {"compact", b.compact}});
  return {{"d", md.d}, {"blocks", blocks}, {"max_word_norm_ratio", nums(md.max_word_norm_ratio)}};
}

Json to_json(const ReturnTimeStats& s) {
  return {{"m", s.m},
          {"group_order", s.group_order},
          {"paths", s.first_return.size()},
          {"mean", num(s.mean)},
          {"stddev", num(s.stddev)},
          {"ci_radius", num(s.ci_radius)},
          {"renewal_mean", num(s.renewal_mean)},
          {"renewal_ci", num(s.renewal_ci)},
          {"label_frequency", nums(s.label_frequency)}};
}

Json to_json(const DeviationTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"n", r.n}, {"probability", num(r.probability)}, {"stderr", num(r.stderr_)}});
  return {{"omega", num(t.omega)}, {"lambda", num(t.lambda)}, {"rows", rows},
          {"slope", num(t.slope)}, {"monotone", t.monotone},  {"fitted_points", t.fitted_points}};
}

Json to_json(const DecayFit& f) {
  return {{"rate", num(f.rate)}, {"intercept", num(f.intercept)}, {"r2", num(f.r2)},
          {"used", f.used},      {"truncated_at", f.truncated_at}};
}

Json to_json(const FourierReport& r) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < r.frequencies.size(); ++i) {
    const auto& c = r.coefficients[i];
    rows.push_back({{"a", r.frequencies[i]},
                    {"re", num(c.value.real())},
                    {"im", num(c.value.imag())},
                    {"abs", num(std::abs(c.value))},
                    {"stderr", num(c.stderr_)},
                    {"error_bound", num(c.error_bound)}});
  }
  Json out{{"n", r.n},
           {"mode", r.mode == EnsembleMode::exact ? "exact" : "montecarlo"},
           {"samples", r.samples},
           {"coefficients", rows}};
  if (!r.frequencies.empty()) {
    out["max_abs"] = num(r.max_abs());
    const std::size_t k = r.argmax();
    if (k < r.frequencies.size()) out["argmax"] = r.frequencies[k];
  }
  return out;
}

Json to_json(const GranulationReport& r) {
  return {{"X", cloud(r.X)},
          {"atom_index", r.atom_index},
          {"masses", nums(r.masses)},
          {"granules", r.X.size()},
          {"captured", num(r.captured)},
          {"volume_heuristic", num(r.volume_heuristic)},
          {"granular", r.granular},
          {"separated", r.separated},
          {"candidates", r.candidates},
          {"Bstar", body(r.Bstar)},
          {"Cstar", body(r.Cstar)}};
}

Json to_json(const WalkGranulation& g) {
  return {{"report", to_json(g.report)},
          {"sheet", g.sheet},
          {"coefficient", num(g.coefficient)},
          {"r_sep", num(g.r_sep)},
          {"r_nb", num(g.r_nb)},
          {"n_back", g.n_back},
          {"W", matrix(g.W)},
          {"sheet_captured", nums(g.sheet_captured)},
          {"exact", g.exact}};
}

Json to_json(const AddStructResult& r) {
  return {{"hypothesis", r.hypothesis}, {"coefficient", num(r.coefficient)}, {"threshold", num(r.threshold)},
          {"mass", num(r.mass)},        {"support", r.support},              {"set_size", r.set_size},
          {"holds", r.holds}};
}

Json to_json(const NCAuditReport& r) {
  return {{"eps", num(r.eps)},
          {"tau", num(r.tau)},
          {"delta", num(r.delta)},
          {"kappas", nums(r.kappas)},
          {"ball_radius", num(r.ball_radius)},
          {"outside_mass", num(r.outside_mass)},
          {"support_pass", r.support_pass},
          {"det_available", r.det_available},
          {"det_threshold", num(r.det_threshold)},
          {"small_det_mass", num(r.small_det_mass)},
          {"small_det_center", r.small_det_center},
          {"small_det_at_zero", num(r.small_det_at_zero)},
          {"small_det_pass", r.small_det_pass},
          {"rhos", nums(r.rhos)},
          {"affine_mass", nums(r.affine_mass)},
          {"affine_pass", bools(r.affine_pass)},
          {"kappa_hat", num(r.kappa_hat)},
          {"r2", num(r.r2)},
          {"normals", r.normals},
          {"decomposition_mass", num(r.decomposition_mass)},
          {"nc_pass", bools(r.nc_pass)}};
}

Json to_json(const GrowthReport& r) {
  return {{"delta", num(r.delta)},          {"N_A", r.N_A},
          {"N_AA", r.N_AA},                 {"N_AfA", r.N_AfA},
          {"N_AfA_best", r.N_AfA_best},     {"best_f", r.best_f},
          {"energy", nums(r.energy)},       {"ratio_AA", num(r.ratio_AA)},
          {"ratio_AfA", num(r.ratio_AfA)},  {"growth_exponent", num(r.growth_exponent)}};
}

Json to_json(const GenerationProbe& p) {
  return {{"coverage", num(p.coverage)},
          {"elements", p.elements},
          {"grid_points", p.grid_points},
          {"covered", p.covered}};
}

Json to_json(const FlattenTrajectory& t) {
  Json steps = Json::array();
  for (const auto& s : t.steps)
    steps.push_back(
        {{"norm", num(s.norm)}, {"mass", num(s.mass)}, {"ess_removed", num(s.ess_removed)}, {"atoms", s.atoms}});
  return {{"steps", steps},
          {"ratios", nums(t.ratios)},
          {"decreased", bools(t.decreased)},
          {"exponent", nums(t.exponent)},
          {"fitted_exponent", num(t.fitted_exponent)},
          {"floor_reached", t.floor_reached},
          {"audit", to_json(t.audit)}};
}

Json to_json(const PowerInequality& p) {
  return {{"slack", num(p.slack)}, {"worst", p.worst}, {"lhs", nums(p.lhs)}, {"rhs", nums(p.rhs)}};
}

Json to_json(const FourierDecayTable& t) {
  Json mags = Json::array();
  for (const auto& m : t.magnitudes) mags.push_back(nums(m));
  return {{"s", t.s},
          {"max_abs", nums(t.max_abs)},
          {"magnitudes", mags},
          {"trend", num(t.trend)},
          {"nonincreasing", t.nonincreasing}};
}

Json to_json(const MargulisTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"y", nums(r.y)},
                    {"phi_y", num(r.phi_y)},
                    {"y_capped", r.y_capped},
                    {"estimate", num(r.estimate)},
                    {"ci", num(r.ci)},
                    {"holdout", num(r.holdout)},
                    {"holdout_ci", num(r.holdout_ci)},
                    {"q50", num(r.q50)},
                    {"q90", num(r.q90)},
                    {"q99", num(r.q99)},
                    {"max", num(r.max)},
                    {"capped_fraction", num(r.capped_fraction)},
                    {"rhs", num(r.rhs)},
                    {"holds", r.holds},
                    {"holds_holdout", r.holds_holdout}});
  return {{"alpha", num(t.cfg.alpha)},
          {"lambda", num(t.cfg.lambda)},
          {"Q", t.cfg.Q},
          {"cap", num(t.cfg.effective_cap())},
          {"n", t.n},
          {"N", t.N},
          {"seed", t.seed},
          {"decay", num(t.decay)},
          {"rows", rows},
          {"C", num(t.C)},
          {"C_finite", t.C_finite},
          {"all_hold", t.all_hold},
          {"all_hold_holdout", t.all_hold_holdout}};
}

Json to_json(const BootstrapResult& b) {
  return {{"X1", cloud(b.X1)},
          {"masses", nums(b.masses)},
          {"r1", num(b.r1)},
          {"rho1", num(b.rho1)},
          {"captured", num(b.captured)},
          {"pushed", num(b.pushed)},
          {"intersection", num(b.intersection)},
          {"target", num(b.target)},
          {"found", b.found},
          {"tuples_tried", b.tuples_tried},
          {"groups", b.groups},
          {"trimmed", b.trimmed},
          {"separated", b.separated},
          {"m", b.m}};
}

Json to_json(const DiophantineSnap& s) {
  return {{"Q", s.Q},
          {"distance", num(s.distance)},
          {"threshold", num(s.threshold)},
          {"Q_limit", s.Q_limit},
          {"witness", bigs(s.witness)},
          {"pass", s.pass}};
}

Json to_json(const E2ERecord& r) {
  Json sweeps = Json::array();
  for (const auto& s : r.sweeps)
    sweeps.push_back({{"m", s.m},
                      {"time", s.time},
                      {"r", num(s.r)},
                      {"rho", num(s.rho)},
                      {"captured", num(s.captured)},
                      {"size", s.size},
                      {"found", s.found}});
  return {{"x0", r.x0},
          {"a0", r.a0},
          {"t", num(r.t)},
          {"lambda", num(r.lambda)},
          {"n", r.n},
          {"n0", r.n0},
          {"n1", r.n1},
          {"coefficient", num(r.coefficient)},
          {"hypothesis", r.hypothesis},
          {"sheet", r.sheet},
          {"granules", r.granules},
          {"granulated_mass", num(r.granulated_mass)},
          {"sweeps", sweeps},
          {"y", nums(r.y)},
          {"beta", num(r.beta)},
          {"snap", to_json(r.snap)},
          {"Q", r.Q},
          {"distance", num(r.distance)},
          {"bound", num(r.bound)},
          {"C_fit", num(r.C_fit)},
          {"C_max", num(r.C_max)},
          {"distance_ok", r.distance_ok},
          {"Q_ok", r.Q_ok},
          {"pass", r.pass}};
}

Json to_json(const GeneratorSystem& sys) {
  Json gens = Json::array();
  for (const auto& g : sys.generators) gens.push_back(int_matrix(g));
  Json w = Json::array();
  for (const auto& q : sys.weights) w.push_back(to_string(q));
  Json out{{"generators", gens}, {"weights", w}};
  if (sys.labels) {
    out["labels"] = *sys.labels;
    if (sys.group.is_cyclic_presentation()) out["group_order"] = sys.group.order();
    else out["group_table"] = sys.group.table();
  }
  return out;
}

std::string fourier_csv(const FourierReport& r) {
  const std::size_t d = r.frequencies.empty() ? 0 : r.frequencies.front().size();
  std::string out;
  for (std::size_t i = 0; i < d; ++i) out += "a" + std::to_string(i + 1) + ",";
  out += "re,im,abs,stderr\n";
  for (std::size_t i = 0; i < r.frequencies.size(); ++i) {
    for (long a : r.frequencies[i]) out += std::to_string(a) + ",";
    const auto& c = r.coefficients[i];
    out += decimal_row({c.value.real(), c.value.imag(), std::abs(c.value), c.stderr_}) + "\n";
  }
  return out;
}

std::string margulis_csv(const MargulisTable& t) {
  const std::size_t d = t.rows.empty() ? 0 : t.rows.front().y.size();
  std::string out;
  for (std::size_t i = 0; i < d; ++i) out += "y" + std::to_string(i + 1) + ",";
  out += "phi_y,estimate,ci,holdout,holdout_ci,q50,q90,q99,max,capped_fraction,rhs,holds\n";
  for (const auto& r : t.rows) {
    std::vector<double> v = r.y;
    v.insert(v.end(), {r.phi_y, r.estimate, r.ci, r.holdout, r.holdout_ci, r.q50, r.q90, r.q99, r.max,
                       r.capped_fraction, r.rhs});
    out += decimal_row(v) + "," + (r.holds ? "1" : "0") + "\n";
  }
  return out;
}

std::string e2e_csv(const E2ERecord& r) {
  std::string out = "x0,t,lambda,n,coefficient,granules,beta,Q,distance,bound,C_fit,pass\n";
  out += "\"" + r.x0 + "\"," + decimal_row({r.t, r.lambda}) + "," + std::to_string(r.n) + "," +
         decimal_row({r.coefficient}) + "," + std::to_string(r.granules) + "," + decimal_row({r.beta}) + "," +
         std::to_string(r.Q) + "," + decimal_row({r.distance, r.bound, r.C_fit}) + "," + (r.pass ? "1" : "0") +
         "\n";
  return out;
}

}  // namespace eqlab
