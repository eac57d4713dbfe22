#include <chrono>
#include <cmath>
#include <sstream>

#include "eqlab/config.hpp"
#include "eqlab/errors.hpp"
#include "eqlab/fixtures.hpp"
#include "eqlab/io.hpp"

#include <omp.h>

namespace eqlab {
namespace {

Json lyapunov_defaults() { return {{"lyapunov_n", 200u}, {"lyapunov_N", 10000u}}; }

Json with_lyapunov(Json j) {
  j.update(lyapunov_defaults());
  return j;
}

const GeneratorSystem& need_system(const ExperimentConfig& cfg) {
  if (!cfg.generators) throw ConfigError("system", "task " + cfg.task + " needs a system block");
  return *cfg.generators;
}

const StartPoint& need_start(const ExperimentConfig& cfg) {
  if (!cfg.start_point) throw ConfigError("start", "task " + cfg.task + " needs a starting point");
  return *cfg.start_point;
}

unsigned u(const Json& p, const char* k) { return p.at(k).get<unsigned>(); }
std::size_t z(const Json& p, const char* k) { return p.at(k).get<std::size_t>(); }
double f(const Json& p, const char* k) { return p.at(k).get<double>(); }

Frequency frequency(const Json& p, const char* k, std::size_t d) {
  Frequency a = p.at(k).get<Frequency>();
  if (a.size() != d) throw ConfigError(std::string("params.") + k, "expected " + std::to_string(d) + " entries");
  return a;
}

struct Geometry {
  AlgebraDecomposition dec;
  AlgebraDecomposition E;  // identity component algebra
  LyapunovProfile profile;
  ModuleDecomposition module;
  QuasiNorm qn;
};

Geometry geometry(const GeneratorSystem& sys, const Json& p, std::uint64_t seed) {
  Geometry g;
  WedderburnOptions wo;
  g.dec = decompose(sys, wo);
  g.profile = lyapunov_estimate(sys, g.dec, u(p, "lyapunov_n"), z(p, "lyapunov_N"), seed);
  g.module = decompose_module(sys, g.dec, g.profile);
  g.qn = QuasiNorm::from_module(g.module);
  if (sys.has_labels()) g.E = wedderburn_decompose(compute_center(generate_identity_component_algebra(sys)), wo);
  else g.E = g.dec;
  return g;
}

// factor j is compact when its module block is
std::vector<bool> compact_factors(const Geometry& g) {
  std::vector<bool> c(g.dec.factor_count(), false);
  for (const auto& b : g.module.blocks)
    for (std::size_t j : b.factors)
      if (j < c.size()) c[j] = b.compact;
  return c;
}

Json ensemble_summary(const WalkEnsemble& ens) {
  std::vector<double> mean(ens.dim(), 0.0);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const auto x = ens.atoms[i].x.to_double();
    const double w = ens.weight(i);
    for (std::size_t k = 0; k < x.size(); ++k) mean[k] += w * x[k];
  }
  return {{"mode", ens.mode == EnsembleMode::exact ? "exact" : "montecarlo"},
          {"n", ens.n},
          {"atoms", ens.size()},
          {"samples", ens.samples},
          {"precision_bits", ens.precision_bits},
          {"total_weight", to_string(ens.total_weight())},
          {"mean", nums(mean)}};
}

WalkEnsemble law(const GeneratorSystem& sys, const StartPoint& x0, unsigned n, std::size_t N, std::size_t budget,
                 std::uint64_t seed) {
  if (N == 0) {
    EnumerateOptions eo;
    eo.atom_budget = budget;
    return enumerate_exact(sys, x0, n, eo);
  }
  return sample_paths(sys, x0, n, N, seed);
}

// ---------------------------------------------------------------- tasks

Json task_decompose(const ExperimentConfig& cfg, RunReport&) {
  const auto& sys = need_system(cfg);
  const auto& p = cfg.params;
  WedderburnOptions wo;
  wo.tol = f(p, "tol");
  wo.seed = cfg.seed;
  wo.max_attempts = p.at("max_attempts").get<int>();
  wo.rational_max_den = p.at("rational_max_den").get<long>();
  AlgebraDecomposition dec = p.at("identity_component").get<bool>()
                                 ? wedderburn_decompose(compute_center(generate_identity_component_algebra(sys)), wo)
                                 : decompose(sys, wo);
  return to_json(dec);
}

Json task_lyapunov(const ExperimentConfig& cfg, RunReport&) {
  const auto& sys = need_system(cfg);
  const auto& p = cfg.params;
  const auto dec = decompose(sys);
  LyapunovOptions lo;
  const std::string exec = p.at("execution").get<std::string>();
  if (exec == "serial_reference") lo.execution = Execution::serial_reference;
  else if (exec != "parallel") throw ConfigError("params.execution", "expected parallel or serial_reference");
  const auto prof = lyapunov_estimate(sys, dec, u(p, "n"), z(p, "N"), cfg.seed, lo);
  Json out{{"factor_dims", dec.factor_dims}, {"profile", to_json(prof)}};
  if (p.at("module").get<bool>()) out["module"] = to_json(decompose_module(sys, dec, prof));
  return out;
}

Json task_walk(const ExperimentConfig& cfg, RunReport& rep) {
  const auto& sys = need_system(cfg);
  const auto& p = cfg.params;
  const std::string kind = p.at("kind").get<std::string>();
  const std::size_t N = z(p, "N");
  if (kind == "endpoints") {
    const auto& x0 = need_start(cfg);
    WalkEnsemble ens;
    if (N == 0) {
      EnumerateOptions eo;
      eo.atom_budget = z(p, "exact_budget");
      eo.keep_products = p.at("keep_products").get<bool>();
      ens = enumerate_exact(sys, x0, u(p, "n"), eo);
    } else {
      SampleOptions so;
      so.keep_products = p.at("keep_products").get<bool>();
      ens = sample_paths(sys, x0, u(p, "n"), N, cfg.seed, so);
    }
    std::ostringstream bin;
    write_ensemble(bin, ens);
    rep.artifacts["ensemble.csv"] = ensemble_to_csv(ens);
    rep.artifacts["ensemble.eqle"] = bin.str();
    return ensemble_summary(ens);
  }
  const std::size_t paths = N == 0 ? 10000 : N;
  if (kind == "return_times") {
    auto s = induced_return_times(sys, u(p, "m"), paths, cfg.seed, p.at("max_steps").get<std::uint64_t>());
    return to_json(s);
  }
  if (kind == "deviation") {
    double lambda = f(p, "lambda");
    if (lambda == 0) {
      const auto dec = decompose(sys);
      lambda = lyapunov_estimate(sys, dec, 200, 10000, cfg.seed).top;
    }
    return to_json(large_deviation_probe(sys, lambda, f(p, "omega"), p.at("n_grid").get<std::vector<unsigned>>(),
                                         paths, cfg.seed));
  }
  throw ConfigError("params.kind", "expected endpoints, return_times or deviation");
}

Json task_fourier(const ExperimentConfig& cfg, RunReport& rep) {
  const auto& sys = need_system(cfg);
  const auto& x0 = need_start(cfg);
  const auto& p = cfg.params;
  const std::size_t N = z(p, "N"), budget = z(p, "exact_budget");
  const auto freqs_given = p.at("frequencies").get<std::vector<Frequency>>();
  for (std::size_t i = 0; i < freqs_given.size(); ++i)
    if (freqs_given[i].size() != sys.dim())
      throw ConfigError("params.frequencies[" + std::to_string(i) + "]", "wrong dimension");
  const auto freqs = freqs_given.empty() ? frequency_box(sys.dim(), p.at("A_max").get<long>(),
                                                         p.at("include_zero").get<bool>())
                                         : freqs_given;
  const auto ens = law(sys, x0, u(p, "n"), N, budget, cfg.seed);
  const auto report = spectrum_at(ens, freqs);
  Json out{{"scan", to_json(report)}};
  if (cfg.format == "csv") rep.artifacts["fourier.csv"] = fourier_csv(report);
  const auto grid = p.at("n_grid").get<std::vector<unsigned>>();
  if (!grid.empty()) {
    std::vector<double> ns, mags;
    for (unsigned n : grid) {
      const auto r = spectrum_at(law(sys, x0, n, N, budget, cfg.seed), freqs);
      ns.push_back(n);
      mags.push_back(r.max_abs(!p.at("include_zero").get<bool>()));
    }
    double floor = f(p, "floor");
    if (floor == 0) floor = N > 0 ? 3.0 / std::sqrt(static_cast<double>(N)) : 1e-12;
    out["decay"] = {{"n", nums(ns)}, {"max_abs", nums(mags)}, {"floor", num(floor)}};
    out["decay"]["fit"] = to_json(decay_fit(ns, mags, floor));
  }
  return out;
}

WalkGranulateOptions granulate_options(const Json& p, std::uint64_t seed) {
  WalkGranulateOptions go;
  go.tau = f(p, "tau");
  go.n_back = p.at("n_back").get<int>();
  go.samples = z(p, "samples");
  go.exact_budget = z(p, "exact_budget");
  go.seed = seed;
  return go;
}

Json task_granulate(const ExperimentConfig& cfg, RunReport&) {
  const auto& sys = need_system(cfg);
  const auto& x0 = need_start(cfg);
  const auto& p = cfg.params;
  const auto g = geometry(sys, p, cfg.seed);
  const auto wg = walk_granulate(sys, g.E, g.qn, x0, frequency(p, "a0", sys.dim()), f(p, "t"), u(p, "n"),
                                 granulate_options(p, cfg.seed));
  return to_json(wg);
}

std::vector<double> rhos_of(const Json& p, const char* key) {
  std::vector<double> r;
  for (long e : p.at(key).get<std::vector<long>>()) r.push_back(std::ldexp(1.0, static_cast<int>(e)));
  return r;
}

Json task_audit(const ExperimentConfig& cfg, RunReport&) {
  const auto& sys = need_system(cfg);
  const auto& p = cfg.params;
  const auto g = geometry(sys, p, cfg.seed);
  const unsigned n = u(p, "n");
  RescaledOptions ro;
  ro.fold = u(p, "fold");
  const auto mu = rescaled_walk_measure(sys, g.dec, RescalingMap{g.profile.exponents, static_cast<double>(n)}, n,
                                        z(p, "N"), cfg.seed, compact_factors(g), ro);
  NCAuditOptions ao;
  ao.eps = f(p, "eps");
  ao.kappas = p.at("kappas").get<std::vector<double>>();
  ao.tau = f(p, "tau");
  ao.rhos = rhos_of(p, "rho_log2");
  ao.det_centers = z(p, "det_centers");
  ao.scan.seed = cfg.seed;
  return {{"D", mu.D()}, {"atoms", mu.size()}, {"delta", num(mu.delta)}, {"audit", to_json(nc_audit(mu, ao))}};
}

Json task_sumproduct(const ExperimentConfig& cfg, RunReport&) {
  const auto& p = cfg.params;
  const double delta = f(p, "delta");
  const auto net = uniform_net(f(p, "a"), f(p, "b"), f(p, "step"), delta);
  PointCloud A{1, net.coords};
  std::vector<Eigen::MatrixXd> B;
  for (double b : p.at("multipliers").get<std::vector<double>>()) B.push_back(Eigen::MatrixXd::Constant(1, 1, b));
  Json out{{"growth", to_json(sumproduct_check(A, B, delta))}};
  const unsigned s = u(p, "generation_s");
  if (s > 0) out["generation"] = to_json(generation_probe(net, s, delta, f(p, "eps0")));
  return out;
}

Json task_flatten(const ExperimentConfig& cfg, RunReport&) {
  const auto& p = cfg.params;
  const double step = std::ldexp(1.0, p.at("step_log2").get<int>());
  const double delta = std::ldexp(1.0, p.at("delta_log2").get<int>());
  const auto net = uniform_net(f(p, "a"), f(p, "b"), step, delta);
  FlattenOptions fo;
  fo.ess.scan.seed = cfg.seed;
  fo.audit.scan.seed = cfg.seed;
  const auto tr = flatten_pipeline(net, u(p, "k"), f(p, "eps"), f(p, "kappa"), f(p, "tau"), fo);
  Json out{{"trajectory", to_json(tr)}};
  const auto ms = p.at("power_m").get<std::vector<unsigned>>();
  const auto atoms = p.at("power_atoms").get<std::vector<std::size_t>>();
  if (atoms.size() < ms.size()) throw ConfigError("params.power_atoms", "one atom count per power_m entry");
  Json power = Json::array();
  double worst = kInf;
  for (std::size_t mi = 0; mi < ms.size(); ++mi) {
    double slack = kInf;
    for (std::size_t k = 0; k < z(p, "power_measures"); ++k) {
      const std::uint64_t index = mi * 1000003 + k;
      const auto eta = random_small_measure(atoms[mi], delta, cfg.seed, index);
      const auto xis = random_frequencies(z(p, "power_frequencies"), f(p, "power_scale"), cfg.seed, index);
      slack = std::min(slack, power_inequality_check(eta, ms[mi], xis).slack);
    }
    worst = std::min(worst, slack);
    power.push_back({{"m", ms[mi]}, {"atoms", atoms[mi]}, {"slack", num(slack)}});
  }
  out["power"] = power;
  out["power_slack"] = num(worst);
  return out;
}

Json task_drift(const ExperimentConfig& cfg, RunReport& rep) {
  const auto& sys = need_system(cfg);
  const auto& p = cfg.params;
  const auto g = geometry(sys, p, cfg.seed);
  DriftConfig dc;
  dc.alpha = f(p, "alpha");
  dc.lambda = f(p, "lambda");
  dc.Q = p.at("Q").get<long>();
  const auto ys = drift_grid(sys.dim(), z(p, "points"), p.at("denominator").get<long>());
  MargulisOptions mo;
  mo.blocks = z(p, "blocks");
  mo.holdout = p.at("holdout").get<bool>();
  const auto tab = margulis_check(sys, g.qn, dc, ys, u(p, "n"), z(p, "N"), cfg.seed, mo);
  if (cfg.format == "csv") rep.artifacts["margulis.csv"] = margulis_csv(tab);
  return to_json(tab);
}

Json task_e2e(const ExperimentConfig& cfg, RunReport& rep) {
  const auto& sys = need_system(cfg);
  const auto& x0 = need_start(cfg);
  const auto& p = cfg.params;
  const auto g = geometry(sys, p, cfg.seed);
  E2EOptions eo;
  eo.granulate = granulate_options(p, cfg.seed);
  eo.sweeps = u(p, "sweeps");
  eo.eps = f(p, "eps");
  eo.betas = p.at("betas").get<std::vector<double>>();
  eo.Q_max = p.at("Q_max").get<long>();
  eo.C_max = f(p, "C_max");
  eo.n_factor = f(p, "n_factor");
  eo.seed = cfg.seed;
  const auto rec = theorem_e2e(sys, g.E, g.qn, x0, frequency(p, "a0", sys.dim()), f(p, "t"), u(p, "n"),
                               f(p, "lambda"), eo);
  if (cfg.format == "csv") rep.artifacts["e2e.csv"] = e2e_csv(rec);
  return to_json(rec);
}

Json task_fixtures(const ExperimentConfig&, RunReport& rep) {
  Json out = Json::object();
  for (const auto& name : fixture_names()) {
    const Json sys = fixture_config(name);
    out[name] = sys;
    Json doc{{"task", "decompose"}, {"seed", 1}, {"system", sys}};
    rep.artifacts[name + ".json"] = doc.dump(2) + "\n";
  }
  return out;
}

using TaskFn = Json (*)(const ExperimentConfig&, RunReport&);

struct TaskEntry {
  const char* name;
  TaskFn fn;
  Json (*defaults)();
};

const std::vector<TaskEntry>& registry() {
  static const std::vector<TaskEntry> tasks{
      {"decompose", task_decompose,
       [] {
         return Json{{"identity_component", false}, {"tol", 1e-9}, {"max_attempts", 8}, {"rational_max_den", 1000}};
       }},
      {"lyapunov", task_lyapunov,
       [] { return Json{{"n", 200u}, {"N", 10000u}, {"module", false}, {"execution", "parallel"}}; }},
      {"walk", task_walk,
       [] {
         return Json{{"kind", "endpoints"}, {"n", 10u},        {"N", 0u},           {"exact_budget", 10000000u},
                     {"keep_products", false}, {"m", 1u},      {"max_steps", 1000000u}, {"lambda", 0.0},
                     {"omega", 0.1},        {"n_grid", {5u, 10u, 20u}}};
       }},
      {"fourier", task_fourier,
       [] {
         return Json{{"n", 8u},
                     {"N", 0u},
                     {"exact_budget", 10000000u},
                     {"A_max", 3u},
                     {"include_zero", false},
                     {"frequencies", Json::array()},
                     {"n_grid", Json::array()},
                     {"floor", 0.0}};
       }},
      {"granulate", task_granulate,
       [] {
         return with_lyapunov({{"a0", {1, 0}},
                               {"t", 0.5},
                               {"n", 10u},
                               {"tau", 0.1},
                               {"n_back", -1},
                               {"samples", 100000u},
                               {"exact_budget", 2000000u}});
       }},
      {"audit-nc", task_audit,
       [] {
         return with_lyapunov({{"n", 30u},
                               {"N", 100000u},
                               {"fold", 4u},
                               {"eps", 0.1},
                               {"kappas", Json::array({0.5})},
                               {"tau", 0.1},
                               {"rho_log2", {-10, -9, -8, -7, -6, -5, -4}},
                               {"det_centers", 32u}});
       }},
      {"sumproduct", task_sumproduct,
       [] {
         return Json{{"a", 1.0},           {"b", 2.0},    {"step", 0.015625},   {"delta", 0.001},
                     {"multipliers", Json::array()},      {"generation_s", 0u}, {"eps0", 0.0}};
       }},
      {"flatten", task_flatten,
       [] {
         return Json{{"a", 1.0},
                     {"b", 2.0},
                     {"step_log2", -10},
                     {"delta_log2", -10},
                     {"k", 1u},
                     {"eps", 0.1},
                     {"kappa", 0.5},
                     {"tau", 0.1},
                     {"power_m", {1u, 2u}},
                     {"power_atoms", {5u, 3u}},
                     {"power_measures", 10u},
                     {"power_frequencies", 200u},
                     {"power_scale", 10.0}};
       }},
      {"drift", task_drift,
       [] {
         return with_lyapunov({{"alpha", 0.1},
                               {"lambda", 0.5},
                               {"Q", 5u},
                               {"n", 20u},
                               {"N", 10000u},
                               {"points", 20u},
                               {"denominator", 1009u},
                               {"blocks", 16u},
                               {"holdout", true}});
       }},
      {"e2e", task_e2e,
       [] {
         return with_lyapunov({{"a0", {3, 0}},
                               {"t", 0.5},
                               {"n", 10u},
                               {"lambda", 0.5},
                               {"tau", 0.1},
                               {"n_back", -1},
                               {"samples", 100000u},
                               {"exact_budget", 2000000u},
                               {"sweeps", 2u},
                               {"eps", 0.2},
                               {"betas", {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}},
                               {"Q_max", 1000u},
                               {"C_max", 4.0},
                               {"n_factor", 1.0}});
       }},
      {"fixtures", task_fixtures, [] { return Json::object(); }},
  };
  return tasks;
}

const TaskEntry& entry(const std::string& task) {
  for (const auto& t : registry())
    if (task == t.name) return t;
  throw ConfigError("task", "unknown task '" + task + "'");
}

template <class E>
[[noreturn]] void with_context(const E& e, const std::string& task) {
  throw E(task + ": " + e.what());
}

}  // namespace

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& t : registry()) n.push_back(t.name);
    return n;
  }();
  return names;
}

Json task_defaults(const std::string& task) { return entry(task).defaults(); }

RunReport run(const ExperimentConfig& cfg) {
  const TaskEntry& t = entry(cfg.task);
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  RunReport rep;
  rep.config_hash = config_hash(cfg);
  rep.task = cfg.task;
  reset_warnings();
  const auto start = std::chrono::steady_clock::now();
  try {
    rep.output = t.fn(cfg, rep);
  } catch (const ConfigError&) {
    throw;
  } catch (const BudgetExceeded& e) {
    with_context(e, cfg.task);
  } catch (const HypothesisFailed& e) {
    with_context(e, cfg.task);
  } catch (const PrecisionExhausted& e) {
    with_context(e, cfg.task);
  } catch (const DimensionMismatch& e) {
    with_context(e, cfg.task);
  } catch (const AmbiguousClusters& e) {
    with_context(e, cfg.task);
  } catch (const ToleranceExceeded& e) {
    with_context(e, cfg.task);
  } catch (const GroupingAmbiguous& e) {
    with_context(e, cfg.task);
  } catch (const DegenerateHyperplane& e) {
    with_context(e, cfg.task);
  } catch (const MissingLabels& e) {
    with_context(e, cfg.task);
  } catch (const InsufficientDecade& e) {
    with_context(e, cfg.task);
  } catch (const NonUnimodular& e) {
    with_context(e, cfg.task);
  } catch (const Error& e) {
    with_context(e, cfg.task);
  } catch (const Json::exception& e) {
    throw ConfigError("params", e.what());
  }
  rep.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& w : collect_warnings()) rep.warnings.push_back(w.name + ": " + std::to_string(w.count));
  if (cfg.format == "json") rep.artifacts[cfg.task + ".json"] = rep.output.dump(2) + "\n";
  return rep;
}

std::string report_body(const RunReport& r) {
  Json artifacts = Json::object();
  for (const auto& [name, bytes] : r.artifacts) artifacts[name] = hex64(fnv1a(bytes));
  Json body{{"config_hash", r.config_hash},
            {"version", r.version},
            {"task", r.task},
            {"output", r.output},
            {"warnings", r.warnings},
            {"artifacts", artifacts}};
  return body.dump(2) + "\n";
}

Json report_json(const RunReport& r) {
  Json j = Json::parse(report_body(r));
  j["wall_clock"] = r.wall_clock;
  return j;
}

}  // namespace eqlab
