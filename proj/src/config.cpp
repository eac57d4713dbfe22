#include "eqlab/config.hpp"

#include <algorithm>

#include "eqlab/errors.hpp"
#include "eqlab/fixtures.hpp"
#include "eqlab/io.hpp"

namespace eqlab {
namespace {

std::string idx(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

Rational rational_field(const Json& j, const std::string& field) {
  if (j.is_string()) {
    try {
      return parse_rational(j.get<std::string>());
    } catch (const std::exception&) {
      throw ConfigError(field, "malformed rational '" + j.get<std::string>() + "'");
    }
  }
  if (j.is_number_integer()) return Rational(BigInt(std::to_string(j.get<long long>())));
  throw ConfigError(field, "expected an exact rational string such as \"1/4\"");
}

BigInt integer_field(const Json& j, const std::string& field) {
  if (j.is_number_unsigned()) return BigInt(std::to_string(j.get<unsigned long long>()));
  if (j.is_number_integer()) return BigInt(std::to_string(j.get<long long>()));
  if (j.is_string()) {
    BigInt z;
    if (z.set_str(j.get<std::string>(), 10) == 0) return z;
  }
  throw ConfigError(field, "expected an integer");
}

// Rewraps errors from GeneratorSystem::validate under "system.".
[[noreturn]] void rethrow_system(const ConfigError& e) {
  std::string msg = e.what();
  const std::string prefix = e.field() + ": ";
  if (!e.field().empty() && msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
  throw ConfigError("system." + e.field(), msg);
}

GeneratorSystem parse_system(const Json& j, std::uint64_t seed, Json& canonical) {
  if (!j.is_object()) throw ConfigError("system", "expected an object");
  if (j.contains("fixture")) {
    if (j.size() != 1) throw ConfigError("system", "a fixture block takes no other fields");
    if (!j["fixture"].is_string()) throw ConfigError("system.fixture", "expected a name");
    const std::string name = j["fixture"].get<std::string>();
    const auto names = fixture_names();
    if (std::find(names.begin(), names.end(), name) == names.end())
      throw ConfigError("system.fixture", "unknown fixture '" + name + "'");
    canonical = Json{{"fixture", name}};
    return fixture_by_name(name);
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::vector<std::string> allowed{"generators", "weights", "labels", "group_order", "group_table"};
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError("system." + it.key(), "unknown field");
  }
  if (!j.contains("generators") || !j["generators"].is_array() || j["generators"].empty())
    throw ConfigError("system.generators", "expected a nonempty list of square integer matrices");
  GeneratorSystem sys;
  const auto& gens = j["generators"];
  for (std::size_t g = 0; g < gens.size(); ++g) {
    const std::string f = idx("system.generators", g);
    const auto& m = gens[g];
    if (!m.is_array() || m.empty()) throw ConfigError(f, "expected a square matrix (list of rows)");
    const std::size_t d = m.size();
    std::vector<std::vector<BigInt>> rows(d);
    for (std::size_t r = 0; r < d; ++r) {
      if (!m[r].is_array() || m[r].size() != d) throw ConfigError(idx(f, r), "row length must equal the row count");
      for (std::size_t c = 0; c < d; ++c) rows[r].push_back(integer_field(m[r][c], idx(idx(f, r), c)));
    }
    sys.generators.push_back(IntMatrix::from_rows(rows));
  }
  if (!j.contains("weights") || !j["weights"].is_array())
    throw ConfigError("system.weights", "expected a list of rational strings");
  const auto& w = j["weights"];
  if (w.size() != sys.generators.size())
    throw ConfigError("system.weights", "expected " + std::to_string(sys.generators.size()) + " weights");
  Rational total = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    sys.weights.push_back(rational_field(w[i], idx("system.weights", i)));
    total += sys.weights.back();
  }
  if (total != 1) throw ConfigError("system.weights", "weights sum to " + to_string(total) + ", expected 1");
  if (j.contains("labels")) {
    const auto& l = j["labels"];
    if (!l.is_array()) throw ConfigError("system.labels", "expected a list of integers");
    std::vector<int> labels;
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (!l[i].is_number_integer()) throw ConfigError(idx("system.labels", i), "expected an integer");
      labels.push_back(l[i].get<int>());
    }
    sys.labels = labels;
    if (j.contains("group_table")) {
      const auto& t = j["group_table"];
      std::vector<std::vector<int>> table;
      try {
        table = t.get<std::vector<std::vector<int>>>();
        sys.group = FiniteGroup::from_table(table);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError("system.group_table", e.what());
      }
    } else {
      if (!j.contains("group_order") || !j["group_order"].is_number_integer() || j["group_order"].get<int>() < 1)
        throw ConfigError("system.group_order", "labels need a positive group_order or a group_table");
      sys.group = FiniteGroup::cyclic(j["group_order"].get<int>());
    }
  } else if (j.contains("group_order") || j.contains("group_table")) {
    throw ConfigError("system.labels", "a group needs generator labels");
  }
  try {
    sys.validate(seed);
  } catch (const ConfigError& e) {
    rethrow_system(e);
  } catch (const NonUnimodular& e) {
    throw NonUnimodular(std::string("system.") + e.what());
  } catch (const DimensionMismatch& e) {
    throw ConfigError("system.generators", e.what());
  }
  canonical = to_json(sys);
  return sys;
}

StartPoint parse_start(const Json& j, std::size_t dim, Json& canonical) {
  if (j.is_string() && j.get<std::string>() == "surd") {
    if (dim == 0 || dim > 4) throw ConfigError("start", "\"surd\" needs a system of dimension 1..4");
    canonical = "surd";
    return surd_start(dim);
  }
  if (!j.is_array()) throw ConfigError("start", "expected \"surd\" or a list of coordinates");
  if (dim != 0 && j.size() != dim)
    throw ConfigError("start", "expected " + std::to_string(dim) + " coordinates");
  std::vector<CoordinateSpec> coords;
  canonical = Json::array();
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string f = idx("start", i);
    const auto& c = j[i];
    if (c.is_string() || c.is_number_integer()) {
      const Rational q = rational_field(c, f);
      coords.emplace_back(q);
      canonical.push_back(to_string(q));
    } else if (c.is_object() && c.contains("surd")) {
      const auto& s = c["surd"];
      if (c.size() != 1 || !s.is_array() || s.size() != 4) throw ConfigError(f + ".surd", "expected [a, b, k, c]");
      Surd v{integer_field(s[0], f + ".surd[0]"), integer_field(s[1], f + ".surd[1]"),
             integer_field(s[2], f + ".surd[2]"), integer_field(s[3], f + ".surd[3]")};
      if (v.k < 0) throw ConfigError(f + ".surd[2]", "radicand must be nonnegative");
      if (v.c == 0) throw ConfigError(f + ".surd[3]", "denominator must be nonzero");
      coords.emplace_back(v);
      canonical.push_back(
          Json{{"surd", {to_string(v.a), to_string(v.b), to_string(v.k), to_string(v.c)}}});
    } else if (c.is_object() && c.contains("decimal")) {
      if (c.size() != 2 || !c.contains("error") || !c["decimal"].is_string())
        throw ConfigError(f, "expected {\"decimal\": \"...\", \"error\": \"p/q\"}");
      DeclaredDecimal dd{c["decimal"].get<std::string>(), rational_field(c["error"], f + ".error")};
      try {
        parse_rational(dd.digits);
      } catch (const std::exception&) {
        throw ConfigError(f + ".decimal", "malformed decimal '" + dd.digits + "'");
      }
      if (dd.error < 0) throw ConfigError(f + ".error", "must be nonnegative");
      canonical.push_back(Json{{"decimal", dd.digits}, {"error", to_string(dd.error)}});
      coords.emplace_back(std::move(dd));
    } else {
      throw ConfigError(f, "expected \"p/q\", {\"surd\": ..} or {\"decimal\": ..}");
    }
  }
  return StartPoint(std::move(coords));
}

// Element-type check of a list parameter against a nonempty default list.
void check_list(const Json& given, const Json& def, const std::string& f) {
  for (std::size_t i = 0; i < given.size(); ++i) {
    const auto& e = given[i];
    const bool ok = def.empty() ? e.is_number() || e.is_array()
                    : def[0].is_number_integer() ? e.is_number_integer()
                    : def[0].is_number() ? e.is_number()
                    : def[0].is_array() ? e.is_array()
                                        : e.type() == def[0].type();
    if (!ok) throw ConfigError(idx(f, i), "wrong element type");
  }
}

Json merge_params(const std::string& task, const Json& given) {
  Json out = task_defaults(task);
  if (given.is_null()) return out;
  if (!given.is_object()) throw ConfigError("params", "expected an object");
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string f = "params." + it.key();
    if (!out.contains(it.key())) throw ConfigError(f, "unknown parameter for task " + task);
    const Json& def = out[it.key()];
    const Json& v = it.value();
    if (def.is_boolean()) {
      if (!v.is_boolean()) throw ConfigError(f, "expected a boolean");
      out[it.key()] = v;
    } else if (def.is_number_integer()) {
      if (!v.is_number_integer()) throw ConfigError(f, "expected an integer");
      if (def.is_number_unsigned() && !v.is_number_unsigned()) throw ConfigError(f, "expected a nonnegative integer");
      out[it.key()] = v;
    } else if (def.is_number_float()) {
      if (!v.is_number()) throw ConfigError(f, "expected a number");
      out[it.key()] = v.get<double>();  // canonical as a float
    } else if (def.is_string()) {
      if (!v.is_string()) throw ConfigError(f, "expected a string");
      out[it.key()] = v;
    } else if (def.is_array()) {
      if (!v.is_array()) throw ConfigError(f, "expected a list");
      check_list(v, def, f);
      if (!def.empty() && def[0].is_number_float()) {
        Json a = Json::array();
        for (const auto& e : v) a.push_back(e.get<double>());
        out[it.key()] = a;
      } else {
        out[it.key()] = v;
      }
    } else {
      out[it.key()] = v;
    }
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(line_column(text, e.byte), "malformed document");
  }
  if (!doc.is_object()) throw ConfigError("", "the document must be an object");
  static const std::vector<std::string> top{"task", "seed", "system", "start", "params", "output"};
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (std::find(top.begin(), top.end(), it.key()) == top.end()) throw ConfigError(it.key(), "unknown field");

  ExperimentConfig cfg;
  if (!doc.contains("task") || !doc["task"].is_string()) throw ConfigError("task", "required string");
  cfg.task = doc["task"].get<std::string>();
  const auto& names = task_names();
  if (std::find(names.begin(), names.end(), cfg.task) == names.end())
    throw ConfigError("task", "unknown task '" + cfg.task + "'");

  if (doc.contains("seed")) {
    const auto& s = doc["seed"];
    if (s.is_number_unsigned()) {
      cfg.seed = s.get<std::uint64_t>();
    } else if (s.is_string()) {
      BigInt z;
      if (z.set_str(s.get<std::string>(), 10) != 0 || z < 0 || mpz_sizeinbase(z.get_mpz_t(), 2) > 64)
        throw ConfigError("seed", "expected an unsigned 64-bit integer");
      cfg.seed = std::stoull(s.get<std::string>());
    } else {
      throw ConfigError("seed", "expected an unsigned 64-bit integer");
    }
  }
  if (doc.contains("system")) cfg.generators = parse_system(doc["system"], cfg.seed, cfg.system);
  if (doc.contains("start")) {
    cfg.start_point = parse_start(doc["start"], cfg.generators ? cfg.generators->dim() : 0, cfg.start);
    if (!cfg.generators && doc["start"].is_string()) throw ConfigError("start", "\"surd\" needs a system");
  }
  cfg.params = merge_params(cfg.task, doc.contains("params") ? doc["params"] : Json());
  if (doc.contains("output")) {
    const auto& o = doc["output"];
    if (!o.is_object()) throw ConfigError("output", "expected an object");
    for (auto it = o.begin(); it != o.end(); ++it) {
      const std::string f = "output." + it.key();
      if (it.key() == "dir") {
        if (!it->is_string()) throw ConfigError(f, "expected a path");
        cfg.out_dir = it->get<std::string>();
      } else if (it.key() == "format") {
        if (!it->is_string() || (*it != "json" && *it != "csv")) throw ConfigError(f, "expected json or csv");
        cfg.format = it->get<std::string>();
      } else if (it.key() == "threads") {
        if (!it->is_number_unsigned()) throw ConfigError(f, "expected a nonnegative integer");
        cfg.threads = it->get<int>();
      } else {
        throw ConfigError(f, "unknown field");
      }
    }
  }
  return cfg;
}

Json config_json(const ExperimentConfig& cfg) {
  Json j{{"task", cfg.task}, {"seed", cfg.seed}, {"params", cfg.params}};
  if (!cfg.system.is_null()) j["system"] = cfg.system;
  if (!cfg.start.is_null()) j["start"] = cfg.start;
  j["output"] = {{"dir", cfg.out_dir}, {"format", cfg.format}, {"threads", cfg.threads}};
  return j;
}

std::string canonical_text(const ExperimentConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

std::string config_hash(const ExperimentConfig& cfg) { return hex64(fnv1a(canonical_text(cfg))); }

Json fixture_config(const std::string& name) { return to_json(fixture_by_name(name)); }

}  // namespace eqlab
