#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "eqlab/config.hpp"
#include "eqlab/errors.hpp"
#include "eqlab/fixtures.hpp"

using namespace eqlab;

namespace {

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "<accepted>";
}

int cli(const std::string& args) {
  const std::string cmd = std::string(EQLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string write_temp(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST_CASE("a minimal config is filled with defaults and round-trips byte for byte") {
  const auto cfg = parse_config(R"({"task": "decompose", "system": {"fixture": "F2"}})");
  CHECK(cfg.task == "decompose");
  CHECK(cfg.seed == 1);
  CHECK(cfg.params == task_defaults("decompose"));
  const std::string text = canonical_text(cfg);
  CHECK(canonical_text(parse_config(text)) == text);
  CHECK(config_hash(parse_config(text)) == config_hash(cfg));
}

TEST_CASE("explicit systems: exact weights, labels and groups") {
  const std::string ok = R"({"task": "decompose", "system": {
      "generators": [[[1,2],[0,1]], [[1,0],[2,1]], [[1,-2],[0,1]], [[1,0],[-2,1]]],
      "weights": ["1/4", "1/4", "1/4", "1/4"]}})";
  const auto cfg = parse_config(ok);
  REQUIRE(cfg.generators.has_value());
  CHECK(cfg.generators->size() == 4);
  CHECK(cfg.generators->weights[0] == Rational(1, 4));
  CHECK(canonical_text(parse_config(canonical_text(cfg))) == canonical_text(cfg));

  const std::string bad = R"({"task": "decompose", "system": {
      "generators": [[[1,2],[0,1]], [[1,0],[2,1]], [[1,-2],[0,1]], [[1,0],[-2,1]]],
      "weights": ["1/4", "1/4", "1/4", "24/100"]}})";
  CHECK(field_of(bad) == "system.weights");
  CHECK(message_of(bad).find("99/100") != std::string::npos);

  const std::string det2 = R"({"task": "decompose", "system": {"generators": [[[2,0],[0,1]]], "weights": ["1"]}})";
  CHECK(message_of(det2).find("system.generators[0]") != std::string::npos);

  const std::string labels = R"({"task": "walk", "system": {
      "generators": [[[0,1],[-1,0]], [[0,-1],[1,0]]], "weights": ["1/2", "1/2"],
      "labels": [1, 3], "group_order": 4}})";
  const auto lc = parse_config(labels);
  CHECK(lc.generators->has_labels());
}

TEST_CASE("unknown fields and parameters are rejected with their path") {
  CHECK(field_of(R"({"task": "decompose", "sytem": {}})") == "sytem");
  CHECK(field_of(R"({"task": "lyapunov", "system": {"fixture": "F1"}, "params": {"nn": 3}})") == "params.nn");
  CHECK(field_of(R"({"task": "lyapunov", "system": {"fixture": "F1"}, "params": {"n": "x"}})") == "params.n");
  CHECK(field_of(R"({"task": "nope"})") == "task");
  CHECK(field_of(R"({"task": "decompose", "system": {"fixture": "F9"}})") == "system.fixture");
  CHECK(field_of(R"({"task": "decompose", "output": {"format": "xml"}})") == "output.format");
  CHECK(message_of("{\"task\":\n  \"decompose\",,}").find("line 2") != std::string::npos);
}

TEST_CASE("start points in every accepted form") {
  const auto a = parse_config(R"({"task": "walk", "system": {"fixture": "F1"}, "start": ["1/3", "0"]})");
  REQUIRE(a.start_point.has_value());
  CHECK(a.start_point->is_exact());
  const auto b = parse_config(R"({"task": "walk", "system": {"fixture": "F1"},
      "start": [{"surd": [-1, 1, 2, 1]}, {"decimal": "0.25", "error": "1/1000"}]})");
  CHECK_FALSE(b.start_point->is_exact());
  CHECK(canonical_text(parse_config(canonical_text(b))) == canonical_text(b));
  CHECK(field_of(R"({"task": "walk", "system": {"fixture": "F1"}, "start": ["1/3"]})").rfind("start", 0) == 0);
}

TEST_CASE("runs are deterministic in their body") {
  const auto cfg =
      parse_config(R"({"task": "walk", "seed": 5, "system": {"fixture": "F1"}, "start": "surd",
                       "params": {"n": 12, "N": 300}})");
  const auto a = run(cfg), b = run(cfg);
  CHECK(report_body(a) == report_body(b));
  CHECK(a.artifacts == b.artifacts);
  CHECK(a.config_hash == config_hash(cfg));
  CHECK(a.version == kArtifactVersion);
}

TEST_CASE("decompose F2 and lyapunov F4 through the runner") {
  const auto d = run(parse_config(R"({"task": "decompose", "system": {"fixture": "F2"}})"));
  CHECK(d.output["factor_dims"] == Json::array({4, 2}));
  const auto l = run(parse_config(
      R"({"task": "lyapunov", "system": {"fixture": "F4"}, "params": {"n": 200, "N": 50}})"));
  const double want = std::log((3 + std::sqrt(5.0)) / 2);
  const auto ex = l.output["profile"]["exponents"];
  double top = -kInf;
  for (const auto& v : ex) top = std::max(top, v.get<double>());
  CHECK(std::abs(top - want) < 1e-6);
}

TEST_CASE("every fixture config parses back to its system") {
  for (const auto& name : fixture_names()) {
    Json doc = {{"task", "decompose"}, {"system", fixture_config(name)}};
    const auto cfg = parse_config(doc.dump());
    REQUIRE(cfg.generators.has_value());
    CHECK(cfg.generators->generators == fixture_by_name(name).generators);
  }
}

TEST_CASE("command line exit codes") {
  const std::string good = write_temp("eqlab_good.json", R"({"system": {"fixture": "F2"}})");
  const std::string weights = write_temp("eqlab_weights.json", R"({"system": {
      "generators": [[[1,2],[0,1]], [[1,0],[2,1]]], "weights": ["1/2", "49/100"]}})");
  const std::string malformed = write_temp("eqlab_bad.json", "{\"system\": \n {\"fixture\": }");
  CHECK(cli("decompose --config " + good) == 0);
  CHECK(cli("lyapunov --config " + good + " --seed 3") == 0);
  CHECK(cli("decompose --config " + weights) == 2);
  CHECK(cli("decompose --config " + malformed) == 2);
  CHECK(cli("decompose --config /nonexistent.json") == 2);
  CHECK(cli("frobnicate") == 2);
  CHECK(cli("walk --config " + good + " --format xml") == 2);
  const auto out = std::filesystem::temp_directory_path() / "eqlab_cli_out";
  std::filesystem::remove_all(out);
  CHECK(cli("decompose --config " + good + " --out " + out.string()) == 0);
  CHECK(std::filesystem::exists(out / "report.json"));
  CHECK(std::filesystem::exists(out / "config.json"));
  // the written config reproduces the run
  CHECK(cli("decompose --config " + (out / "config.json").string()) == 0);
  CHECK(cli("lyapunov --config " + (out / "config.json").string()) == 2);
}
