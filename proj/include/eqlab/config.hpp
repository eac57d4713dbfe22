#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eqlab/diagnostics.hpp"
#include "eqlab/generator_system.hpp"
#include "eqlab/report.hpp"
#include "eqlab/torus_point.hpp"

namespace eqlab {

inline constexpr const char* kArtifactVersion = "eqlab 1.0.0";

// Document layout (JSON):
//   task     one of task_names()
//   seed     u64, number or decimal string
//   system   {"fixture": "F1"} or {"generators": [[[..]..]..], "weights":
//            ["1/4", ..], "labels": [..], "group_order": k | "group_table"}
//   start    "surd" or a list of coordinates: "p/q", {"surd": [a, b, k, c]}
//            for (a + b sqrt k) / c, {"decimal": "0.1..", "error": "p/q"}
//   params   task parameters; unknown keys are rejected, defaults are filled
//   output   {"dir": "", "format": "json" | "csv", "threads": 0}
// Every component is rewritten in canonical form, so that
// canonical_text(parse_config(canonical_text(c))) == canonical_text(c).
struct ExperimentConfig {
  std::string task;
  std::uint64_t seed = 1;
  Json system;                  // canonical system block, null when absent
  std::optional<GeneratorSystem> generators;
  Json start;                   // canonical start block, null when absent
  std::optional<StartPoint> start_point;
  Json params = Json::object();
  std::string out_dir;
  std::string format = "json";
  int threads = 0;              // 0 keeps the OpenMP default
};

// Throws ConfigError with the field path ("system.weights", "params.n") or
// with "line L, column C" for malformed documents, NonUnimodular for
// generators of determinant other than +-1.
ExperimentConfig parse_config(const std::string& text);
Json config_json(const ExperimentConfig& cfg);
std::string canonical_text(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

const std::vector<std::string>& task_names();
// Default parameters of a task; throws ConfigError for unknown tasks.
Json task_defaults(const std::string& task);

struct RunReport {
  std::string config_hash;
  std::string version = kArtifactVersion;
  std::string task;
  double wall_clock = 0;        // seconds, outside the body
  Json output;
  std::vector<std::string> warnings;
  std::map<std::string, std::string> artifacts;  // file name -> contents
};

// Dispatches to the task. Errors keep their type; the message gains the task
// name. Identical configs give identical report bodies and artifacts.
RunReport run(const ExperimentConfig& cfg);
// Everything except the wall clock, canonical.
std::string report_body(const RunReport& r);
Json report_json(const RunReport& r);

// Generator system given in config form.
Json fixture_config(const std::string& name);

}  // namespace eqlab
