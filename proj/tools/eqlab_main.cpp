#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "eqlab/config.hpp"
#include "eqlab/errors.hpp"

namespace {

constexpr int kConfigError = 2, kTaskError = 3, kBudgetError = 4;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw eqlab::ConfigError("--config", "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw eqlab::ConfigError("--out", "cannot write " + p.string());
  os << bytes;
}

struct Flags {
  std::string config;
  std::string seed;
  std::string out;
  int threads = -1;
  std::string format;
};

// Command-line values override the document before validation, so the
// config hash covers what actually ran.
std::string effective_document(const std::string& task, const Flags& fl) {
  eqlab::Json doc = eqlab::Json::object();
  if (!fl.config.empty()) {
    const std::string text = slurp(fl.config);
    try {
      doc = eqlab::Json::parse(text);
    } catch (const eqlab::Json::parse_error&) {
      eqlab::parse_config(text);  // rethrows with line and column
    }
    if (!doc.is_object()) throw eqlab::ConfigError("", "the document must be an object");
  }
  if (doc.contains("task") && doc["task"] != task)
    throw eqlab::ConfigError("task", "config names task " + doc["task"].dump() + " but the subcommand is " + task);
  doc["task"] = task;
  if (!fl.seed.empty()) doc["seed"] = fl.seed;
  if (!fl.out.empty() || fl.threads >= 0 || !fl.format.empty()) {
    if (!doc.contains("output")) doc["output"] = eqlab::Json::object();
    if (!fl.out.empty()) doc["output"]["dir"] = fl.out;
    if (fl.threads >= 0) doc["output"]["threads"] = fl.threads;
    if (!fl.format.empty()) doc["output"]["format"] = fl.format;
  }
  return doc.dump();
}

int execute(const std::string& task, const Flags& fl) {
  eqlab::ExperimentConfig cfg;
  try {
    cfg = eqlab::parse_config(effective_document(task, fl));
  } catch (const eqlab::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  eqlab::RunReport rep;
  try {
    rep = eqlab::run(cfg);
  } catch (const eqlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const eqlab::BudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return kBudgetError;
  } catch (const std::exception& e) {
    std::cerr << "task error: " << e.what() << "\n";
    return kTaskError;
  }
  const std::string report = eqlab::report_json(rep).dump(2) + "\n";
  if (cfg.out_dir.empty()) {
    std::cout << report;
  } else {
    try {
      std::filesystem::create_directories(cfg.out_dir);
      const std::filesystem::path dir(cfg.out_dir);
      write_file(dir / "report.json", report);
      write_file(dir / "config.json", eqlab::canonical_text(cfg));
      for (const auto& [name, bytes] : rep.artifacts) write_file(dir / name, bytes);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfigError;
    }
    std::cout << rep.config_hash << " " << cfg.out_dir << "\n";
  }
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equidistribution experiments on tori: algebra, walks, spectra, drift"};
  app.require_subcommand(1);
  Flags fl;
  std::string chosen;
  for (const auto& task : eqlab::task_names()) {
    CLI::App* sub = app.add_subcommand(task, "run the " + task + " task");
    sub->add_option("--config", fl.config, "experiment document (JSON)");
    sub->add_option("--seed", fl.seed, "master seed (u64)");
    sub->add_option("--out", fl.out, "output directory; report to stdout when absent");
    sub->add_option("--threads", fl.threads, "OpenMP threads")->check(CLI::NonNegativeNumber);
    sub->add_option("--format", fl.format, "tabular output format")->check(CLI::IsMember({"csv", "json"}));
    sub->callback([&chosen, task] { chosen = task; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }
  return execute(chosen, fl);
}
