// Experiment runner: profile, serve, evolve, trace-gen, validate-config.
//
// Exit codes: 0 success, 1 usage, 2 configuration, 3 infeasible, 4 internal.

#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hercules/error.h"
#include "hercules/experiment.h"

namespace fs = std::filesystem;
using hercules::ExperimentConfig;
using json = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kInfeasible = 3, kInternal = 4 };

struct Common {
  std::string config;
  std::string scenario;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  std::string out_dir = "out";
  std::vector<std::string> models;
  std::vector<std::string> servers;
  std::vector<std::string> policies;
  std::string table;
};

// Relative config paths that do not exist here are looked up under
// $HERCULES_CONFIG_DIR.
std::string resolve_config(const std::string& path) {
  if (path.empty() || fs::exists(path) || fs::path(path).is_absolute()) return path;
  if (const char* dir = std::getenv("HERCULES_CONFIG_DIR")) {
    fs::path p = fs::path(dir) / path;
    if (fs::exists(p)) return p.string();
  }
  return path;
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg;
  const std::string path = resolve_config(c.config);
  if (!path.empty()) {
    if (!fs::exists(path)) throw hercules::ConfigError("--config", 0, "no such file: " + path);
    cfg = hercules::load_experiment(path);
  } else {
    cfg = hercules::builtin_scenario(c.scenario.empty() ? "dual" : c.scenario);
  }
  if (c.seed_set) cfg.seed = c.seed;
  if (c.jobs > 0) cfg.jobs = c.jobs;
  if (!c.models.empty()) cfg.models = c.models;
  if (!c.servers.empty()) cfg.servers = c.servers;
  if (!c.policies.empty()) cfg.policies = c.policies;
  return cfg;
}

// Writes through a sibling temp file so readers never see a partial file.
void write_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

hercules::EfficiencyTable load_table(const Common& c) {
  const fs::path p = c.table.empty() ? fs::path(c.out_dir) / "efficiency.txt" : fs::path(c.table);
  if (!fs::exists(p)) {
    throw hercules::ConfigError("--table", 0,
                                "efficiency table " + p.string() + " not found; run `hercules profile` first");
  }
  return hercules::EfficiencyTable::parse(hercules::kv::Document::parse_file(p.string()));
}

std::string slug(std::string s) {
  for (char& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  }
  return s;
}

int cmd_profile(const Common& c, json& report) {
  const ExperimentConfig cfg = load(c);
  const auto run = hercules::run_profile(cfg);
  const fs::path dir(c.out_dir);
  write_atomic(dir / "efficiency.txt", run.table.serialize().serialize());
  write_atomic(dir / "search_log.txt", run.log);
  int failed = 0, violations = 0;
  for (const auto& e : run.table.entries) {
    failed += e.error.empty() ? 0 : 1;
    violations += e.violation ? 1 : 0;
  }
  report["entries"] = run.table.entries.size();
  report["violations"] = violations;
  report["errors"] = failed;
  report["files"] = {(dir / "efficiency.txt").string(), (dir / "search_log.txt").string()};
  return kOk;
}

json summary_json(const hercules::kv::Document& doc) {
  json out = json::object();
  for (const auto& s : doc.sections()) {
    json sec = json::object();
    for (const auto& e : s.entries()) {
      char* end = nullptr;
      const double v = std::strtod(e.value.c_str(), &end);
      if (!e.value.empty() && end && *end == '\0') sec[e.key] = v;
      else sec[e.key] = e.value;
    }
    out[s.name().empty() ? s.kind() : s.kind() + " " + s.name()] = sec;
  }
  return out;
}

int cmd_serve(const Common& c, json& report) {
  const ExperimentConfig cfg = load(c);
  const auto table = load_table(c);
  const auto run = hercules::run_serve(cfg, table);
  const fs::path dir(c.out_dir);
  json files = json::array();
  for (const auto& tl : run.timelines) {
    const fs::path p = dir / ("timeline_" + std::string(hercules::to_string(tl.policy)) + ".txt");
    write_atomic(p, tl.to_text());
    files.push_back(p.string());
  }
  write_atomic(dir / "serve_summary.txt", run.summary.serialize());
  files.push_back((dir / "serve_summary.txt").string());
  report["files"] = files;
  report["summary"] = summary_json(run.summary);
  int infeasible = 0;
  for (const auto& tl : run.timelines) {
    if (tl.policy == hercules::Policy::kHercules) infeasible += tl.infeasible_intervals();
  }
  return infeasible > 0 ? kInfeasible : kOk;
}

int cmd_evolve(const Common& c, json& report) {
  const ExperimentConfig cfg = load(c);
  const auto table = load_table(c);
  const auto run = hercules::run_evolve(cfg, table);
  const fs::path dir(c.out_dir);
  write_atomic(dir / "evolve.txt", run.text);
  write_atomic(dir / "evolve_summary.txt", run.summary.serialize());
  report["files"] = {(dir / "evolve.txt").string(), (dir / "evolve_summary.txt").string()};
  report["summary"] = summary_json(run.summary);
  return kOk;
}

int cmd_trace_gen(const Common& c, json& report) {
  const ExperimentConfig cfg = load(c);
  hercules::require_valid(cfg);
  const fs::path dir(c.out_dir);
  json files = json::array();
  for (const auto& t : hercules::scenario_traces(cfg, cfg.workloads, cfg.days)) {
    const fs::path p = dir / ("trace_" + slug(t.workload) + ".txt");
    write_atomic(p, hercules::export_trace(t));
    files.push_back(p.string());
  }
  report["files"] = files;
  return kOk;
}

int cmd_validate(const Common& c, json& report) {
  const ExperimentConfig cfg = load(c);
  const auto problems = hercules::validate_experiment(cfg);
  report["scenario"] = cfg.scenario;
  report["problems"] = problems;
  report["valid"] = problems.empty();
  return problems.empty() ? kOk : kConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hercules: heterogeneity-aware recommendation inference scheduling experiments"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "scenario config file (relative paths also searched in $HERCULES_CONFIG_DIR)");
    sub->add_option("--scenario", c.scenario, "builtin scenario when no config is given: dual, mix6, evolve");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) {
          c.seed = s;
          c.seed_set = true;
        }, "seed override");
    sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
    sub->add_option("--models", c.models, "models to profile")->delimiter(',');
    sub->add_option("--servers", c.servers, "server types to profile")->delimiter(',');
    sub->add_option("--policies", c.policies, "policies: nh, greedy, priority, hercules")->delimiter(',');
  };
  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Common&, json&);
    bool table;
  };
  const std::vector<Cmd> cmds{
      {"profile", "offline profiling: efficiency table and search trajectories", cmd_profile, false},
      {"serve", "cluster provisioning timelines per policy", cmd_serve, true},
      {"evolve", "model-evolution sweep over CPU-only and accelerated clusters", cmd_evolve, true},
      {"trace-gen", "write the scenario load traces", cmd_trace_gen, false},
      {"validate-config", "check a scenario config", cmd_validate, false},
  };
  std::vector<CLI::App*> subs;
  for (const auto& cmd : cmds) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    add_common(sub);
    if (cmd.table) sub->add_option("--table", c.table, "efficiency table (default <out-dir>/efficiency.txt)");
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  json report;
  int rc = kOk;
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    report["command"] = cmds[i].name;
    try {
      rc = cmds[i].fn(c, report);
    } catch (const hercules::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfig;
    } catch (const hercules::PreconditionError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfig;
    } catch (const hercules::InfeasibleError& e) {
      std::cerr << "infeasible: " << e.what() << "\n";
      return kInfeasible;
    } catch (const std::exception& e) {
      std::cerr << "internal error: " << e.what() << "\n";
      return kInternal;
    }
  }
  report["exit_code"] = rc;
  std::cout << report.dump(2) << "\n";
  return rc;
}
