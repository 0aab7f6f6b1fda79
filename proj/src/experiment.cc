#include "hercules/experiment.h"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include "hercules/error.h"

namespace hercules {

std::vector<WorkloadSpec> EvolveSpec::snapshot(double f) const {
  std::vector<WorkloadSpec> out;
  for (const auto& s : sources) {
    out.push_back({s, total_peak_qps * (1.0 - f) / static_cast<double>(sources.size()), ""});
  }
  for (const auto& t : targets) {
    out.push_back({t, total_peak_qps * f / static_cast<double>(targets.size()), ""});
  }
  return out;
}

namespace {

void set_availability(Catalog& c, const std::string& server, int n) {
  for (auto& s : c.servers) {
    if (s.name == server) {
      s.availability = n;
      return;
    }
  }
  throw ConfigError("availability", 0, fmt::format("unknown server '{}'", server));
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

std::vector<double> parse_number_list(const std::string& text, const std::string& field, int line) {
  std::vector<double> out;
  for (const auto& t : kv::parse_csv_list(text)) out.push_back(kv::parse_number(t, field, line));
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; results land in
// caller-owned slots so the outcome does not depend on scheduling.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  jobs = std::clamp(jobs, 1, std::max(n, 1));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<std::string> builtin_scenario_names() { return {"dual", "mix6", "evolve"}; }

ExperimentConfig builtin_scenario(const std::string& name) {
  ExperimentConfig c;
  c.scenario = name;
  if (name == "dual") {
    set_availability(c.catalog, "T2", 70);
    c.models = {"DLRM-RMC1", "DLRM-RMC2"};
    c.servers = {"T2", "T3", "T7"};
    c.cluster_servers = c.servers;
    c.workloads = {{"DLRM-RMC1", 50000.0, ""}, {"DLRM-RMC2", 50000.0, ""}};
  } else if (name == "mix6") {
    for (const auto& s : c.catalog.servers) c.cluster_servers.push_back(s.name);
    c.workloads = {{"DLRM-RMC1", 400000.0, ""}, {"DLRM-RMC2", 60000.0, ""}, {"DLRM-RMC3", 120000.0, ""},
                   {"MT-WnD", 150000.0, ""},    {"DIN", 50000.0, ""},       {"DIEN", 25000.0, ""}};
    c.cluster.r_mode = RMode::kEstimated;
  } else if (name == "evolve") {
    c.policies = {"hercules"};
  } else {
    throw ConfigError("scenario", 0,
                      fmt::format("unknown scenario '{}' ({})", name, join(builtin_scenario_names())));
  }
  return c;
}

ExperimentConfig parse_experiment(const kv::Document& doc) {
  const kv::Section* e = doc.find("experiment");
  ExperimentConfig c = builtin_scenario(e && e->has("scenario") ? e->require_string("scenario") : "dual");
  c.catalog = apply_catalog_overrides(c.catalog, doc);
  c.calib = parse_calibration(doc, c.calib);
  if (e) {
    e->reject_unknown({"scenario", "seed", "jobs", "evaluator", "models", "servers", "cluster_servers",
                       "policies", "days", "trace_interval_s", "trough_ratio", "noise", "interval_s",
                       "setup_delay_s", "r_mode", "r_percent", "r_window_s", "greedy_rank", "nh_seeds"});
    if (auto v = e->get_int("seed")) c.seed = static_cast<std::uint64_t>(*v);
    if (auto v = e->get_int("jobs")) c.jobs = static_cast<int>(*v);
    if (auto v = e->get_string("evaluator")) c.evaluator = evaluator_from_string(*v);
    if (auto v = e->get_string("models")) c.models = kv::parse_csv_list(*v);
    if (auto v = e->get_string("servers")) c.servers = kv::parse_csv_list(*v);
    if (auto v = e->get_string("cluster_servers")) c.cluster_servers = kv::parse_csv_list(*v);
    if (auto v = e->get_string("policies")) c.policies = kv::parse_csv_list(*v);
    if (auto v = e->get_int("days")) c.days = static_cast<int>(*v);
    if (auto v = e->get_double("trace_interval_s")) c.trace_interval_s = *v;
    if (auto v = e->get_double("trough_ratio")) c.trough_ratio = *v;
    if (auto v = e->get_double("noise")) c.noise = *v;
    if (auto v = e->get_double("interval_s")) c.cluster.interval_s = *v;
    if (auto v = e->get_double("setup_delay_s")) c.cluster.setup_delay_s = *v;
    if (auto v = e->get_string("r_mode")) c.cluster.r_mode = r_mode_from_string(*v);
    if (auto v = e->get_double("r_percent")) c.cluster.r_percent = *v;
    if (auto v = e->get_double("r_window_s")) c.cluster.r_window_s = *v;
    if (auto v = e->get_string("greedy_rank")) {
      if (*v == "qps") c.cluster.rank = RankBy::kQps;
      else if (*v == "qps_per_watt") c.cluster.rank = RankBy::kQpsPerWatt;
      else e->fail("greedy_rank", "expected qps or qps_per_watt");
    }
    if (auto v = e->get_int("nh_seeds")) c.nh_seeds = static_cast<int>(*v);
  }
  if (const kv::Section* a = doc.find("availability")) {
    for (const auto& en : a->entries()) {
      set_availability(c.catalog, en.key, static_cast<int>(kv::parse_integer(en.value, en.key, en.line)));
    }
  }
  if (const kv::Section* s = doc.find("sla")) {
    for (const auto& en : s->entries()) {
      const ModelSpec* m = c.catalog.find_model(en.key);
      if (!m) throw ConfigError(en.key, en.line, fmt::format("sla names unknown model '{}'", en.key));
      c.sla_ms[m->name] = kv::parse_number(en.value, en.key, en.line);
    }
  }
  const auto ws = doc.of_kind("workload");
  if (!ws.empty()) {
    c.workloads.clear();
    for (const kv::Section* w : ws) {
      w->reject_unknown({"peak_qps", "trace"});
      WorkloadSpec spec;
      spec.model = w->name();
      spec.peak_qps = w->get_double("peak_qps").value_or(0.0);
      spec.trace_path = w->get_string("trace").value_or("");
      if (spec.trace_path.empty() && !w->has("peak_qps")) w->fail("peak_qps", "needs peak_qps or trace");
      c.workloads.push_back(spec);
    }
  }
  if (const kv::Section* v = doc.find("evolve")) {
    v->reject_unknown({"sources", "targets", "shifts", "total_peak_qps", "days", "cpu_servers", "accel_servers"});
    if (auto x = v->get_string("sources")) c.evolve.sources = kv::parse_csv_list(*x);
    if (auto x = v->get_string("targets")) c.evolve.targets = kv::parse_csv_list(*x);
    if (auto x = v->get_string("shifts")) c.evolve.shifts = parse_number_list(*x, "shifts", v->find("shifts")->line);
    if (auto x = v->get_double("total_peak_qps")) c.evolve.total_peak_qps = *x;
    if (auto x = v->get_int("days")) c.evolve.days = static_cast<int>(*x);
    if (auto x = v->get_string("cpu_servers")) c.evolve.cpu_servers = kv::parse_csv_list(*x);
    if (auto x = v->get_string("accel_servers")) c.evolve.accel_servers = kv::parse_csv_list(*x);
  }
  return c;
}

ExperimentConfig load_experiment(const std::string& path) { return parse_experiment(kv::Document::parse_file(path)); }

std::vector<std::string> validate_experiment(const ExperimentConfig& c) {
  std::vector<std::string> out;
  auto model_ok = [&](const std::string& n, const char* where) {
    if (!c.catalog.find_model(n)) out.push_back(fmt::format("{}: unknown model '{}'", where, n));
  };
  auto server_ok = [&](const std::string& n, const char* where) {
    if (!c.catalog.find_server(n)) out.push_back(fmt::format("{}: unknown server '{}'", where, n));
  };
  for (const auto& m : c.models) model_ok(m, "models");
  for (const auto& s : c.servers) server_ok(s, "servers");
  for (const auto& s : c.cluster_servers) server_ok(s, "cluster_servers");
  std::set<std::string> seen;
  for (const auto& w : c.workloads) {
    model_ok(w.model, "workload");
    const ModelSpec* m = c.catalog.find_model(w.model);
    if (m && !seen.insert(m->name).second) out.push_back(fmt::format("workload '{}' listed twice", w.model));
    if (!(w.peak_qps >= 0.0)) out.push_back(fmt::format("workload '{}': peak_qps must be >= 0", w.model));
  }
  for (const auto& p : c.policies) {
    try {
      policy_from_string(p);
    } catch (const ConfigError& e) {
      out.push_back(e.what());
    }
  }
  if (c.days < 1) out.push_back("days must be >= 1");
  if (!(c.trace_interval_s > 0.0)) out.push_back("trace_interval_s must be > 0");
  if (!(c.cluster.interval_s > 0.0)) out.push_back("interval_s must be > 0");
  if (!(c.cluster.setup_delay_s >= 0.0)) out.push_back("setup_delay_s must be >= 0");
  if (!(c.cluster.r_percent >= 0.0)) out.push_back("r_percent must be >= 0");
  if (!(c.trough_ratio > 0.0 && c.trough_ratio <= 1.0)) out.push_back("trough_ratio must lie in (0, 1]");
  if (!(c.noise >= 0.0)) out.push_back("noise must be >= 0");
  if (c.nh_seeds < 1) out.push_back("nh_seeds must be >= 1");
  if (c.jobs < 1) out.push_back("jobs must be >= 1");
  for (const auto& s : c.catalog.servers) {
    if (s.availability < 0) out.push_back(fmt::format("server {}: availability must be >= 0", s.name));
  }
  for (const auto& m : c.evolve.sources) model_ok(m, "evolve.sources");
  for (const auto& m : c.evolve.targets) model_ok(m, "evolve.targets");
  if (c.evolve.sources.empty() || c.evolve.targets.empty()) out.push_back("evolve needs sources and targets");
  for (const auto& s : c.evolve.cpu_servers) server_ok(s, "evolve.cpu_servers");
  for (const auto& s : c.evolve.accel_servers) server_ok(s, "evolve.accel_servers");
  for (double f : c.evolve.shifts) {
    if (!(f >= 0.0 && f <= 1.0)) out.push_back(fmt::format("evolve shift {} outside [0, 1]", f));
  }
  if (c.evolve.days < 1) out.push_back("evolve.days must be >= 1");
  return out;
}

void require_valid(const ExperimentConfig& cfg) {
  const auto problems = validate_experiment(cfg);
  if (!problems.empty()) throw ConfigError("experiment", 0, problems.front());
}

std::vector<ServerSpec> resolve_servers(const ExperimentConfig& cfg, const std::vector<std::string>& names) {
  if (names.empty()) return cfg.catalog.servers;
  std::vector<ServerSpec> out;
  for (const auto& n : names) out.push_back(cfg.catalog.server(n));
  return out;
}

std::vector<ModelSpec> resolve_models(const ExperimentConfig& cfg, const std::vector<std::string>& names) {
  if (names.empty()) return cfg.catalog.models;
  std::vector<ModelSpec> out;
  for (const auto& n : names) out.push_back(cfg.catalog.model(n));
  return out;
}

std::vector<LoadTrace> scenario_traces(const ExperimentConfig& cfg, const std::vector<WorkloadSpec>& workloads,
                                       int days) {
  std::vector<LoadTrace> out;
  for (std::size_t k = 0; k < workloads.size(); ++k) {
    const std::string name = cfg.catalog.model(workloads[k].model).name;
    LoadTrace t;
    if (!workloads[k].trace_path.empty()) {
      t = ingest_trace(workloads[k].trace_path);
    } else {
      t = gen_diurnal_trace(workloads[k].peak_qps, days, cfg.trough_ratio, cfg.noise, cfg.trace_interval_s,
                            cfg.seed + k, name);
    }
    t.workload = name;
    out.push_back(std::move(t));
  }
  return out;
}

ProfileRun run_profile(const ExperimentConfig& cfg) {
  require_valid(cfg);
  const auto models = resolve_models(cfg, cfg.models);
  const auto servers = resolve_servers(cfg, cfg.servers);
  ProfileOptions opt;
  opt.evaluator = cfg.evaluator;
  opt.seed = cfg.seed;
  opt.sla_ms = cfg.sla_ms;
  opt.jobs = cfg.jobs;
  opt.calib = cfg.calib;
  std::vector<SearchTrace> traces;
  ProfileRun run;
  run.table = profile_all(models, servers, opt, &traces);
  for (std::size_t i = 0; i < run.table.entries.size(); ++i) {
    const EfficiencyTuple& e = run.table.entries[i];
    run.log += fmt::format("# pair {} {} strategy {} qps {} power_w {} evaluations {}{}\n", e.model, e.server,
                           e.strategy.name(), kv::format_number(e.qps), kv::format_number(e.power_w),
                           e.evaluations, e.error.empty() ? "" : " error " + e.error);
    const SearchTrace& t = traces[i];
    for (std::size_t j = 0; j < t.outer_o.size(); ++j) {
      run.log += fmt::format("outer o {} peak {}\n", t.outer_o[j], kv::format_number(t.per_o_peak[j]));
    }
    for (std::size_t j = 0; j < t.moves.size(); ++j) run.log += fmt::format("move {} {}\n", j, describe(t.moves[j]));
  }
  return run;
}

double savings_percent(double base, double better) { return base > 0.0 ? 100.0 * (base - better) / base : 0.0; }

namespace {

kv::Section& add_policy_summary(kv::Document& doc, const std::string& name, double peak_w, double avg_w, int peak_n,
                        double avg_n) {
  kv::Section& s = doc.add_section("policy", name);
  s.add("peak_power_w", kv::format_number(peak_w));
  s.add("avg_power_w", kv::format_number(avg_w));
  s.add("peak_servers", std::to_string(peak_n));
  s.add("avg_servers", kv::format_number(avg_n));
  return s;
}

}  // namespace

ServeRun run_serve(const ExperimentConfig& cfg, const EfficiencyTable& table) {
  require_valid(cfg);
  const auto types = resolve_servers(cfg, cfg.cluster_servers);
  const auto traces = scenario_traces(cfg, cfg.workloads, cfg.days);
  std::vector<Policy> policies;
  for (const auto& p : cfg.policies) policies.push_back(policy_from_string(p));
  const bool want_nh = std::find(policies.begin(), policies.end(), Policy::kNh) != policies.end();

  // Sub-runs: one per policy, plus the extra NH draws.
  const int extra_nh = want_nh ? cfg.nh_seeds - 1 : 0;
  const int n = static_cast<int>(policies.size()) + extra_nh;
  std::vector<ProvisionTimeline> runs(n);
  parallel_for(n, cfg.jobs, [&](int i) {
    ClusterOptions opt = cfg.cluster;
    opt.seed = cfg.seed;
    if (i < static_cast<int>(policies.size())) {
      runs[i] = run_cluster_sim(traces, table, types, policies[i], opt);
    } else {
      opt.seed = cfg.seed + static_cast<std::uint64_t>(i - policies.size() + 1);
      runs[i] = run_cluster_sim(traces, table, types, Policy::kNh, opt);
    }
  });

  ServeRun out;
  out.timelines.assign(runs.begin(), runs.begin() + static_cast<long>(policies.size()));
  kv::Document& doc = out.summary;
  kv::Section& head = doc.add_section("serve", cfg.scenario);
  head.add("seed", std::to_string(cfg.seed));
  head.add("intervals", std::to_string(out.timelines.empty() ? 0 : out.timelines[0].intervals.size()));
  head.add("interval_s", kv::format_number(cfg.cluster.interval_s));
  head.add("setup_delay_s", kv::format_number(cfg.cluster.setup_delay_s));
  head.add("r_mode", to_string(cfg.cluster.r_mode));
  std::vector<std::string> wl, ty;
  for (const auto& t : traces) wl.push_back(t.workload);
  for (const auto& t : types) ty.push_back(t.name);
  head.add("workloads", join(wl));
  head.add("types", join(ty));

  std::map<Policy, std::pair<double, double>> power;  // peak, avg
  std::map<Policy, std::pair<double, double>> servers;
  for (const auto& tl : out.timelines) {
    kv::Section& s = add_policy_summary(doc, to_string(tl.policy), tl.peak_power_w(), tl.avg_power_w(),
                                        tl.peak_servers(), tl.avg_servers());
    s.add("demand_violations", std::to_string(tl.demand_violations()));
    s.add("availability_violations", std::to_string(tl.availability_violations()));
    s.add("infeasible_intervals", std::to_string(tl.infeasible_intervals()));
    int shortfalls = 0;
    for (const auto& r : tl.intervals) shortfalls += r.coverage_shortfalls;
    s.add("coverage_shortfalls", std::to_string(shortfalls));
    power[tl.policy] = {tl.peak_power_w(), tl.avg_power_w()};
    servers[tl.policy] = {static_cast<double>(tl.peak_servers()), tl.avg_servers()};
  }
  if (want_nh) {
    const ProvisionTimeline& first =
        out.timelines[std::find(policies.begin(), policies.end(), Policy::kNh) - policies.begin()];
    const std::size_t len = first.intervals.size();
    out.nh_mean_power_w.assign(len, 0.0);
    std::vector<double> mean_servers(len, 0.0);
    auto accumulate = [&](const ProvisionTimeline& tl) {
      for (std::size_t k = 0; k < len; ++k) {
        out.nh_mean_power_w[k] += tl.intervals[k].power_w / cfg.nh_seeds;
        mean_servers[k] += static_cast<double>(tl.intervals[k].servers) / cfg.nh_seeds;
      }
    };
    accumulate(first);
    for (int i = static_cast<int>(policies.size()); i < n; ++i) accumulate(runs[i]);
    const double peak = *std::max_element(out.nh_mean_power_w.begin(), out.nh_mean_power_w.end());
    double avg = 0.0, peak_n = 0.0, avg_n = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      avg += out.nh_mean_power_w[k] / len;
      peak_n = std::max(peak_n, mean_servers[k]);
      avg_n += mean_servers[k] / len;
    }
    kv::Section& s = doc.add_section("policy", "nh_mean");
    s.add("draws", std::to_string(cfg.nh_seeds));
    s.add("peak_power_w", kv::format_number(peak));
    s.add("avg_power_w", kv::format_number(avg));
    s.add("peak_servers", kv::format_number(peak_n));
    s.add("avg_servers", kv::format_number(avg_n));
    // Comparisons against NH use the expectation over draws.
    power[Policy::kNh] = {peak, avg};
    servers[Policy::kNh] = {peak_n, avg_n};
  }

  kv::Section& sv = doc.add_section("savings");
  auto compare = [&](Policy better, Policy base) {
    if (!power.count(better) || !power.count(base)) return;
    const std::string key = fmt::format("{}_vs_{}", to_string(better), to_string(base));
    sv.add(key + "_peak_power_pct", kv::format_number(savings_percent(power[base].first, power[better].first)));
    sv.add(key + "_avg_power_pct", kv::format_number(savings_percent(power[base].second, power[better].second)));
    sv.add(key + "_peak_servers_pct",
           kv::format_number(savings_percent(servers[base].first, servers[better].first)));
    sv.add(key + "_avg_servers_pct",
           kv::format_number(savings_percent(servers[base].second, servers[better].second)));
  };
  compare(Policy::kGreedy, Policy::kNh);
  compare(Policy::kPriority, Policy::kGreedy);
  compare(Policy::kHercules, Policy::kGreedy);
  compare(Policy::kHercules, Policy::kNh);
  return out;
}

EvolveRun run_evolve(const ExperimentConfig& cfg, const EfficiencyTable& table) {
  require_valid(cfg);
  const std::vector<std::pair<std::string, std::vector<std::string>>> clusters{
      {"cpu", cfg.evolve.cpu_servers}, {"accel", cfg.evolve.accel_servers}};
  const int n = static_cast<int>(cfg.evolve.shifts.size() * clusters.size());
  EvolveRun out;
  out.points.resize(n);
  parallel_for(n, cfg.jobs, [&](int i) {
    const double f = cfg.evolve.shifts[i / clusters.size()];
    const auto& [name, servers] = clusters[i % clusters.size()];
    // Zero-load workloads stay in the trace set so every snapshot has the
    // same columns.
    const auto traces = scenario_traces(cfg, cfg.evolve.snapshot(f), cfg.evolve.days);
    const auto tl = run_cluster_sim(traces, table, resolve_servers(cfg, servers), Policy::kHercules, cfg.cluster);
    EvolvePoint& p = out.points[i];
    p.shift = f;
    p.cluster = name;
    p.peak_power_w = tl.peak_power_w();
    p.avg_power_w = tl.avg_power_w();
    p.peak_servers = tl.peak_servers();
    p.avg_servers = tl.avg_servers();
    p.infeasible_intervals = tl.infeasible_intervals();
  });
  out.text = "# shift cluster peak_power_w avg_power_w peak_servers avg_servers infeasible_intervals\n";
  for (const auto& p : out.points) {
    out.text += fmt::format("{} {} {} {} {} {} {}\n", kv::format_number(p.shift), p.cluster,
                            kv::format_number(p.peak_power_w), kv::format_number(p.avg_power_w), p.peak_servers,
                            kv::format_number(p.avg_servers), p.infeasible_intervals);
  }
  kv::Section& head = out.summary.add_section("evolve", cfg.scenario);
  head.add("seed", std::to_string(cfg.seed));
  head.add("sources", join(cfg.evolve.sources));
  head.add("targets", join(cfg.evolve.targets));
  head.add("total_peak_qps", kv::format_number(cfg.evolve.total_peak_qps));
  for (const auto& [name, servers] : clusters) {
    const EvolvePoint* base = nullptr;
    const EvolvePoint* last = nullptr;
    for (const auto& p : out.points) {
      if (p.cluster != name) continue;
      if (!base) base = &p;
      last = &p;
    }
    if (!base) continue;
    kv::Section& s = out.summary.add_section("trend", name);
    s.add("servers", join(servers));
    s.add("first_shift", kv::format_number(base->shift));
    s.add("last_shift", kv::format_number(last->shift));
    s.add("peak_power_ratio", kv::format_number(base->peak_power_w > 0 ? last->peak_power_w / base->peak_power_w : 0));
    s.add("avg_power_ratio", kv::format_number(base->avg_power_w > 0 ? last->avg_power_w / base->avg_power_w : 0));
    s.add("peak_servers_ratio",
          kv::format_number(base->peak_servers > 0 ? static_cast<double>(last->peak_servers) / base->peak_servers : 0));
    int infeasible = 0;
    for (const auto& p : out.points) {
      if (p.cluster == name) infeasible += p.infeasible_intervals;
    }
    s.add("infeasible_intervals", std::to_string(infeasible));
  }
  return out;
}

}  // namespace hercules
