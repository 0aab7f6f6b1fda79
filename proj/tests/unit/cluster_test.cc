#include <doctest.h>

#include <cmath>

#include "hercules/catalog.h"
#include "hercules/cluster.h"
#include "hercules/error.h"
#include "hercules/experiment.h"

using namespace hercules;

namespace {

const ExperimentConfig& host_cfg() {
  static const ExperimentConfig c = [] {
    ExperimentConfig cfg = builtin_scenario("evolve");
    cfg.servers = {"T1", "T2", "T3", "T4", "T5"};
    cfg.evolve.accel_servers = cfg.evolve.cpu_servers;
    cfg.evolve.shifts = {0.0, 0.2, 1.0};
    return cfg;
  }();
  return c;
}

// Every model on the CPU-only types.
const EfficiencyTable& host_table() {
  static const EfficiencyTable t = run_profile(host_cfg()).table;
  return t;
}

LoadTrace flat(const std::string& w, double qps, int points, double step) {
  LoadTrace t;
  t.workload = w;
  t.interval_s = step;
  for (int i = 0; i < points; ++i) t.points.push_back({i * step, qps});
  return t;
}

std::vector<ServerSpec> types(const std::vector<std::string>& names) {
  const Catalog c = builtin_catalog();
  std::vector<ServerSpec> out;
  for (const auto& n : names) out.push_back(c.server(n));
  return out;
}

}  // namespace

TEST_CASE("constant load settles after the first interval") {
  const auto tr = {flat("DLRM-RMC1", 20000, 49, 1800), flat("DIN", 3000, 49, 1800)};
  for (Policy pol : {Policy::kHercules, Policy::kGreedy, Policy::kPriority, Policy::kNh}) {
    const auto tl = run_cluster_sim(tr, host_table(), types({"T2", "T3", "T4"}), pol);
    REQUIRE(tl.intervals.size() == 49);
    for (std::size_t k = 1; k < tl.intervals.size(); ++k) {
      CHECK(tl.intervals[k].allocation.n == tl.intervals[0].allocation.n);
      CHECK(tl.intervals[k].activations == 0);
      CHECK(tl.intervals[k].releases == 0);
    }
    CHECK(tl.demand_violations() == 0);
  }
}

TEST_CASE("activations minus releases track the fleet") {
  const auto tr = {gen_diurnal_trace(30000, 2, 0.3, 0.02, 300, 1, "DLRM-RMC1"),
                   gen_diurnal_trace(8000, 2, 0.3, 0.02, 300, 2, "DLRM-RMC2")};
  for (Policy pol : {Policy::kHercules, Policy::kGreedy}) {
    const auto tl = run_cluster_sim(tr, host_table(), types({"T2", "T3", "T4", "T5"}), pol);
    int net = 0;
    for (const auto& r : tl.intervals) net += r.activations - r.releases;
    CHECK(net == tl.intervals.back().servers);
    CHECK(tl.availability_violations() == 0);
  }
}

TEST_CASE("no setup lag at trace resolution leaves no shortfall") {
  const auto tr = {gen_diurnal_trace(30000, 1, 0.3, 0.02, 600, 1, "DLRM-RMC1")};
  ClusterOptions opt;
  opt.setup_delay_s = 0;
  opt.interval_s = 600;
  opt.r_percent = 0;
  const auto tl = run_cluster_sim(tr, host_table(), types({"T2", "T3"}), Policy::kHercules, opt);
  for (const auto& r : tl.intervals) CHECK(r.coverage_shortfalls == 0);
  CHECK(tl.demand_violations() == 0);
}

TEST_CASE("zero load gives an empty timeline") {
  const auto tr = {flat("DLRM-RMC1", 0, 10, 1800)};
  const auto tl = run_cluster_sim(tr, host_table(), types({"T2"}), Policy::kHercules);
  CHECK(tl.peak_power_w() == 0);
  CHECK(tl.peak_servers() == 0);
}

TEST_CASE("misaligned traces are rejected") {
  auto a = flat("DLRM-RMC1", 10, 4, 1800);
  auto b = flat("DIN", 10, 4, 1800);
  for (auto& p : b.points) p.time_s += 60;
  CHECK_THROWS_AS(run_cluster_sim({a, b}, host_table(), types({"T2"}), Policy::kGreedy), PreconditionError);
}

TEST_CASE("estimated headroom falls back while the window is short") {
  const auto tr = {gen_diurnal_trace(30000, 3, 0.3, 0.02, 300, 1, "DLRM-RMC1")};
  ClusterOptions opt;
  opt.r_mode = RMode::kEstimated;
  const auto tl = run_cluster_sim(tr, host_table(), types({"T2", "T3"}), Policy::kHercules, opt);
  CHECK(tl.intervals[0].r_percent[0] == opt.r_percent);
  CHECK(tl.intervals.back().r_percent[0] != opt.r_percent);
  CHECK(tl.demand_violations() == 0);
}

TEST_CASE("timeline text") {
  const auto tr = {flat("DLRM-RMC1", 20000, 3, 1800)};
  const auto tl = run_cluster_sim(tr, host_table(), types({"T2", "T3"}), Policy::kGreedy);
  const std::string text = tl.to_text();
  CHECK(text.rfind("# policy greedy\n", 0) == 0);
  CHECK(text.find("[summary greedy]") != std::string::npos);
  CHECK(tl.to_text() == text);
}

TEST_CASE("scenario configs") {
  for (const auto& n : builtin_scenario_names()) CHECK(validate_experiment(builtin_scenario(n)).empty());
  CHECK_THROWS_AS(builtin_scenario("nope"), ConfigError);
  const auto cfg = parse_experiment(kv::Document::parse(
      "[experiment]\nscenario = dual\nseed = 4\npolicies = greedy,hercules\n[availability]\nT3 = 2\n"
      "[workload DIN]\npeak_qps = 5K\n"));
  CHECK(cfg.seed == 4);
  CHECK(cfg.policies == std::vector<std::string>{"greedy", "hercules"});
  CHECK(cfg.catalog.server("T3").availability == 2);
  REQUIRE(cfg.workloads.size() == 1);
  CHECK(cfg.workloads[0].peak_qps == 5000);
  ExperimentConfig bad = builtin_scenario("dual");
  bad.workloads.push_back({"NoSuchModel", 10, ""});
  bad.evolve.shifts = {1.5};
  CHECK(validate_experiment(bad).size() >= 2);
  CHECK_THROWS_AS(require_valid(bad), ConfigError);
  CHECK_THROWS_AS(parse_experiment(kv::Document::parse("[experiment]\nbogus = 1\n")), ConfigError);
}

TEST_CASE("evolve snapshots") {
  EvolveSpec e;
  auto sum = [](const std::vector<WorkloadSpec>& w) {
    double s = 0;
    for (const auto& x : w) s += x.peak_qps;
    return s;
  };
  for (double f : {0.0, 0.3, 1.0}) CHECK(sum(e.snapshot(f)) == doctest::Approx(e.total_peak_qps));
  for (const auto& w : e.snapshot(0.0)) {
    const bool target = w.model == "DIN" || w.model == "DIEN" || w.model == "MT-WnD";
    CHECK((target ? w.peak_qps == 0 : w.peak_qps > 0));
  }
  for (const auto& w : e.snapshot(1.0)) {
    const bool target = w.model == "DIN" || w.model == "DIEN" || w.model == "MT-WnD";
    CHECK((target ? w.peak_qps > 0 : w.peak_qps == 0));
  }
}

TEST_CASE("shifting load to the new models grows a CPU-only cluster") {
  const auto run = run_evolve(host_cfg(), host_table());
  const EvolvePoint *base = nullptr, *shifted = nullptr;
  for (const auto& p : run.points) {
    if (p.cluster != "cpu") continue;
    if (p.shift == 0.0) base = &p;
    if (std::fabs(p.shift - 0.2) < 1e-12) shifted = &p;
  }
  REQUIRE(base);
  REQUIRE(shifted);
  CHECK(shifted->peak_servers > base->peak_servers);
  CHECK(shifted->peak_power_w > base->peak_power_w);
  CHECK(run_evolve(host_cfg(), host_table()).text == run.text);
}

TEST_CASE("serve runs") {
  ExperimentConfig cfg = builtin_scenario("dual");
  cfg.cluster_servers = {"T2", "T3"};
  cfg.days = 1;
  const auto run = run_serve(cfg, host_table());
  CHECK(run.timelines.size() == 4);
  CHECK(run.nh_mean_power_w.size() == run.timelines[0].intervals.size());
  CHECK(run.summary.find("savings") != nullptr);
  cfg.policies = {"greedy"};
  CHECK(run_serve(cfg, host_table()).timelines.size() == 1);
  CHECK(savings_percent(100, 40) == doctest::Approx(60));
  CHECK(savings_percent(0, 40) == 0);
}
