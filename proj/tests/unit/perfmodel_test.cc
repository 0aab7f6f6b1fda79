#include <doctest.h>

#include <cmath>
#include <limits>

#include "hercules/analytic.h"
#include "hercules/catalog.h"
#include "hercules/error.h"
#include "hercules/partitioner.h"
#include "hercules/perfmodel.h"
#include "hercules/pipeline.h"
#include "hercules/serversim.h"

using namespace hercules;

namespace {

SchedConfig host(int m, int o, int d, Strategy s = Strategy::kModelBased) {
  SchedConfig c;
  c.strategy = s;
  c.host = {m, o, d};
  return c;
}

}  // namespace

TEST_CASE("operator efficiency and interference") {
  CHECK(op_efficiency(1) == 1.0);
  CHECK(op_efficiency(2) == 0.75);
  CHECK(op_efficiency(3) == 0.55);
  CHECK(op_efficiency(4) == 0.26);
  CHECK(op_efficiency(8) == 0.2);
  CHECK(interference(1, 1, 20) == 1.0);
  CHECK(interference(20, 1, 20) == doctest::Approx(1.0 / 1.25));
  CHECK(mps_efficiency(1) == 1.0);
  CHECK(mps_efficiency(2) == doctest::Approx(0.85));
}

TEST_CASE("dense latency") {
  const Catalog c = builtin_catalog();
  const ModelSpec& m = c.model("DLRM-RMC1");
  const ServerSpec& t2 = c.server("T2");
  const double t1 = dense_latency(m, t2, host(1, 1, 64), 64);
  CHECK(t1 / dense_latency(m, t2, host(1, 2, 64), 64) == doctest::Approx(1.5));
  CHECK(dense_latency(m, t2, host(1, 1, 64), 128) == doctest::Approx(2 * t1).epsilon(0.05));
  CHECK(dense_latency(m, t2, host(1, 1, 64), 128) > t1);
}

TEST_CASE("sparse latency and NMP") {
  const Catalog c = builtin_catalog();
  const ServerSpec& t2 = c.server("T2");
  const ServerSpec& t5 = c.server("T5");
  const ModelSpec& wnd = c.model("MT-WnD");
  CHECK(sparse_latency(wnd, t2, host(1, 1, 64), 64) == doctest::Approx(sparse_latency(wnd, t5, host(1, 1, 64), 64)));
  const ModelSpec& rmc2 = c.model("DLRM-RMC2");
  CHECK(sparse_latency(rmc2, t5, host(1, 1, 64), 64) < sparse_latency(rmc2, t2, host(1, 1, 64), 64));
  CHECK(sparse_latency(rmc2, t2, host(1, 1, 64), 2) == doctest::Approx(2 * sparse_latency(rmc2, t2, host(1, 1, 64), 1)));
}

TEST_CASE("accelerator stages") {
  const Catalog c = builtin_catalog();
  const ServerSpec& t7 = c.server("T7");
  SchedConfig one;
  one.strategy = Strategy::kSDHostAccel;
  one.accel = AccelCfg{1, 256};
  SchedConfig two = one;
  two.accel = AccelCfg{2, 256};
  const ModelSpec& rmc3 = c.model("DLRM-RMC3");
  const auto a = accel_stage_latencies(rmc3, t7, one, 256);
  const auto b = accel_stage_latencies(rmc3, t7, two, 256);
  CHECK(b.data_load_s == doctest::Approx(2 * a.data_load_s));
  const auto w = accel_stage_latencies(c.model("MT-WnD"), t7, one, 256);
  CHECK(w.data_load_s / w.total() < a.data_load_s / a.total());
}

TEST_CASE("power draw") {
  const ServerSpec t2 = builtin_catalog().server("T2");
  CHECK(power_draw(t2, host(1, 1, 16), {0, 0, 0}) == doctest::Approx(52.5));
  CHECK(power_draw(t2, host(1, 1, 16), {1, 1, 0}) == doctest::Approx(175));
  CHECK(power_draw(t2, host(1, 1, 16), {0.5, 0.2, 0}) < power_draw(t2, host(1, 1, 16), {0.6, 0.2, 0}));
}

TEST_CASE("config bounds") {
  const ServerSpec t2 = builtin_catalog().server("T2");
  CHECK(config_fits(host(20, 1, 16), t2));
  CHECK_FALSE(config_fits(host(11, 2, 16), t2));
  CHECK_THROWS_AS(check_config(host(0, 1, 16), t2), PreconditionError);
  SchedConfig acc;
  acc.strategy = Strategy::kSDHostAccel;
  acc.accel = AccelCfg{1, 64};
  CHECK_FALSE(config_fits(acc, t2));
}

TEST_CASE("zipf profile matches the harmonic oracle") {
  CHECK(generalized_harmonic(1, 1) == 1);
  CHECK(generalized_harmonic(3, 1) == doctest::Approx(1 + 0.5 + 1.0 / 3));
  // Euler-Maclaurin tail against the direct sum.
  double direct = 0;
  for (int i = 200000; i >= 1; --i) direct += 1.0 / i;
  CHECK(generalized_harmonic(200000, 1) == doctest::Approx(direct).epsilon(1e-12));
  TableProfile t;
  t.rows = 1000000;
  t.zipf_s = 1;
  CHECK(t.top_k_mass(100000) == doctest::Approx(generalized_harmonic(100000, 1) / generalized_harmonic(1e6, 1)));
  t.zipf_s = 1e-6;
  CHECK(t.top_k_mass(100000) == doctest::Approx(0.1).epsilon(1e-3));
  const ModelSpec m = builtin_catalog().model("DLRM-RMC2");
  const auto p1 = build_access_profile(m, 0.9, 4);
  const auto p2 = build_access_profile(m, 0.9, 4);
  REQUIRE(p1.tables.size() == p2.tables.size());
  for (std::size_t i = 0; i < p1.tables.size(); ++i) {
    CHECK(p1.tables[i].row_at(1) == p2.tables[i].row_at(1));
    CHECK(p1.tables[i].row_at(7) == p2.tables[i].row_at(7));
  }
  CHECK_THROWS_AS(build_access_profile(m, 0.0, 4), PreconditionError);
}

TEST_CASE("partition budget") {
  const Catalog c = builtin_catalog();
  const ServerSpec& t7 = c.server("T7");
  const ModelSpec& rmc3 = c.model("DLRM-RMC3");
  const auto prof = build_access_profile(rmc3, 0.9, 1);
  const auto p4 = partition_model(rmc3, t7, 4, prof);
  CHECK(p4.budget_bytes + p4.dense.weight_bytes == doctest::Approx(4e9));
  CHECK(p4.hot_bytes <= p4.budget_bytes);
  const auto p1 = partition_model(rmc3, t7, 1, prof);
  CHECK(p1.hot_hit_rate < 1.0);
  CHECK(p1.hot_bytes <= 16e9 - p1.dense.weight_bytes);
  for (std::size_t i = 0; i < p1.sparse_hot.size(); ++i) CHECK(p1.sparse_hot[i] < p1.sparse_full[i]);
  CHECK(p4.hot_hit_rate < p1.hot_hit_rate);

  const ModelSpec& rmc1 = c.model("DLRM-RMC1");
  const auto small = build_access_profile(rmc1, 0.9, 1, SizeClass::kSmall);
  const auto full = partition_model(rmc1, t7, 1, small);
  CHECK(full.sparse_hot == full.sparse_full);
  CHECK(full.hot_hit_rate == 1.0);

  ServerSpec tiny = t7;
  tiny.accel->hbm_gb = rmc3.dense_weights() * 4 / 2e9;
  CHECK_THROWS_AS(partition_model(rmc3, tiny, 1, prof), InfeasibleError);
  CHECK(host_plan(rmc3, prof).hot_bytes == 0.0);
}

TEST_CASE("strategy enumeration") {
  const Catalog c = builtin_catalog();
  const auto cpu = enumerate_strategies(c.model("DLRM-RMC1"), c.server("T2"));
  CHECK(cpu.size() == 2);
  const auto acc = enumerate_strategies(c.model("DLRM-RMC1"), c.server("T7"));
  CHECK(acc.size() >= 3);
  ServerSpec tiny = c.server("T7");
  tiny.accel->hbm_gb = 1e-6;
  for (const auto& s : enumerate_strategies(c.model("DLRM-RMC3"), tiny)) CHECK_FALSE(uses_accel(s.kind));
  for (const auto& s : acc) CHECK(scheduling_strategy_from_string(s.name()) == s);
}

TEST_CASE("simulator determinism and conservation") {
  const Catalog c = builtin_catalog();
  const ModelSpec& m = c.model("DLRM-RMC1");
  const ServerSpec& t2 = c.server("T2");
  const SchedConfig cfg = host(4, 2, 64);
  const auto stream = gen_query_stream(300, 2, m, 11);
  const auto plan = plan_for(m, t2, cfg);
  SimOptions opt;
  opt.keep_latencies = true;
  const auto a = simulate(t2, m, plan, cfg, stream, 2, 1, opt);
  const auto b = simulate(t2, m, plan, cfg, stream, 2, 1, opt);
  CHECK(a.latencies == b.latencies);
  CHECK(a.tail_latency_s == b.tail_latency_s);
  CHECK(a.arrivals == static_cast<std::int64_t>(stream.size()));
  SimOptions all;
  all.warmup_frac = 0.0;
  const auto m_all = simulate(t2, m, plan, cfg, stream, 2, 1, all);
  CHECK(m_all.arrivals == m_all.completed + m_all.dropped + m_all.in_flight);
  CHECK(a.peak_power_w >= a.avg_power_w);
  CHECK_THROWS_AS(simulate(t2, m, plan, host(30, 1, 64), stream, 2, 1), PreconditionError);
  CHECK_THROWS_AS(simulate(t2, m, plan, cfg, {}, 2, 1), PreconditionError);
}

TEST_CASE("a lone query sees no queueing") {
  const Catalog c = builtin_catalog();
  const ModelSpec& m = c.model("DLRM-RMC1");
  const ServerSpec& t2 = c.server("T2");
  const SchedConfig cfg = host(1, 1, 1000);
  StreamOptions so;
  so.deterministic = true;
  auto stream = gen_query_stream(1, 1, m, 1, so);
  stream.resize(1);
  SimOptions opt;
  opt.warmup_frac = 0;
  opt.keep_latencies = true;
  const auto r = simulate(t2, m, plan_for(m, t2, cfg), cfg, stream, 1, 1, opt);
  REQUIRE(r.latencies.size() == 1);
  CHECK(r.latency_breakdown.queueing_s == doctest::Approx(0.0));
  CHECK(r.latencies[0] > 0);
}

TEST_CASE("unbounded fusion wait strands a small query") {
  const Catalog c = builtin_catalog();
  const ModelSpec& m = c.model("DLRM-RMC1");
  const ServerSpec& t7 = c.server("T7");
  Calibration cal = default_calibration();
  cal.fusion_timeout_frac = std::numeric_limits<double>::infinity();
  SchedConfig cfg;
  cfg.strategy = Strategy::kSDHostAccel;
  cfg.host = {1, 1, 1000};
  cfg.accel = AccelCfg{1, 4096};
  StreamOptions so;
  so.deterministic = true;
  auto stream = gen_query_stream(1, 1, m, 1, so);
  stream.resize(1);
  SimOptions opt;
  opt.warmup_frac = 0;
  opt.drain_s = 5;
  const auto r = simulate(t7, m, plan_for(m, t7, cfg, cal), cfg, stream, 1, 1, opt, cal);
  CHECK(r.completed == 0);
  CHECK(r.dropped + r.in_flight == 1);
  CHECK(std::isinf(r.tail_latency_s));
}

TEST_CASE("analytic model limits") {
  const Catalog c = builtin_catalog();
  const ModelSpec& m = c.model("DLRM-RMC2");
  const ServerSpec& t2 = c.server("T2");
  const Pipeline p = build_pipeline(m, t2, host(4, 1, 64));
  const LaneModel lane = model_lane(p, 0);
  CHECK(lane.tail_at(0.0, 2.5) == doctest::Approx(lane.base_tail_s));
  double prev = 0;
  for (double f : {0.1, 0.5, 0.9, 0.99}) {
    const double t = analytic_eval(p, t2, f * lane.sat_qps).tail_latency_s;
    CHECK(t > prev);
    prev = t;
  }
  const auto sat = analytic_eval(p, t2, 2 * lane.sat_qps);
  CHECK(sat.saturated);
  CHECK(std::isinf(sat.tail_latency_s));
}

TEST_CASE("op parallelism beats more single-core threads on RMC1") {
  const Catalog c = builtin_catalog();
  const ModelSpec& m = c.model("DLRM-RMC1");
  const ServerSpec& t2 = c.server("T2");
  // Best batch per layout on the analytic model, then the simulator checks
  // the chosen points.
  auto best = [&](int mm, int o) {
    double q = 0;
    int bd = 16;
    for (int d = 16; d <= 4096; d *= 2) {
      const auto r = analytic_latency_bounded_qps(build_pipeline(m, t2, host(mm, o, d)), t2, 0.020);
      if (r.qps > q) {
        q = r.qps;
        bd = d;
      }
    }
    return std::pair{q, bd};
  };
  const auto [q20, d20] = best(20, 1);
  const auto [q10, d10] = best(10, 2);
  CHECK(q10 >= q20);
  SimSearchOptions so;
  so.target_queries = 4000;
  const auto s20 = measure_latency_bounded_qps(t2, m, host(20, 1, d20), 20, std::nullopt, 1, so);
  const auto s10 = measure_latency_bounded_qps(t2, m, host(10, 2, d10), 20, std::nullopt, 1, so);
  CHECK(s10.qps >= s20.qps * 0.98);
}

TEST_CASE("simulated saturation matches the closed form in deterministic mode") {
  const Catalog c = builtin_catalog();
  const ModelSpec& m = c.model("DLRM-RMC1");
  const ServerSpec& t2 = c.server("T2");
  const SchedConfig cfg = host(4, 1, 1000);
  const Pipeline p = build_pipeline(m, t2, cfg);
  const double sat = model_lane(p, 0).sat_qps;
  SimSearchOptions so;
  so.stream.deterministic = true;
  so.target_queries = 4000;
  const auto r = measure_latency_bounded_qps(t2, m, cfg, 1e6, std::nullopt, 1, so);
  CHECK(r.qps == doctest::Approx(sat).epsilon(0.02));
  const auto none = measure_latency_bounded_qps(t2, m, cfg, 1e-6, std::nullopt, 1, so);
  CHECK(none.qps == 0.0);
  CHECK(none.violation);
}
