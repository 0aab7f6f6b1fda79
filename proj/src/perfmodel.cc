#include "hercules/perfmodel.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace hercules {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kModelBased:
      return "ModelBased";
    case Strategy::kSDHostOnly:
      return "SDPipelineHostOnly";
    case Strategy::kSDHostAccel:
      return "SDPipelineHostAccel";
    case Strategy::kHotDenseOnAccel:
      return "HotDenseOnAccel";
  }
  return "ModelBased";
}

Strategy strategy_from_string(const std::string& s) {
  for (Strategy v : {Strategy::kModelBased, Strategy::kSDHostOnly, Strategy::kSDHostAccel,
                     Strategy::kHotDenseOnAccel}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError("strategy", 0, fmt::format("unknown strategy '{}'", s));
}

bool uses_accel(Strategy s) {
  return s == Strategy::kSDHostAccel || s == Strategy::kHotDenseOnAccel;
}

std::string describe(const SchedConfig& c) {
  std::string out = fmt::format("{} host={}x{} d={}", to_string(c.strategy), c.host.m, c.host.o, c.host.d);
  if (c.accel) out += fmt::format(" accel={} d={}", c.accel->m, c.accel->d);
  if (c.leftover) {
    out += fmt::format(" leftover={} {}x{} d={}", to_string(c.leftover->strategy), c.leftover->host.m,
                       c.leftover->host.o, c.leftover->host.d);
  }
  return out;
}

void check_config(const SchedConfig& cfg, const ServerSpec& server) {
  auto fail = [&](const std::string& what) {
    throw PreconditionError(fmt::format("config '{}' invalid on {}: {}", describe(cfg), server.name, what));
  };
  const HostCfg& h = cfg.host;
  if (h.m < 1 || h.o < 1 || h.d < 1) fail("host counts must be >= 1");
  const int cores = server.cpu.cores;
  int used = h.m * h.o;
  if (cfg.strategy == Strategy::kSDHostOnly && used >= cores) fail("no core left for dense threads");
  if (cfg.leftover) {
    if (cfg.strategy != Strategy::kHotDenseOnAccel) fail("leftover lane only applies to HotDenseOnAccel");
    const HostCfg& l = cfg.leftover->host;
    if (l.m < 1 || l.o < 1 || l.d < 1) fail("leftover counts must be >= 1");
    if (cfg.leftover->strategy != Strategy::kModelBased && cfg.leftover->strategy != Strategy::kSDHostOnly) {
      fail("leftover lane must be ModelBased or SDPipelineHostOnly");
    }
    used += l.m * l.o + (cfg.leftover->strategy == Strategy::kSDHostOnly ? 1 : 0);
  }
  if (used > cores) fail(fmt::format("uses {} cores of {}", used, cores));
  if (uses_accel(cfg.strategy)) {
    if (!server.accel) fail("server has no accelerator");
    if (!cfg.accel) fail("accelerator settings missing");
    if (cfg.accel->m < 1 || cfg.accel->d < 1) fail("accelerator counts must be >= 1");
  } else if (cfg.accel) {
    fail("accelerator settings on a host-only strategy");
  }
}

bool config_fits(const SchedConfig& cfg, const ServerSpec& server) {
  try {
    check_config(cfg, server);
    return true;
  } catch (const PreconditionError&) {
    return false;
  }
}

int dense_threads(const SchedConfig& cfg, const ServerSpec& server) {
  if (cfg.strategy != Strategy::kSDHostOnly) return 0;
  return server.cpu.cores - cfg.host.m * cfg.host.o;
}

StageLatency& StageLatency::operator+=(const StageLatency& o) {
  queueing_s += o.queueing_s;
  data_load_s += o.data_load_s;
  compute_s += o.compute_s;
  comm_s += o.comm_s;
  return *this;
}

const Calibration& default_calibration() {
  static const Calibration c{};
  return c;
}

namespace {

const std::vector<std::string> kCalibrationKeys = {
    "eff_1",           "eff_2",          "eff_3",          "eff_4",
    "eff_floor",       "interf_alpha",   "interf_beta",    "mps_base",
    "idle_frac",       "launch_overhead_s", "cpu_op_overhead_s", "elem_bytes",
    "index_bytes",     "offset_bytes",   "core_gather_gbps", "memcpy_gbps",
    "fusion_discount", "fusion_timeout_frac", "tail_percentile", "queue_factor",
    "zipf_s",          "size_log_mean",  "size_log_sigma", "size_min",
    "size_max"};

}  // namespace

Calibration parse_calibration(const kv::Document& doc, Calibration c) {
  const kv::Section* s = doc.find("calibration");
  if (!s) return c;
  s->reject_unknown(kCalibrationKeys);
  for (int i = 0; i < 4; ++i) {
    if (auto v = s->get_double(fmt::format("eff_{}", i + 1))) c.eff[i] = *v;
  }
  auto set = [&](const char* key, double& dst) {
    if (auto v = s->get_double(key)) dst = *v;
  };
  auto set_int = [&](const char* key, int& dst) {
    if (auto v = s->get_int(key)) dst = static_cast<int>(*v);
  };
  set("eff_floor", c.eff_floor);
  set("interf_alpha", c.interf_alpha);
  set("interf_beta", c.interf_beta);
  set("mps_base", c.mps_base);
  set("idle_frac", c.idle_frac);
  set("launch_overhead_s", c.launch_overhead_s);
  set("cpu_op_overhead_s", c.cpu_op_overhead_s);
  set_int("elem_bytes", c.elem_bytes);
  set_int("index_bytes", c.index_bytes);
  set_int("offset_bytes", c.offset_bytes);
  set("core_gather_gbps", c.core_gather_gbps);
  set("memcpy_gbps", c.memcpy_gbps);
  set("fusion_discount", c.fusion_discount);
  set("fusion_timeout_frac", c.fusion_timeout_frac);
  set("tail_percentile", c.tail_percentile);
  set("queue_factor", c.queue_factor);
  set("zipf_s", c.zipf_s);
  set("size_log_mean", c.sizes.log_mean);
  set("size_log_sigma", c.sizes.log_sigma);
  set("size_min", c.sizes.min_items);
  set("size_max", c.sizes.max_items);

  auto require = [&](bool ok, const char* key, const char* what) {
    if (!ok) s->fail(key, what);
  };
  for (int i = 0; i < 4; ++i) require(c.eff[i] > 0 && c.eff[i] <= 1, "eff_1", "efficiencies must lie in (0, 1]");
  require(c.eff_floor > 0 && c.eff_floor <= 1, "eff_floor", "must lie in (0, 1]");
  require(c.interf_alpha >= 0, "interf_alpha", "must be >= 0");
  require(c.mps_base > 0 && c.mps_base <= 1, "mps_base", "must lie in (0, 1]");
  require(c.idle_frac >= 0 && c.idle_frac <= 1, "idle_frac", "must lie in [0, 1]");
  require(c.launch_overhead_s >= 0, "launch_overhead_s", "must be >= 0");
  require(c.cpu_op_overhead_s >= 0, "cpu_op_overhead_s", "must be >= 0");
  require(c.elem_bytes > 0 && c.index_bytes > 0 && c.offset_bytes >= 0, "elem_bytes", "widths must be > 0");
  require(c.core_gather_gbps > 0, "core_gather_gbps", "must be > 0");
  require(c.memcpy_gbps > 0, "memcpy_gbps", "must be > 0");
  require(c.fusion_discount >= 0 && c.fusion_discount < 1, "fusion_discount", "must lie in [0, 1)");
  require(c.fusion_timeout_frac > 0, "fusion_timeout_frac", "must be > 0");
  require(c.tail_percentile > 0 && c.tail_percentile < 1, "tail_percentile", "must lie in (0, 1)");
  require(c.queue_factor >= 0, "queue_factor", "must be >= 0");
  require(c.zipf_s > 0, "zipf_s", "must be > 0");
  require(c.sizes.log_sigma > 0, "size_log_sigma", "must be > 0");
  require(c.sizes.min_items >= 1 && c.sizes.max_items >= c.sizes.min_items, "size_min",
          "size bounds must satisfy 1 <= min <= max");
  return c;
}

void write_calibration(const Calibration& c, kv::Document& doc) {
  using kv::format_number;
  kv::Section& s = doc.add_section("calibration");
  for (int i = 0; i < 4; ++i) s.add(fmt::format("eff_{}", i + 1), format_number(c.eff[i]));
  s.add("eff_floor", format_number(c.eff_floor));
  s.add("interf_alpha", format_number(c.interf_alpha));
  s.add("interf_beta", format_number(c.interf_beta));
  s.add("mps_base", format_number(c.mps_base));
  s.add("idle_frac", format_number(c.idle_frac));
  s.add("launch_overhead_s", format_number(c.launch_overhead_s));
  s.add("cpu_op_overhead_s", format_number(c.cpu_op_overhead_s));
  s.add("elem_bytes", std::to_string(c.elem_bytes));
  s.add("index_bytes", std::to_string(c.index_bytes));
  s.add("offset_bytes", std::to_string(c.offset_bytes));
  s.add("core_gather_gbps", format_number(c.core_gather_gbps));
  s.add("memcpy_gbps", format_number(c.memcpy_gbps));
  s.add("fusion_discount", format_number(c.fusion_discount));
  s.add("fusion_timeout_frac", format_number(c.fusion_timeout_frac));
  s.add("tail_percentile", format_number(c.tail_percentile));
  s.add("queue_factor", format_number(c.queue_factor));
  s.add("zipf_s", format_number(c.zipf_s));
  s.add("size_log_mean", format_number(c.sizes.log_mean));
  s.add("size_log_sigma", format_number(c.sizes.log_sigma));
  s.add("size_min", format_number(c.sizes.min_items));
  s.add("size_max", format_number(c.sizes.max_items));
}

double op_efficiency(int o, const Calibration& c) {
  if (o <= 0) throw PreconditionError("op_efficiency: o must be >= 1");
  if (o <= 4) return c.eff[o - 1];
  const double slope = c.eff[3] - c.eff[2];
  return std::max(c.eff_floor, c.eff[3] + slope * (o - 4));
}

double interference(int m, int o, int cores, const Calibration& c) {
  const double occupied = static_cast<double>(m) * o / cores;
  return 1.0 / (1.0 + c.interf_alpha * std::max(0.0, occupied - c.interf_beta));
}

double mps_efficiency(int m, const Calibration& c) {
  return std::min(1.0, c.mps_base + (1.0 - c.mps_base) / m);
}

int host_sparse_threads(const SchedConfig& cfg) {
  int n = cfg.host.m;
  if (cfg.leftover) n += cfg.leftover->host.m;
  return n;
}

int occupied_cores(const SchedConfig& cfg, const ServerSpec& server) {
  int n = cfg.host.m * cfg.host.o + dense_threads(cfg, server);
  if (cfg.leftover) {
    // An SDHostOnly leftover lane turns every remaining core into a dense thread.
    n = cfg.leftover->strategy == Strategy::kSDHostOnly
            ? server.cpu.cores
            : n + cfg.leftover->host.m * cfg.leftover->host.o;
  }
  return std::min(n, server.cpu.cores);
}

double dense_thread_rate(const ServerSpec& server, int o, int occupied, const Calibration& c) {
  const double occ = static_cast<double>(occupied) / server.cpu.cores;
  const double interf = 1.0 / (1.0 + c.interf_alpha * std::max(0.0, occ - c.interf_beta));
  return o * server.cpu.core_flops() * op_efficiency(o, c) * interf;
}

double dense_latency(const ModelSpec& model, const ServerSpec& server, const SchedConfig& cfg,
                     double batch, const Calibration& c) {
  if (!(batch >= 1.0)) throw PreconditionError("dense_latency: batch must be >= 1");
  const int o = cfg.strategy == Strategy::kSDHostOnly ? 1 : cfg.host.o;
  return model.dense_flops_per_item() * batch / dense_thread_rate(server, o, occupied_cores(cfg, server), c);
}

double sparse_bytes_per_item(const ModelSpec& model, const Calibration& c, double rows_scale) {
  return model.mean_lookups_per_item() * rows_scale * model.emb_dim * c.elem_bytes;
}

double gather_bandwidth(const ModelSpec& model, const ServerSpec& server, int o, int active_threads,
                        const Calibration& c) {
  const double factor = model.has_pooling ? server.memory.nmp_factor : 1.0;
  // Concurrent gather streams interfere the same way co-located threads do.
  const int streams = std::max(1, active_threads);
  const double shared = server.memory.bandwidth_gbps * 1e9 * factor *
                        interference(streams, 1, server.cpu.cores, c) / streams;
  const double core_cap = c.core_gather_gbps * 1e9 * o * factor;
  return std::min(shared, core_cap);
}

double sparse_thread_bandwidth(const ModelSpec& model, const ServerSpec& server,
                               const SchedConfig& cfg, const Calibration& c) {
  return gather_bandwidth(model, server, cfg.host.o, host_sparse_threads(cfg), c);
}

double sparse_latency(const ModelSpec& model, const ServerSpec& server, const SchedConfig& cfg,
                      double batch, const Calibration& c, double row_fraction) {
  if (!(batch >= 1.0)) throw PreconditionError("sparse_latency: batch must be >= 1");
  return batch * sparse_bytes_per_item(model, c, row_fraction) /
         sparse_thread_bandwidth(model, server, cfg, c);
}

double accel_input_bytes_per_item(const ModelSpec& model, Strategy s, double hit_rate,
                                  const Calibration& c) {
  const double row_bytes = static_cast<double>(model.emb_dim) * c.elem_bytes;
  const double dense_in = model.dense_input_width() * c.elem_bytes;
  const int plain = model.num_emb_tables - model.seq_tables;
  if (s == Strategy::kSDHostAccel) {
    // Pooled vectors for pooling tables; raw rows otherwise.
    const double rows = model.has_pooling
                            ? model.num_emb_tables
                            : plain * model.lookups_per_table.mid() + model.seq_tables * model.seq_len.mid();
    return rows * row_bytes + dense_in;
  }
  // Hot indices, per-table offsets, and one partial sum for every table that
  // had at least one miss.
  double bytes = model.mean_lookups_per_item() * hit_rate * c.index_bytes +
                 model.num_emb_tables * c.offset_bytes + dense_in;
  auto miss_any = [&](double pool) { return 1.0 - std::pow(hit_rate, pool); };
  if (model.has_pooling) {
    bytes += model.num_emb_tables * miss_any(model.lookups_per_table.mid()) * row_bytes;
  } else {
    bytes += (plain * model.lookups_per_table.mid() + model.seq_tables * model.seq_len.mid()) *
             (1.0 - hit_rate) * row_bytes;
  }
  return bytes;
}

double accel_load_item_s(const ModelSpec& model, const ServerSpec& server, Strategy s, int m,
                         double hit_rate, const Calibration& c) {
  return accel_input_bytes_per_item(model, s, hit_rate, c) / (server.accel->pcie_gbps * 1e9 / m);
}

double accel_dense_item_s(const ModelSpec& model, const ServerSpec& server, int m, const Calibration& c) {
  // Co-located threads split the device, so per-thread work scales with m.
  return model.dense_flops_per_item() * m / (server.accel->peak_tflops * 1e12 * mps_efficiency(m, c));
}

double accel_hot_item_s(const ModelSpec& model, const ServerSpec& server, int m, double hit_rate,
                        const Calibration& c) {
  return sparse_bytes_per_item(model, c, hit_rate) * m / (server.accel->hbm_bw_gbps * 1e9);
}

int accel_ops(const ModelSpec& model, Strategy s) {
  int n = model.fc_layers() + 2;
  if (s == Strategy::kHotDenseOnAccel && model.num_emb_tables > 0) n += 1;
  return n;
}

StageLatency accel_stage_latencies(const ModelSpec& model, const ServerSpec& server,
                                   const SchedConfig& cfg, double fused_batch, const Calibration& c,
                                   double hit_rate) {
  if (!server.accel) throw PreconditionError("accel_stage_latencies: server has no accelerator");
  if (!(fused_batch >= 1.0)) throw PreconditionError("accel_stage_latencies: batch must be >= 1");
  const int m = cfg.accel ? cfg.accel->m : 1;
  StageLatency st;
  st.data_load_s = fused_batch * accel_load_item_s(model, server, cfg.strategy, m, hit_rate, c);
  double compute = fused_batch * accel_dense_item_s(model, server, m, c);
  if (cfg.strategy == Strategy::kHotDenseOnAccel) {
    compute += fused_batch * accel_hot_item_s(model, server, m, hit_rate, c);
  }
  st.compute_s = compute + accel_ops(model, cfg.strategy) * c.launch_overhead_s;
  return st;
}

double power_draw(const ServerSpec& server, const SchedConfig& cfg, const Utilization& u,
                  const Calibration& c) {
  auto check = [](double x) {
    if (!(x >= 0.0 && x <= 1.0 + 1e-9)) throw PreconditionError("power_draw: utilization outside [0, 1]");
  };
  check(u.cpu);
  check(u.mem);
  check(u.accel);
  auto comp = [&](double tdp, double util) {
    return tdp * (c.idle_frac + (1.0 - c.idle_frac) * std::min(1.0, util));
  };
  double p = comp(server.cpu.tdp_w, u.cpu) + comp(server.memory.tdp_w, u.mem) + server.memory.nmp_logic_w;
  if (server.accel && uses_accel(cfg.strategy)) p += comp(server.accel->tdp_w, u.accel);
  return p;
}

}  // namespace hercules
