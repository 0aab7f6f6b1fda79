#include "hercules/pipeline.h"

#include <fmt/format.h>

#include <map>
#include <mutex>

namespace hercules {
namespace {

double pooled_bytes_per_item(const ModelSpec& model, const Calibration& c) {
  const double row = static_cast<double>(model.emb_dim) * c.elem_bytes;
  if (model.has_pooling) return model.num_emb_tables * row;
  return model.mean_lookups_per_item() * row;
}

double dense_factor(const PartitionPlan& plan, const Calibration& c) {
  return plan.operator_fusion ? 1.0 - c.fusion_discount : 1.0;
}

struct HostCtx {
  const ModelSpec& model;
  const ServerSpec& server;
  const Calibration& c;
  const PartitionPlan& plan;
  int active_threads;  // host gather threads across all lanes
  int occupied;        // busy cores across all lanes
};

Stage sparse_stage(const HostCtx& x, const std::string& name, const HostCfg& h, double row_fraction) {
  Stage s;
  s.kind = StageKind::kSplit;
  s.name = name;
  s.workers = h.m;
  s.cores_per_worker = h.o;
  s.split = h.d;
  s.fixed_s = (x.model.num_emb_tables + 1) * x.c.cpu_op_overhead_s;
  const double bytes = sparse_bytes_per_item(x.model, x.c, row_fraction);
  s.sparse_item_s = bytes / gather_bandwidth(x.model, x.server, h.o, x.active_threads, x.c);
  s.mem_bytes_item = bytes;
  return s;
}

Lane model_based_lane(const HostCtx& x, const std::string& name, const HostCfg& h) {
  Stage s = sparse_stage(x, "host", h, 1.0);
  s.fixed_s = (x.model.num_emb_tables + x.model.fc_layers() + 2) * x.c.cpu_op_overhead_s;
  s.item_s = x.model.dense_flops_per_item() * dense_factor(x.plan, x.c) /
             dense_thread_rate(x.server, h.o, x.occupied, x.c);
  return {name, {s}};
}

Lane sd_host_lane(const HostCtx& x, const std::string& name, const HostCfg& h, int dense_workers) {
  Stage sp = sparse_stage(x, "sparse", h, 1.0);
  const double pooled = pooled_bytes_per_item(x.model, x.c);
  sp.comm_item_s = pooled / (x.c.memcpy_gbps * 1e9);
  sp.mem_bytes_item += pooled;
  Stage dn;
  dn.kind = StageKind::kPool;
  dn.name = "dense";
  dn.workers = dense_workers;
  dn.cores_per_worker = 1;
  dn.queue_capacity = 2 * dense_workers;
  dn.fixed_s = (x.model.fc_layers() + 1) * x.c.cpu_op_overhead_s;
  dn.item_s = x.model.dense_flops_per_item() * dense_factor(x.plan, x.c) /
              dense_thread_rate(x.server, 1, x.occupied, x.c);
  return {name, {sp, dn}};
}

Stage accel_stage(const HostCtx& x, const SchedConfig& cfg) {
  const AccelCfg& a = *cfg.accel;
  const double hit = cfg.strategy == Strategy::kHotDenseOnAccel ? x.plan.hot_hit_rate : 1.0;
  Stage s;
  s.kind = StageKind::kAccel;
  s.name = "accel";
  s.workers = a.m;
  s.cores_per_worker = 0;
  s.fuse_items = a.d;
  s.fuse_timeout_s = x.c.fusion_timeout_frac * x.model.sla_ms * 1e-3;
  const double load_all = accel_load_item_s(x.model, x.server, cfg.strategy, a.m, hit, x.c);
  s.comp_fixed_s = accel_ops(x.model, cfg.strategy) * x.c.launch_overhead_s;
  s.comp_item_s = accel_dense_item_s(x.model, x.server, a.m, x.c) * dense_factor(x.plan, x.c);
  if (cfg.strategy == Strategy::kHotDenseOnAccel) {
    // Hot indices and hot gathers grow with the query's pooling.
    const double index_s = x.model.mean_lookups_per_item() * hit * x.c.index_bytes /
                           (x.server.accel->pcie_gbps * 1e9 / a.m);
    s.load_sparse_s = index_s;
    s.load_item_s = load_all - index_s;
    s.comp_sparse_s = accel_hot_item_s(x.model, x.server, a.m, hit, x.c);
  } else {
    s.load_item_s = load_all;
  }
  return s;
}

}  // namespace

Pipeline build_pipeline(const ModelSpec& model, const ServerSpec& server, const PartitionPlan& plan,
                        const SchedConfig& cfg, const Calibration& c) {
  check_config(cfg, server);
  Pipeline p;
  p.cfg = cfg;
  p.model = model.name;
  p.server = server.name;
  p.cores = server.cpu.cores;
  p.sla_s = model.sla_ms * 1e-3;
  p.calib = c;
  p.mean_rows_per_item = model.has_pooling ? model.num_emb_tables * model.lookups_per_table.mid()
                                           : model.mean_lookups_per_item();
  const double factor = model.has_pooling ? server.memory.nmp_factor : 1.0;
  p.mem_capacity_bps = server.memory.bandwidth_gbps * 1e9 * factor;
  HostCtx x{model, server, c, plan, host_sparse_threads(cfg), occupied_cores(cfg, server)};

  switch (cfg.strategy) {
    case Strategy::kModelBased:
      p.lanes.push_back(model_based_lane(x, "main", cfg.host));
      break;
    case Strategy::kSDHostOnly:
      p.lanes.push_back(sd_host_lane(x, "main", cfg.host, dense_threads(cfg, server)));
      break;
    case Strategy::kSDHostAccel: {
      Stage sp = sparse_stage(x, "sparse", cfg.host, 1.0);
      p.lanes.push_back({"main", {sp, accel_stage(x, cfg)}});
      break;
    }
    case Strategy::kHotDenseOnAccel: {
      Stage miss = sparse_stage(x, "miss", cfg.host, plan.miss_rate());
      p.lanes.push_back({"main", {miss, accel_stage(x, cfg)}});
      if (cfg.leftover) {
        const LeftoverCfg& l = *cfg.leftover;
        if (l.strategy == Strategy::kModelBased) {
          p.lanes.push_back(model_based_lane(x, "leftover", l.host));
        } else {
          const int dense = server.cpu.cores - cfg.host.m * cfg.host.o - l.host.m * l.host.o;
          p.lanes.push_back(sd_host_lane(x, "leftover", l.host, dense));
        }
      }
      break;
    }
  }
  return p;
}

PartitionPlan plan_for(const ModelSpec& model, const ServerSpec& server, const SchedConfig& cfg,
                       const Calibration& c) {
  // Building the Zipf profile and filling the budget dominates evaluation
  // cost, and only (model, server, co-location, exponent) matter.
  static std::mutex mu;
  static std::map<std::string, PartitionPlan> cache;
  const int m = uses_accel(cfg.strategy) ? cfg.accel->m : 0;
  const double hbm = server.accel ? server.accel->hbm_gb : 0.0;
  const std::string key = fmt::format(
      "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}", model.name, model.num_emb_tables,
      model.emb_rows_prod.lo, model.emb_rows_prod.hi, model.emb_dim, model.lookups_per_table.lo,
      model.lookups_per_table.hi, model.seq_tables, model.seq_len.lo, model.seq_len.hi,
      model.dense_weights(), hbm, c.zipf_s, m, c.elem_bytes, c.fusion_discount);
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  AccessProfile profile = build_access_profile(model, c.zipf_s, 1);
  PartitionPlan plan = m > 0 ? partition_model(model, server, m, profile, c) : host_plan(model, profile, c);
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, plan);
  return plan;
}

Pipeline build_pipeline(const ModelSpec& model, const ServerSpec& server, const SchedConfig& cfg,
                        const Calibration& c) {
  return build_pipeline(model, server, plan_for(model, server, cfg, c), cfg, c);
}

}  // namespace hercules
