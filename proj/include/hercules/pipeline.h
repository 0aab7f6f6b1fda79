#pragma once

// Stage-level description of how a (model, server, plan, config) serves a
// query. The closed-form evaluator and the event simulator both consume it, so
// they cost exactly the same work.

#include <string>
#include <vector>

#include "hercules/catalog.h"
#include "hercules/partitioner.h"
#include "hercules/perfmodel.h"

namespace hercules {

enum class StageKind {
  kSplit,  // CPU threads with private FIFOs; queries split into jobs of <= split items
  kPool,   // CPU threads sharing one bounded FIFO of upstream jobs
  kAccel,  // fused batches on co-located accelerator threads
};

// Per-job service of b items whose pooling is r times the model mean:
//   CPU:   fixed + b * (item + comm + sparse * r)
//   accel: load  = load_fixed + b * (load_item + load_sparse * r)
//          compute = comp_fixed + b * (comp_item + comp_sparse * r)
struct Stage {
  StageKind kind = StageKind::kSplit;
  std::string name;
  int workers = 1;
  int cores_per_worker = 1;
  int split = 1;
  int fuse_items = 1;
  double fuse_timeout_s = 0.0;
  int queue_capacity = 0;  // jobs; 0 means unbounded

  double fixed_s = 0.0;
  double item_s = 0.0;
  double sparse_item_s = 0.0;
  double comm_item_s = 0.0;

  double load_fixed_s = 0.0;
  double load_item_s = 0.0;
  double load_sparse_s = 0.0;
  double comp_fixed_s = 0.0;
  double comp_item_s = 0.0;
  double comp_sparse_s = 0.0;

  // Host memory traffic per item at mean pooling.
  double mem_bytes_item = 0.0;

  double cpu_service(double b, double r) const { return fixed_s + b * (item_s + comm_item_s + sparse_item_s * r); }
  double load_time(double b, double r) const { return load_fixed_s + b * (load_item_s + load_sparse_s * r); }
  double compute_time(double b, double r) const { return comp_fixed_s + b * (comp_item_s + comp_sparse_s * r); }
};

struct Lane {
  std::string name;
  std::vector<Stage> stages;
};

struct Pipeline {
  SchedConfig cfg;
  std::vector<Lane> lanes;
  std::string model;
  std::string server;
  int cores = 1;
  // Gather bandwidth the memory-utilization figure is measured against.
  double mem_capacity_bps = 1.0;
  double sla_s = 0.0;
  // Rows gathered per item at mean pooling; per-query pooling scales sparse
  // costs by rows_per_item(query) / this.
  double mean_rows_per_item = 1.0;
  Calibration calib;
};

// `plan` must come from partition_model with co_location = cfg.accel->m for
// the accelerator strategies (host_plan otherwise).
Pipeline build_pipeline(const ModelSpec& model, const ServerSpec& server, const PartitionPlan& plan,
                        const SchedConfig& cfg, const Calibration& c = default_calibration());

// Same, partitioning internally with the default access profile.
Pipeline build_pipeline(const ModelSpec& model, const ServerSpec& server, const SchedConfig& cfg,
                        const Calibration& c = default_calibration());

// Plan matching `cfg` (partitioned on the accelerator when cfg uses one).
PartitionPlan plan_for(const ModelSpec& model, const ServerSpec& server, const SchedConfig& cfg,
                       const Calibration& c = default_calibration());

}  // namespace hercules
