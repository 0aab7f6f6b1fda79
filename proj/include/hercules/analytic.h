#pragma once

// Closed-form pipeline model: stage utilizations from mean work, a zero-load
// critical path for the tail-sized query, and a queueing term per stage.
// Private-FIFO stages wait like M^X/G/1 queues (a query drops several jobs on
// one thread); shared stages use the Sakasegawa M/G/c approximation.

#include <optional>
#include <vector>

#include "hercules/catalog.h"
#include "hercules/pipeline.h"

namespace hercules {

struct LaneModel {
  double sat_qps = 0.0;      // arrival rate at which some stage reaches rho = 1
  double base_tail_s = 0.0;  // zero-load latency of the tail-sized query
  // Per stage: utilization per unit of arrival rate, mean wait at
  // rho/(1-rho) = 1 (single server) or the M/G/c scale, and server count
  // (1 for private FIFOs).
  std::vector<double> rho_per_qps;
  std::vector<double> wait_scale_s;
  std::vector<int> servers;
  // Effective fused batch of the accelerator stage, if any.
  double accel_batch = 0.0;
  // Utilization contributions per query: core-seconds, memory bytes and
  // accelerator compute seconds per thread.
  double core_s = 0.0;
  double mem_bytes = 0.0;
  double accel_s = 0.0;
  StageLatency base_breakdown;

  double tail_at(double lane_qps, double queue_factor) const;
};

LaneModel model_lane(const Pipeline& p, std::size_t lane);

struct AnalyticResult {
  double tail_latency_s = 0.0;  // infinite when saturated
  double qps = 0.0;             // served rate, min(offered, saturation)
  double power_w = 0.0;
  bool saturated = false;
  Utilization utilization;
  std::vector<double> lane_qps;
};

// Offered load is split across lanes by `lane_weights` (defaults to the
// latency-bounded split at the pipeline's SLA).
AnalyticResult analytic_eval(const Pipeline& p, const ServerSpec& server, double offered_qps,
                             std::optional<std::vector<double>> lane_weights = std::nullopt);

struct BoundedQps {
  double qps = 0.0;
  double power_w = 0.0;
  double tail_s = 0.0;
  double zero_load_tail_s = 0.0;
  double idle_power_w = 0.0;
  double saturation_qps = 0.0;
  bool violation = false;  // no positive load meets the bounds
  std::vector<double> lane_qps;
};

// Largest rate whose tail stays within `sla_s` and whose power stays within
// `power_budget_w`. The zero-load tail and idle power must be strictly below
// their bounds for a positive answer.
BoundedQps analytic_latency_bounded_qps(const Pipeline& p, const ServerSpec& server, double sla_s,
                                        std::optional<double> power_budget_w = std::nullopt);

// Utilization and power at the given per-lane arrival rates.
Utilization pipeline_utilization(const Pipeline& p, const std::vector<LaneModel>& lanes,
                                 const std::vector<double>& lane_qps);

}  // namespace hercules
