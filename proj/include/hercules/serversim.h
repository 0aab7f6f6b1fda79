#pragma once

// Discrete-event simulation of one server serving a query stream: dispatcher,
// per-thread FIFOs, bounded sparse-to-dense queues, query fusion and
// load/compute pipelining on accelerator threads.

#include <cstdint>
#include <optional>
#include <vector>

#include "hercules/catalog.h"
#include "hercules/loadgen.h"
#include "hercules/partitioner.h"
#include "hercules/perfmodel.h"
#include "hercules/pipeline.h"

namespace hercules {

struct SimOptions {
  // Queries arriving before warmup_frac * duration are served but not measured.
  double warmup_frac = 0.1;
  double power_window_s = 0.1;
  // Extra simulated time after the last arrival; negative picks
  // max(2 s, 10 x SLA).
  double drain_s = -1.0;
  // Dispatcher shares across lanes; empty uses the analytic latency-bounded split.
  std::vector<double> lane_weights;
  bool keep_latencies = false;
};

struct SimReport {
  double offered_qps = 0.0;
  // Departures inside the measurement window per second, capped at the
  // measured arrivals.
  double achieved_qps = 0.0;
  double tail_latency_s = 0.0;  // infinite if a measured query never completed
  double mean_latency_s = 0.0;  // over completed measured queries
  StageLatency latency_breakdown;  // mean over completed measured queries
  Utilization utilization;
  double avg_power_w = 0.0;
  double peak_power_w = 0.0;
  std::int64_t arrivals = 0;
  std::int64_t completed = 0;
  std::int64_t dropped = 0;    // never completed and nothing left to run
  std::int64_t in_flight = 0;  // still running when the drain horizon hit
  std::vector<double> latencies;  // measured queries, arrival order
};

// Throws PreconditionError when `cfg` does not fit `server` or the stream is
// empty. `seed` is folded into nothing stochastic today; the stream carries
// all randomness, so reports are a pure function of the inputs.
SimReport simulate(const ServerSpec& server, const ModelSpec& model, const PartitionPlan& plan,
                   const SchedConfig& cfg, const std::vector<Query>& stream, double duration_s,
                   std::uint64_t seed, const SimOptions& opt = {},
                   const Calibration& c = default_calibration());

// Same, on a prebuilt pipeline.
SimReport simulate_pipeline(const Pipeline& p, const ServerSpec& server, const std::vector<Query>& stream,
                            double duration_s, const SimOptions& opt = {});

struct SimSearchOptions {
  int target_queries = 8000;
  double min_duration_s = 1.0;
  double max_duration_s = 60.0;
  int iterations = 12;
  double tolerance = 0.01;  // stop bisecting when (hi - lo) / lo is below this
  double min_throughput_ratio = 0.98;
  std::optional<double> start_qps;
  StreamOptions stream;
};

struct SimBoundedQps {
  double qps = 0.0;
  double peak_power_w = 0.0;
  double tail_s = 0.0;
  bool violation = false;
  int simulations = 0;
};

// Bracketed geometric expansion then bisection over the offered rate for the
// largest rate whose simulated tail stays within the SLA, throughput keeps up
// with the offered rate and peak power stays within the budget.
SimBoundedQps measure_latency_bounded_qps(const ServerSpec& server, const ModelSpec& model,
                                          const SchedConfig& cfg, double sla_ms,
                                          std::optional<double> power_budget_w, std::uint64_t seed,
                                          const SimSearchOptions& opt = {},
                                          const Calibration& c = default_calibration());

}  // namespace hercules
