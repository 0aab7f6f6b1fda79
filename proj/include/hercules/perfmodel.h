#pragma once

// Analytic latency and power cost model for sub-graph execution on CPU cores,
// (NMP) memory and accelerators.

#include <optional>
#include <string>

#include "hercules/catalog.h"
#include "hercules/kvtext.h"
#include "hercules/loadgen.h"

namespace hercules {

enum class Strategy {
  kModelBased,       // whole graph per inference thread
  kSDHostOnly,       // sparse threads feed dense threads through a queue
  kSDHostAccel,      // host sparse threads feed accelerator dense threads
  kHotDenseOnAccel,  // hot embeddings + dense on the accelerator, misses on host
};

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);
bool uses_accel(Strategy s);

struct HostCfg {
  int m = 1;  // inference threads
  int o = 1;  // operator workers (cores) per thread
  int d = 16; // max items per sub-query
  bool operator==(const HostCfg&) const = default;
};

struct AccelCfg {
  int m = 1;   // co-located threads
  int d = 16;  // fused batch trigger in items
  bool operator==(const AccelCfg&) const = default;
};

// Second host lane on the cores left over by HotDenseOnAccel.
struct LeftoverCfg {
  Strategy strategy = Strategy::kModelBased;
  HostCfg host;
  bool operator==(const LeftoverCfg&) const = default;
};

// `host` is the searched host-side triple. Its role depends on the strategy:
// ModelBased runs whole-model threads; SDHostOnly and SDHostAccel run sparse
// threads (SDHostOnly adds single-core dense threads on the remaining cores);
// HotDenseOnAccel runs miss-handling threads.
struct SchedConfig {
  Strategy strategy = Strategy::kModelBased;
  HostCfg host;
  std::optional<AccelCfg> accel;
  std::optional<LeftoverCfg> leftover;
  bool operator==(const SchedConfig&) const = default;

  int host_cores_used() const { return host.m * host.o; }
};

std::string describe(const SchedConfig& c);

// Throws PreconditionError when `cfg` does not fit `server`.
void check_config(const SchedConfig& cfg, const ServerSpec& server);
bool config_fits(const SchedConfig& cfg, const ServerSpec& server);
// Single-core dense threads of SDHostOnly.
int dense_threads(const SchedConfig& cfg, const ServerSpec& server);

struct StageLatency {
  double queueing_s = 0.0;
  double data_load_s = 0.0;
  double compute_s = 0.0;
  double comm_s = 0.0;
  double total() const { return queueing_s + data_load_s + compute_s + comm_s; }
  StageLatency& operator+=(const StageLatency& o);
};

struct Calibration {
  // Operator-worker efficiency for o = 1..4; linearly extrapolated beyond and
  // floored at eff_floor.
  double eff[4] = {1.0, 0.75, 0.55, 0.26};
  double eff_floor = 0.2;
  double interf_alpha = 0.5;
  double interf_beta = 0.5;
  double mps_base = 0.7;
  double idle_frac = 0.3;
  double launch_overhead_s = 5e-6;
  double cpu_op_overhead_s = 10e-6;
  int elem_bytes = 4;
  int index_bytes = 8;
  int offset_bytes = 4;
  // Per-core ceiling on embedding gather throughput.
  double core_gather_gbps = 16.0;
  // Host copy rate for handing pooled embeddings to dense threads.
  double memcpy_gbps = 20.0;
  double fusion_discount = 0.05;
  double fusion_timeout_frac = 0.25;
  double tail_percentile = 0.95;
  double queue_factor = 2.5;
  double zipf_s = 0.9;
  SizeDistribution sizes;

  bool operator==(const Calibration&) const = default;
};

const Calibration& default_calibration();
// Applies a `[calibration]` section when present.
Calibration parse_calibration(const kv::Document& doc, Calibration base = {});
void write_calibration(const Calibration& c, kv::Document& doc);

double op_efficiency(int o, const Calibration& c = default_calibration());
double interference(int m, int o, int cores, const Calibration& c = default_calibration());
double mps_efficiency(int m, const Calibration& c = default_calibration());

// Threads that gather from host memory concurrently under `cfg`.
int host_sparse_threads(const SchedConfig& cfg);
// Physical cores busy under `cfg`, counting dense and leftover threads.
int occupied_cores(const SchedConfig& cfg, const ServerSpec& server);

// FLOP/s of one host thread with `o` workers while `occupied` cores are busy.
double dense_thread_rate(const ServerSpec& server, int o, int occupied, const Calibration& c);
// Gather bytes/s of one host thread with `o` workers among `active_threads`.
double gather_bandwidth(const ModelSpec& model, const ServerSpec& server, int o, int active_threads,
                        const Calibration& c);

// Dense (FC + attention) time for `batch` items on one host dense thread of
// `cfg` (single-core for SDHostOnly).
double dense_latency(const ModelSpec& model, const ServerSpec& server, const SchedConfig& cfg,
                     double batch, const Calibration& c = default_calibration());

// Host embedding gather time for `batch` items. `row_fraction` scales the
// gathered rows (the miss fraction for HotDenseOnAccel).
double sparse_latency(const ModelSpec& model, const ServerSpec& server, const SchedConfig& cfg,
                      double batch, const Calibration& c = default_calibration(),
                      double row_fraction = 1.0);

// Gather bandwidth available to one host sparse thread, bytes/s.
double sparse_thread_bandwidth(const ModelSpec& model, const ServerSpec& server,
                               const SchedConfig& cfg, const Calibration& c);

double sparse_bytes_per_item(const ModelSpec& model, const Calibration& c, double rows_scale = 1.0);

// Bytes shipped over PCIe per item for the accelerator strategies.
double accel_input_bytes_per_item(const ModelSpec& model, Strategy s, double hit_rate,
                                  const Calibration& c);

// Per-item PCIe time, dense compute time and hot-gather time on one of `m`
// co-located accelerator threads, and the kernel count per batch.
double accel_load_item_s(const ModelSpec& model, const ServerSpec& server, Strategy s, int m,
                         double hit_rate, const Calibration& c);
double accel_dense_item_s(const ModelSpec& model, const ServerSpec& server, int m, const Calibration& c);
double accel_hot_item_s(const ModelSpec& model, const ServerSpec& server, int m, double hit_rate,
                        const Calibration& c);
int accel_ops(const ModelSpec& model, Strategy s);

// One fused batch on one co-located accelerator thread. `hit_rate` is the
// fraction of lookups served by the hot tables (HotDenseOnAccel only).
StageLatency accel_stage_latencies(const ModelSpec& model, const ServerSpec& server,
                                   const SchedConfig& cfg, double fused_batch,
                                   const Calibration& c = default_calibration(),
                                   double hit_rate = 1.0);

struct Utilization {
  double cpu = 0.0;
  double mem = 0.0;
  double accel = 0.0;
};

double power_draw(const ServerSpec& server, const SchedConfig& cfg, const Utilization& u,
                  const Calibration& c = default_calibration());

}  // namespace hercules
