#pragma once

// Experiment scenarios and the runs behind each CLI command. Everything here
// is a pure function of the config, so repeated runs emit identical text.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hercules/catalog.h"
#include "hercules/cluster.h"
#include "hercules/kvtext.h"
#include "hercules/loadgen.h"
#include "hercules/perfmodel.h"
#include "hercules/schedsearch.h"

namespace hercules {

struct WorkloadSpec {
  std::string model;
  double peak_qps = 0.0;
  std::string trace_path;  // replaces the synthetic trace when set
};

// Linear model evolution: a fraction f of the total load moves from the
// source models to the target models, split evenly within each group.
struct EvolveSpec {
  std::vector<std::string> sources{"DLRM-RMC1", "DLRM-RMC2", "DLRM-RMC3"};
  std::vector<std::string> targets{"DIN", "DIEN", "MT-WnD"};
  std::vector<double> shifts{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  double total_peak_qps = 60000.0;
  int days = 1;  // trace length per snapshot
  std::vector<std::string> cpu_servers{"T1", "T2", "T3", "T4", "T5"};
  std::vector<std::string> accel_servers{"T1", "T2", "T3", "T4", "T5", "T6", "T7", "T8", "T9", "T10"};

  // Per-workload peaks at shift f, sources first; the fractions sum to 1.
  std::vector<WorkloadSpec> snapshot(double f) const;
};

struct ExperimentConfig {
  std::string scenario = "dual";
  Catalog catalog = builtin_catalog();
  Calibration calib = default_calibration();
  std::uint64_t seed = 1;
  int jobs = 1;
  EvaluatorKind evaluator = EvaluatorKind::kAnalytic;
  std::map<std::string, double> sla_ms;

  // Profiling set; empty means the whole catalog.
  std::vector<std::string> models;
  std::vector<std::string> servers;

  // Cluster scenario.
  std::vector<std::string> cluster_servers;
  std::vector<WorkloadSpec> workloads;
  std::vector<std::string> policies{"nh", "greedy", "priority", "hercules"};
  int days = 7;
  double trace_interval_s = 300.0;
  double trough_ratio = 0.35;
  double noise = 0.02;
  ClusterOptions cluster;
  int nh_seeds = 10;

  EvolveSpec evolve;
};

// "dual": two DLRM workloads over T2/T3/T7 with 70/15/5 servers.
// "mix6": six workloads over all ten types with estimated headroom.
// "evolve": the model-evolution sweep.
ExperimentConfig builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();

// `[experiment] scenario = ...` picks the preset the file then overrides.
ExperimentConfig parse_experiment(const kv::Document& doc);
ExperimentConfig load_experiment(const std::string& path);

// One message per problem: unknown models or servers, bad counts, shifts
// outside [0, 1]. Empty when the config is usable.
std::vector<std::string> validate_experiment(const ExperimentConfig& cfg);

// Throws ConfigError carrying the first validation message.
void require_valid(const ExperimentConfig& cfg);

std::vector<ServerSpec> resolve_servers(const ExperimentConfig& cfg, const std::vector<std::string>& names);
std::vector<ModelSpec> resolve_models(const ExperimentConfig& cfg, const std::vector<std::string>& names);

// Synthetic diurnal traces (workload k uses seed + k) or ingested files.
std::vector<LoadTrace> scenario_traces(const ExperimentConfig& cfg, const std::vector<WorkloadSpec>& workloads,
                                       int days);

struct ProfileRun {
  EfficiencyTable table;
  std::string log;  // the gradient trajectory of every chosen entry
};

ProfileRun run_profile(const ExperimentConfig& cfg);

struct ServeRun {
  std::vector<ProvisionTimeline> timelines;  // policy order of the config
  // Per-interval NH power averaged over nh_seeds draws.
  std::vector<double> nh_mean_power_w;
  kv::Document summary;
};

ServeRun run_serve(const ExperimentConfig& cfg, const EfficiencyTable& table);

struct EvolvePoint {
  double shift = 0.0;
  std::string cluster;  // "cpu" or "accel"
  double peak_power_w = 0.0;
  double avg_power_w = 0.0;
  int peak_servers = 0;
  double avg_servers = 0.0;
  int infeasible_intervals = 0;
};

struct EvolveRun {
  std::vector<EvolvePoint> points;
  std::string text;  // columnar series
  kv::Document summary;
};

EvolveRun run_evolve(const ExperimentConfig& cfg, const EfficiencyTable& table);

// Percent saved by `better` relative to `base`; 0 when base is 0.
double savings_percent(double base, double better);

}  // namespace hercules
