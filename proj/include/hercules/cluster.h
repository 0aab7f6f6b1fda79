#pragma once

// Time-stepped cluster provisioning loop: at each interval boundary read the
// loads, pick an allocation under a policy, then activate (after the setup
// delay) and release servers against the cluster state.

#include <cstdint>
#include <string>
#include <vector>

#include "hercules/catalog.h"
#include "hercules/loadgen.h"
#include "hercules/provisioner.h"
#include "hercules/schedsearch.h"

namespace hercules {

enum class Policy { kHercules, kGreedy, kNh, kPriority };

const char* to_string(Policy p);
Policy policy_from_string(const std::string& s);

enum class RMode { kFixed, kEstimated };

const char* to_string(RMode r);
RMode r_mode_from_string(const std::string& s);

struct ClusterOptions {
  double interval_s = 1800.0;
  double setup_delay_s = 30.0;
  RMode r_mode = RMode::kFixed;
  // Fixed headroom, and the fallback while the estimation window is short.
  double r_percent = 10.0;
  double r_window_s = 86400.0;
  // NH draws. Every interval reuses it, so an unchanged problem gets an
  // unchanged draw.
  std::uint64_t seed = 1;
  RankBy rank = RankBy::kQpsPerWatt;
};

struct IntervalRecord {
  int index = 0;
  double time_s = 0.0;
  std::vector<double> load;       // per workload at the boundary
  std::vector<double> r_percent;  // per workload
  AllocationMatrix allocation;    // target chosen at the boundary
  int servers = 0;
  double power_w = 0.0;           // provisioned power of the target
  bool infeasible = false;        // the policy failed; best-effort target used
  std::string infeasible_reason;
  int demand_violations = 0;         // target vs boundary demand
  int availability_violations = 0;         // availability, counting pending units
  // Trace points in the interval whose load exceeded the ready capacity.
  int coverage_shortfalls = 0;
  int activations = 0;
  int releases = 0;
};

struct ProvisionTimeline {
  Policy policy = Policy::kHercules;
  std::vector<std::string> types;
  std::vector<std::string> workloads;
  std::vector<std::vector<double>> unit_power;  // [h][m] provisioned watts per server
  std::vector<IntervalRecord> intervals;

  double peak_power_w() const;
  double avg_power_w() const;
  int peak_servers() const;
  double avg_servers() const;
  int demand_violations() const;
  int availability_violations() const;
  int infeasible_intervals() const;

  // One row per (interval, type, workload) with count and watts, then a
  // summary section.
  std::string to_text() const;
};

ProvisionTimeline run_cluster_sim(const std::vector<LoadTrace>& traces, const EfficiencyTable& table,
                                  const std::vector<ServerSpec>& types, Policy policy,
                                  const ClusterOptions& opt = {});

}  // namespace hercules
