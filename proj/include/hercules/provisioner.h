#pragma once

// Cluster provisioning for one interval: the power-minimizing allocation
// LP over (server type, workload) counts, integer rounding with repair, and
// the NH, greedy and priority baselines.

#include <cstdint>
#include <string>
#include <vector>

#include "hercules/catalog.h"
#include "hercules/lp.h"
#include "hercules/schedsearch.h"

namespace hercules {

// Dense per-interval view of the efficiency table. Index h runs over server
// types, m over workloads.
struct ProvisionProblem {
  std::vector<std::string> types;
  std::vector<std::string> workloads;
  std::vector<std::vector<double>> qps;    // [h][m], 0 when the pair cannot serve
  std::vector<std::vector<double>> power;  // [h][m], provisioned watts per server
  std::vector<double> load;                // per workload
  std::vector<int> availability;           // per type
  double r_percent = 0.0;
  // Per-workload headroom; overrides r_percent when non-empty.
  std::vector<double> r_by_workload;

  int num_types() const { return static_cast<int>(types.size()); }
  int num_workloads() const { return static_cast<int>(workloads.size()); }
  double r_of(int m) const { return r_by_workload.empty() ? r_percent : r_by_workload[m]; }
  double demand(int m) const { return load[m] * (1.0 + r_of(m) / 100.0); }
};

// Pulls QPS and power from the table. Pairs missing from the table or
// flagged as violations get zero QPS. Throws InfeasibleError naming any
// workload with positive load and no serving type.
ProvisionProblem make_problem(const EfficiencyTable& table, const std::vector<std::string>& workloads,
                              const std::vector<ServerSpec>& types, const std::vector<double>& load,
                              double r_percent);

struct LPInstance {
  ProvisionProblem problem;
  LinearProgram lp;
  // Variable k is N_{var_type[k], var_workload[k]}; pairs with zero QPS have
  // no variable.
  std::vector<int> var_type, var_workload;
  // Row indices: demand rows first (one per workload), then availability rows.
  int demand_rows = 0;
};

LPInstance build_lp(const ProvisionProblem& p);

struct FractionalAllocation {
  std::vector<std::vector<double>> n;  // [h][m]
  double objective = 0.0;
  LpSolution raw;
};

// Throws InfeasibleError naming the workloads whose demand cannot be met.
FractionalAllocation solve_allocation(const LPInstance& inst);

struct AllocationMatrix {
  std::vector<std::vector<int>> n;  // [h][m]
  double time_s = 0.0;

  double power(const ProvisionProblem& p) const;
  int servers() const;
  int servers_of_type(int h) const;
  bool operator==(const AllocationMatrix&) const = default;
};

AllocationMatrix zero_allocation(const ProvisionProblem& p);

// Demand per workload, availability per type, negative and zero-QPS cells.
// Returns one message per violation.
std::vector<std::string> check_allocation(const ProvisionProblem& p, const AllocationMatrix& a);

// Ceiling, overflow repair and trim, then the cheapest of that, greedy and
// priority. Throws InfeasibleError when no integer repair exists.
AllocationMatrix round_and_repair(const FractionalAllocation& frac, const ProvisionProblem& p);

// The full Hercules step: LP, rounding and repair.
AllocationMatrix hercules_allocate(const ProvisionProblem& p);

enum class RankBy { kQps, kQpsPerWatt };

const char* to_string(RankBy r);

// Workloads in descending load (ties in declared order) each take units of
// their best-ranked types with spare capacity until their demand is met.
AllocationMatrix greedy_allocate(const ProvisionProblem& p, RankBy rank = RankBy::kQpsPerWatt);

// Units drawn uniformly at random from the spare servers able to serve the
// workload, one at a time, until its demand is met.
AllocationMatrix nh_allocate(const ProvisionProblem& p, std::uint64_t seed);

// Greedy, except that a type sitting at the head of several unmet workloads'
// rankings goes to the one whose claim gives the lowest total power once
// greedy completes the rest, ties to the larger priority_gain. Never above
// greedy's power.
AllocationMatrix priority_allocate(const ProvisionProblem& p, RankBy rank = RankBy::kQpsPerWatt);

// QPS/W of type h for workload m over that of the next type in `order`
// after h. Infinite when no other type remains.
double priority_gain(const ProvisionProblem& p, int m, int h, const std::vector<int>& order);

// Types ranked for workload m, best first. Zero-QPS types are left out.
std::vector<int> rank_types(const ProvisionProblem& p, int m, RankBy rank);

struct LiveSample {
  std::string model;
  std::string server;
  double qps = 0.0;
};

// Per-pair moving average qps' = 0.8 qps + 0.2 sample, applied in sample
// order. Power is never raised.
EfficiencyTable refresh_efficiency(EfficiencyTable table, const std::vector<LiveSample>& samples);

}  // namespace hercules
