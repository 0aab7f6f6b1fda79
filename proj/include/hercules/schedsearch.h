#pragma once

// Offline profiling: per-strategy hill climbing over (m, d) for each
// operator parallelism o, a nested climb over accelerator settings, an
// exhaustive oracle over the same grid, and the efficiency table built from
// the winners.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hercules/catalog.h"
#include "hercules/kvtext.h"
#include "hercules/partitioner.h"
#include "hercules/perfmodel.h"
#include "hercules/serversim.h"

namespace hercules {

enum class EvaluatorKind { kAnalytic, kSimulate };

const char* to_string(EvaluatorKind k);
EvaluatorKind evaluator_from_string(const std::string& s);

// Discretized search grid. Batch levels are min_batch * 2^i.
struct SearchSpace {
  int min_batch = 16;
  int batch_levels = 9;  // 16 .. 4096
  int accel_min_batch = 16;
  int accel_batch_levels = 9;
  int max_accel_threads = 8;
  // Zero means the server's core count.
  int max_cores = 0;

  int batch(int level) const { return min_batch << level; }
  int accel_batch(int level) const { return accel_min_batch << level; }
};

struct PointEval {
  bool valid = false;  // meets the SLA and power bounds strictly
  double qps = 0.0;
  double power_w = 0.0;
  double tail_s = 0.0;
  double zero_load_tail_s = 0.0;
};

struct SearchRequest {
  const ModelSpec* model = nullptr;
  const ServerSpec* server = nullptr;
  SchedulingStrategy strategy;
  double sla_ms = 0.0;
  std::optional<double> power_budget_w;
  EvaluatorKind evaluator = EvaluatorKind::kAnalytic;
  std::uint64_t seed = 1;
  SearchSpace space;
  SimSearchOptions sim;
  Calibration calib = default_calibration();
  // Replaces the evaluator when set; used to drive the search over closed-form
  // surfaces.
  std::function<PointEval(const SchedConfig&)> surface;
};

struct EfficiencyTuple {
  std::string model;
  std::string server;
  double qps = 0.0;
  double power_w = 0.0;
  double tail_s = 0.0;
  SchedConfig cfg;
  SchedulingStrategy strategy;
  bool violation = true;  // nothing met the SLA and power bounds
  int evaluations = 0;
  std::string error;  // non-empty when profiling the pair failed

  double qps_per_watt() const { return power_w > 0.0 ? qps / power_w : 0.0; }
};

struct SearchTrace {
  std::vector<int> outer_o;          // o values visited by the outer loop
  std::vector<double> per_o_peak;    // climb result per visited o (0 if invalid)
  std::vector<SchedConfig> moves;    // host-side points moved to, in order
};

// Unit moves {d+step, m+step, both} that stay on the grid and within the
// strategy's core budget. Throws PreconditionError for step <= 0.
std::vector<SchedConfig> candidate_moves(const SchedConfig& cfg, int step, const ServerSpec& server,
                                         const SearchSpace& space = {});

// Same, on the accelerator pair (threads, fused batch).
std::vector<SchedConfig> accel_candidate_moves(const SchedConfig& cfg, int step,
                                               const SearchSpace& space = {});

// Largest host m * o for the strategy (SDHostOnly keeps a dense core).
int host_core_cap(const SchedulingStrategy& s, const ServerSpec& server, const SearchSpace& space);

EfficiencyTuple gradient_search(const SearchRequest& req, SearchTrace* trace = nullptr);

// One grid point scored the way both searches score it: batch levels are
// indices into `req.space`, and the leftover lane is chosen when the strategy
// has one. `filled` receives the evaluated config.
PointEval evaluate_point(const SearchRequest& req, int o, int m, int di, int am = -1, int adi = -1,
                         SchedConfig* filled = nullptr);
struct Surface;
// Also fills `surface` with the swept values when given.
EfficiencyTuple brute_force_search(const SearchRequest& req, Surface* surface = nullptr);

// Number of points brute_force_search evaluates for `req`.
std::int64_t grid_size(const SearchRequest& req);

// QPS per grid point, for unimodality checks. Invalid points hold 0.
struct Surface {
  int o_max = 0, m_max = 0, d_levels = 0;
  // qps[o-1][m-1][di], NaN outside the core budget.
  std::vector<std::vector<std::vector<double>>> qps;
  // Every accelerator slice behind every host point passed `unimodal`.
  bool accel_slices_unimodal = true;
  double at(int o, int m, int di) const { return qps[o - 1][m - 1][di]; }
};

// Host-side surface; for accelerator strategies each point holds the best
// accelerator setting for it.
Surface host_surface(const SearchRequest& req);

// Leading zeros, a strictly increasing run to the peak, then a
// non-increasing tail. Only the last leading zero may precede growth. Tail
// rises of at most rel_tol times the largest |v| count as flat.
bool unimodal(const std::vector<double>& v, double rel_tol = 0.0);

// grid[m][d]: every row and column unimodal, and the first argmax of each
// row (column) never moves backwards as m (d) grows. Rows or columns that
// are all zero carry no ridge point.
bool unimodal_2d(const std::vector<std::vector<double>>& grid);

struct SurfaceCheck {
  bool slices = true;     // unimodal_2d on every (m, d) plane
  bool o_peaks = true;    // per-o maxima rise strictly until the overall maximum
  bool accel = true;      // unimodal_2d on every accelerator plane
  bool ok() const { return slices && o_peaks && accel; }
};

SurfaceCheck check_surface(const Surface& s);

class EfficiencyTable {
 public:
  std::vector<EfficiencyTuple> entries;

  const EfficiencyTuple* find(const std::string& model, const std::string& server) const;
  kv::Document serialize() const;
  static EfficiencyTable parse(const kv::Document& doc);
};

struct ProfileOptions {
  EvaluatorKind evaluator = EvaluatorKind::kAnalytic;
  std::uint64_t seed = 1;
  std::map<std::string, double> sla_ms;  // per model name; catalog SLA otherwise
  std::optional<double> power_budget_w;
  int jobs = 0;  // worker threads; 0 picks hardware concurrency
  SearchSpace space;
  SimSearchOptions sim;
  Calibration calib = default_calibration();
};

// One entry per (model, server) in input order: the best gradient_search
// result over enumerate_strategies. Failures are recorded on the entry.
// `traces`, when given, receives the winning strategy's trajectory per entry.
EfficiencyTable profile_all(const std::vector<ModelSpec>& models,
                            const std::vector<ServerSpec>& servers, const ProfileOptions& opt = {},
                            std::vector<SearchTrace>* traces = nullptr);

}  // namespace hercules
