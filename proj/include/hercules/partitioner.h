#pragma once

// Locality-aware model partition into DenseNet, SparseNet and Hot-SparseNet,
// and the per-server list of scheduling strategies.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hercules/catalog.h"
#include "hercules/perfmodel.h"

namespace hercules {

// Generalized harmonic number sum_{i=1..n} i^-s.
double generalized_harmonic(double n, double s);

// Rows of one table ranked by a Zipf popularity law. Rank r (1-based) holds
// row `row_at(r)`; the rank-to-row bijection is a seeded affine permutation.
struct TableProfile {
  std::int64_t rows = 0;
  double zipf_s = 0.9;
  // Mean rows gathered from this table per item.
  double lookups = 1.0;
  std::uint64_t mult = 1;
  std::uint64_t shift = 0;

  std::int64_t row_at(std::int64_t rank) const;
  double access_probability(std::int64_t rank) const;
  // Fraction of this table's accesses that land in its top-k rows.
  double top_k_mass(double k) const;
};

struct AccessProfile {
  std::vector<TableProfile> tables;
  SizeClass size_class = SizeClass::kProd;
};

AccessProfile build_access_profile(const ModelSpec& model, double zipf_s, std::uint64_t seed,
                                   SizeClass size_class = SizeClass::kProd);

enum class Device { kHost, kAccel };

struct DenseGraph {
  double weight_bytes = 0.0;
  double flops_per_item = 0.0;
  int fc_layers = 0;
};

struct PartitionPlan {
  DenseGraph dense;
  std::vector<std::int64_t> sparse_full;  // rows per table
  std::vector<std::int64_t> sparse_hot;   // hot prefix length per table
  double hot_hit_rate = 0.0;
  double hot_bytes = 0.0;
  double budget_bytes = 0.0;  // per co-located thread, after dense weights
  int co_location = 1;
  Device dense_device = Device::kHost;
  Device hot_device = Device::kHost;
  // Fused dense operators run `fusion_discount` faster.
  bool operator_fusion = true;

  double miss_rate() const { return 1.0 - hot_hit_rate; }
};

// Throws InfeasibleError when the dense sub-graph alone exceeds the budget.
PartitionPlan partition_model(const ModelSpec& model, const ServerSpec& server, int co_location,
                              const AccessProfile& profile,
                              const Calibration& c = default_calibration());

// Host-only plan: no hot tables, dense on the host.
PartitionPlan host_plan(const ModelSpec& model, const AccessProfile& profile,
                        const Calibration& c = default_calibration());

// Checks the budget, prefix and hit-rate invariants; throws on violation.
void validate_plan(const PartitionPlan& plan, const ServerSpec& server, const Calibration& c,
                   int emb_dim);

struct SchedulingStrategy {
  Strategy kind = Strategy::kModelBased;
  // Sub-strategy of the leftover-core lane for HotDenseOnAccel.
  std::optional<Strategy> leftover;
  bool operator==(const SchedulingStrategy&) const = default;
  std::string name() const;
};

SchedulingStrategy scheduling_strategy_from_string(const std::string& s);

std::vector<SchedulingStrategy> enumerate_strategies(const ModelSpec& model, const ServerSpec& server,
                                                     const Calibration& c = default_calibration());

}  // namespace hercules
