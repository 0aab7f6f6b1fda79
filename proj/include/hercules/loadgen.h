#pragma once

// Query streams for a single server and diurnal load traces for a cluster.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hercules/catalog.h"

namespace hercules {

struct SizeDistribution {
  double log_mean = 4.605170185988092;  // ln 100
  double log_sigma = 1.0;
  double min_items = 10;
  double max_items = 1000;

  double quantile(double p) const;
  double mean() const;
  // E[ceil(size / d)], the expected number of sub-queries of at most d items.
  double mean_chunks(double d) const;
  double mean_squared() const;
  // E[f(n)] over the integer size distribution.
  double expect(const std::function<double(int)>& f) const;
  // P(size == min_items + i).
  std::vector<double> probabilities() const;
};

enum class PoolingLaw { kUniform, kLongTail };

struct StreamOptions {
  SizeDistribution sizes;
  PoolingLaw pooling = PoolingLaw::kUniform;
  // Long-tail law: lo + (hi - lo) * u^power, skewed toward lo for power > 1.
  double long_tail_power = 3.0;
  // Constant inter-arrivals and constant mean-sized queries with mean pooling.
  bool deterministic = false;
};

struct Query {
  double arrival_time = 0.0;
  int size = 1;
  std::vector<int> per_table_pooling;
  bool operator==(const Query&) const = default;
};

// Sum over tables of the per-item pooling, i.e. rows gathered per item.
double rows_per_item(const Query& q);

std::vector<Query> gen_query_stream(double rate_qps, double duration_s, const ModelSpec& model,
                                    std::uint64_t seed, const StreamOptions& opt = {});

struct TracePoint {
  double time_s = 0.0;
  double qps = 0.0;
  bool operator==(const TracePoint&) const = default;
};

struct LoadTrace {
  std::string workload;
  double interval_s = 0.0;
  std::vector<TracePoint> points;
  bool operator==(const LoadTrace&) const = default;

  // Load at time t, holding the most recent point (zero before the first).
  double at(double t) const;
  double peak() const;
  double mean() const;
};

// Trough at t = 0 (midnight), peak at noon.
LoadTrace gen_diurnal_trace(double peak_qps, int days, double trough_ratio, double noise,
                            double interval_s, std::uint64_t seed, std::string workload = "");

// Noiseless value of the diurnal curve at time t.
double diurnal_value(double peak_qps, double trough_ratio, double t);

LoadTrace ingest_trace(const std::string& path);
LoadTrace parse_trace(const std::string& text, const std::string& source = "trace");
std::string export_trace(const LoadTrace& trace);

// Percent headroom covering the largest interval-to-interval growth.
double estimate_overprovision_rate(const LoadTrace& trace, double interval_s);

}  // namespace hercules
