#include "hercules/partitioner.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hercules {

double generalized_harmonic(double n, double s) {
  if (n <= 0) return 0.0;
  const std::int64_t exact_limit = 10000;
  const auto whole = static_cast<std::int64_t>(std::floor(n));
  double h = 0.0;
  const std::int64_t head = std::min(whole, exact_limit);
  // Smallest terms first keeps the rounding error at the last few ulps.
  for (std::int64_t i = head; i >= 1; --i) h += std::pow(static_cast<double>(i), -s);
  if (whole <= exact_limit) return h;
  // Euler-Maclaurin tail for sum_{i=K+1..n} i^-s with K = exact_limit.
  const double a = static_cast<double>(exact_limit);
  const double b = static_cast<double>(whole);
  double integral = std::fabs(s - 1.0) < 1e-12 ? std::log(b / a)
                                               : (std::pow(b, 1.0 - s) - std::pow(a, 1.0 - s)) / (1.0 - s);
  double tail = integral + 0.5 * (std::pow(b, -s) - std::pow(a, -s));
  tail += (-s) / 12.0 * (std::pow(b, -s - 1.0) - std::pow(a, -s - 1.0));
  tail -= (-s) * (-s - 1.0) * (-s - 2.0) / 720.0 * (std::pow(b, -s - 3.0) - std::pow(a, -s - 3.0));
  return h + tail;
}

std::int64_t TableProfile::row_at(std::int64_t rank) const {
  const auto n = static_cast<unsigned __int128>(rows);
  const auto r = static_cast<unsigned __int128>(rank - 1);
  return static_cast<std::int64_t>((r * mult + shift) % n);
}

double TableProfile::access_probability(std::int64_t rank) const {
  return std::pow(static_cast<double>(rank), -zipf_s) / generalized_harmonic(static_cast<double>(rows), zipf_s);
}

double TableProfile::top_k_mass(double k) const {
  if (k <= 0) return 0.0;
  if (k >= static_cast<double>(rows)) return 1.0;
  return generalized_harmonic(std::floor(k), zipf_s) / generalized_harmonic(static_cast<double>(rows), zipf_s);
}

AccessProfile build_access_profile(const ModelSpec& model, double zipf_s, std::uint64_t seed,
                                   SizeClass size_class) {
  if (!(zipf_s > 0.0)) throw PreconditionError("build_access_profile: zipf_s must be > 0");
  AccessProfile p;
  p.size_class = size_class;
  std::mt19937_64 rng(seed);
  const int plain = model.num_emb_tables - model.seq_tables;
  for (int t = 0; t < model.num_emb_tables; ++t) {
    TableProfile tp;
    tp.rows = std::max<std::int64_t>(1, std::llround(model.rows_per_table(size_class)));
    tp.zipf_s = zipf_s;
    tp.lookups = t < plain ? model.lookups_per_table.mid() : model.seq_len.mid();
    const auto n = static_cast<std::uint64_t>(tp.rows);
    do {
      tp.mult = n > 1 ? 1 + rng() % (n - 1) : 1;
    } while (std::gcd(tp.mult, n) != 1);
    tp.shift = rng() % n;
    p.tables.push_back(tp);
  }
  return p;
}

namespace {

DenseGraph dense_graph(const ModelSpec& model, const Calibration& c) {
  return {model.dense_weights() * c.elem_bytes, model.dense_flops_per_item(), model.fc_layers()};
}

// Rows of table t whose access weight lookups * p(rank) is at least tau.
std::int64_t rows_above(const TableProfile& t, double h, double tau) {
  const double x = std::pow(t.lookups / (h * tau), 1.0 / t.zipf_s);
  if (!(x < static_cast<double>(t.rows))) return t.rows;
  return static_cast<std::int64_t>(std::floor(x));
}

}  // namespace

PartitionPlan host_plan(const ModelSpec& model, const AccessProfile& profile, const Calibration& c) {
  PartitionPlan plan;
  plan.dense = dense_graph(model, c);
  for (const auto& t : profile.tables) {
    plan.sparse_full.push_back(t.rows);
    plan.sparse_hot.push_back(0);
  }
  return plan;
}

PartitionPlan partition_model(const ModelSpec& model, const ServerSpec& server, int co_location,
                              const AccessProfile& profile, const Calibration& c) {
  if (co_location < 1) throw PreconditionError("partition_model: co_location must be >= 1");
  PartitionPlan plan = host_plan(model, profile, c);
  plan.co_location = co_location;
  if (!server.accel) return plan;

  const double per_thread = server.accel->hbm_gb * 1e9 / co_location;
  if (plan.dense.weight_bytes > per_thread) {
    throw InfeasibleError(fmt::format("{}: dense sub-graph ({} B) exceeds the {} B per-thread budget on {}",
                                      model.name, plan.dense.weight_bytes, per_thread, server.name));
  }
  plan.dense_device = Device::kAccel;
  plan.hot_device = Device::kAccel;
  plan.budget_bytes = per_thread - plan.dense.weight_bytes;
  const double row_bytes = static_cast<double>(model.emb_dim) * c.elem_bytes;
  const auto capacity_rows = static_cast<std::int64_t>(std::floor(plan.budget_bytes / row_bytes));
  const std::size_t n = profile.tables.size();

  std::vector<double> h(n);
  std::int64_t total_rows = 0;
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = generalized_harmonic(static_cast<double>(profile.tables[i].rows), profile.tables[i].zipf_s);
    total_rows += profile.tables[i].rows;
  }
  std::vector<std::int64_t> hot(n, 0);
  if (total_rows <= capacity_rows) {
    for (std::size_t i = 0; i < n; ++i) hot[i] = profile.tables[i].rows;
  } else if (capacity_rows > 0) {
    // Largest threshold set that fits, by bisection in log space, then top up
    // one row at a time in global weight order.
    auto count = [&](double tau) {
      std::int64_t s = 0;
      for (std::size_t i = 0; i < n; ++i) s += rows_above(profile.tables[i], h[i], tau);
      return s;
    };
    double lo = -800.0;  // log(tau): count(exp(lo)) is all rows
    double hi = 50.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (count(std::exp(mid)) > capacity_rows) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    std::int64_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
      hot[i] = rows_above(profile.tables[i], h[i], std::exp(hi));
      used += hot[i];
    }
    while (used < capacity_rows) {
      std::size_t best = n;
      double best_w = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& t = profile.tables[i];
        if (hot[i] >= t.rows) continue;
        const double w = t.lookups * std::pow(static_cast<double>(hot[i] + 1), -t.zipf_s) / h[i];
        if (w > best_w) {
          best_w = w;
          best = i;
        }
      }
      if (best == n) break;
      ++hot[best];
      ++used;
    }
  }
  plan.sparse_hot = hot;
  double weight = 0.0;
  double hit = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = profile.tables[i];
    weight += t.lookups;
    hit += t.lookups * t.top_k_mass(static_cast<double>(hot[i]));
    plan.hot_bytes += static_cast<double>(hot[i]) * row_bytes;
  }
  plan.hot_hit_rate = weight > 0 ? std::clamp(hit / weight, 0.0, 1.0) : 1.0;
  validate_plan(plan, server, c, model.emb_dim);
  return plan;
}

void validate_plan(const PartitionPlan& plan, const ServerSpec& server, const Calibration& c, int emb_dim) {
  if (plan.sparse_hot.size() != plan.sparse_full.size()) throw InfeasibleError("plan: table count mismatch");
  double hot_bytes = 0.0;
  for (std::size_t i = 0; i < plan.sparse_hot.size(); ++i) {
    if (plan.sparse_hot[i] < 0 || plan.sparse_hot[i] > plan.sparse_full[i]) {
      throw InfeasibleError(fmt::format("plan: hot rows of table {} outside [0, rows]", i));
    }
    hot_bytes += static_cast<double>(plan.sparse_hot[i]) * emb_dim * c.elem_bytes;
  }
  if (!(plan.hot_hit_rate >= 0.0 && plan.hot_hit_rate <= 1.0)) throw InfeasibleError("plan: hit rate outside [0, 1]");
  if (plan.hot_device == Device::kAccel) {
    const double cap = server.accel->hbm_gb * 1e9 / plan.co_location;
    if (hot_bytes + plan.dense.weight_bytes > cap * (1.0 + 1e-12)) {
      throw InfeasibleError("plan: hot tables and dense weights exceed the per-thread budget");
    }
  } else if (hot_bytes > 0.0) {
    throw InfeasibleError("plan: hot rows without an accelerator");
  }
}

std::string SchedulingStrategy::name() const {
  if (leftover) return fmt::format("{}+{}", to_string(kind), to_string(*leftover));
  return to_string(kind);
}

SchedulingStrategy scheduling_strategy_from_string(const std::string& s) {
  auto plus = s.find('+');
  if (plus == std::string::npos) return {strategy_from_string(s), std::nullopt};
  return {strategy_from_string(s.substr(0, plus)), strategy_from_string(s.substr(plus + 1))};
}

std::vector<SchedulingStrategy> enumerate_strategies(const ModelSpec& model, const ServerSpec& server,
                                                     const Calibration& c) {
  std::vector<SchedulingStrategy> host = {{Strategy::kModelBased, std::nullopt},
                                          {Strategy::kSDHostOnly, std::nullopt}};
  if (!server.accel) return host;
  const double dense_bytes = model.dense_weights() * c.elem_bytes;
  if (dense_bytes > server.accel->hbm_gb * 1e9) return host;
  return {{Strategy::kSDHostAccel, std::nullopt},
          {Strategy::kHotDenseOnAccel, Strategy::kModelBased},
          {Strategy::kHotDenseOnAccel, Strategy::kSDHostOnly}};
}

}  // namespace hercules
