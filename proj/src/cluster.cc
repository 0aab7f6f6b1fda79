#include "hercules/cluster.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "hercules/error.h"
#include "hercules/kvtext.h"

namespace hercules {

const char* to_string(Policy p) {
  switch (p) {
    case Policy::kHercules: return "hercules";
    case Policy::kGreedy: return "greedy";
    case Policy::kNh: return "nh";
    case Policy::kPriority: return "priority";
  }
  return "?";
}

Policy policy_from_string(const std::string& s) {
  if (s == "hercules") return Policy::kHercules;
  if (s == "greedy") return Policy::kGreedy;
  if (s == "nh") return Policy::kNh;
  if (s == "priority") return Policy::kPriority;
  throw ConfigError("policy", 0, fmt::format("unknown policy '{}' (hercules|greedy|nh|priority)", s));
}

const char* to_string(RMode r) { return r == RMode::kFixed ? "fixed" : "estimated"; }

RMode r_mode_from_string(const std::string& s) {
  if (s == "fixed") return RMode::kFixed;
  if (s == "estimated") return RMode::kEstimated;
  throw ConfigError("r_mode", 0, fmt::format("unknown R mode '{}' (fixed|estimated)", s));
}

double ProvisionTimeline::peak_power_w() const {
  double w = 0.0;
  for (const auto& r : intervals) w = std::max(w, r.power_w);
  return w;
}

double ProvisionTimeline::avg_power_w() const {
  if (intervals.empty()) return 0.0;
  double w = 0.0;
  for (const auto& r : intervals) w += r.power_w;
  return w / static_cast<double>(intervals.size());
}

int ProvisionTimeline::peak_servers() const {
  int s = 0;
  for (const auto& r : intervals) s = std::max(s, r.servers);
  return s;
}

double ProvisionTimeline::avg_servers() const {
  if (intervals.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : intervals) s += r.servers;
  return s / static_cast<double>(intervals.size());
}

int ProvisionTimeline::demand_violations() const {
  int n = 0;
  for (const auto& r : intervals) n += r.demand_violations;
  return n;
}

int ProvisionTimeline::availability_violations() const {
  int n = 0;
  for (const auto& r : intervals) n += r.availability_violations;
  return n;
}

int ProvisionTimeline::infeasible_intervals() const {
  int n = 0;
  for (const auto& r : intervals) n += r.infeasible ? 1 : 0;
  return n;
}

std::string ProvisionTimeline::to_text() const {
  std::string out = fmt::format("# policy {}\n# interval time_s type workload count watts\n", to_string(policy));
  for (const auto& r : intervals) {
    for (std::size_t h = 0; h < types.size(); ++h) {
      for (std::size_t m = 0; m < workloads.size(); ++m) {
        const int n = r.allocation.n[h][m];
        out += fmt::format("{} {} {} {} {} {}\n", r.index, kv::format_number(r.time_s), types[h], workloads[m], n,
                           kv::format_number(n * unit_power[h][m]));
      }
    }
  }
  kv::Document doc;
  kv::Section& s = doc.add_section("summary", to_string(policy));
  s.add("intervals", std::to_string(intervals.size()));
  s.add("peak_power_w", kv::format_number(peak_power_w()));
  s.add("avg_power_w", kv::format_number(avg_power_w()));
  s.add("peak_servers", std::to_string(peak_servers()));
  s.add("avg_servers", kv::format_number(avg_servers()));
  s.add("demand_violations", std::to_string(demand_violations()));
  s.add("availability_violations", std::to_string(availability_violations()));
  s.add("infeasible_intervals", std::to_string(infeasible_intervals()));
  int shortfalls = 0;
  for (const auto& r : intervals) shortfalls += r.coverage_shortfalls;
  s.add("coverage_shortfalls", std::to_string(shortfalls));
  return out + doc.serialize();
}

namespace {

// Greedy fill that stops at exhaustion instead of failing.
AllocationMatrix best_effort(const ProvisionProblem& p, RankBy rank) {
  AllocationMatrix a = zero_allocation(p);
  std::vector<int> spare = p.availability;
  std::vector<int> order(p.num_workloads());
  for (int m = 0; m < p.num_workloads(); ++m) order[m] = m;
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return p.load[x] > p.load[y]; });
  for (int m : order) {
    double cap = 0.0;
    for (int h : rank_types(p, m, rank)) {
      if (cap >= p.demand(m)) break;
      const int take = std::min(spare[h], static_cast<int>(std::ceil((p.demand(m) - cap) / p.qps[h][m])));
      a.n[h][m] += take;
      spare[h] -= take;
      cap += take * p.qps[h][m];
    }
  }
  return a;
}

double trailing_r(const LoadTrace& trace, double t, const ClusterOptions& opt) {
  LoadTrace window;
  window.workload = trace.workload;
  window.interval_s = trace.interval_s;
  for (const auto& pt : trace.points) {
    if (pt.time_s >= t - opt.r_window_s && pt.time_s <= t) window.points.push_back(pt);
  }
  if (window.points.size() < 2) return opt.r_percent;
  if (window.points.back().time_s - window.points.front().time_s < opt.interval_s) return opt.r_percent;
  return estimate_overprovision_rate(window, opt.interval_s);
}

struct Pending {
  double ready_s;
  int h, m, count;
};

}  // namespace

ProvisionTimeline run_cluster_sim(const std::vector<LoadTrace>& traces, const EfficiencyTable& table,
                                  const std::vector<ServerSpec>& types, Policy policy, const ClusterOptions& opt) {
  if (traces.empty()) throw PreconditionError("cluster simulation needs at least one trace");
  if (!(opt.interval_s > 0.0) || !(opt.setup_delay_s >= 0.0)) {
    throw PreconditionError("interval must be > 0 and setup delay >= 0");
  }
  for (const auto& t : traces) {
    if (t.points.empty()) throw PreconditionError(fmt::format("trace for {} is empty", t.workload));
    if (t.points.front().time_s != traces[0].points.front().time_s) {
      throw PreconditionError(fmt::format("trace for {} does not start with the others", t.workload));
    }
  }
  ProvisionTimeline tl;
  tl.policy = policy;
  for (const auto& t : traces) tl.workloads.push_back(t.workload);
  for (const auto& s : types) tl.types.push_back(s.name);
  const int H = static_cast<int>(types.size()), M = static_cast<int>(traces.size());
  {
    const ProvisionProblem shape = make_problem(table, tl.workloads, types, std::vector<double>(M, 0.0), 0.0);
    tl.unit_power = shape.power;
  }

  const double t0 = traces[0].points.front().time_s;
  double t_end = t0;
  for (const auto& t : traces) t_end = std::max(t_end, t.points.back().time_s);
  const int intervals = static_cast<int>(std::floor((t_end - t0) / opt.interval_s + 1e-9)) + 1;

  std::vector<std::vector<int>> active(H, std::vector<int>(M, 0));
  std::vector<Pending> pending;
  auto promote = [&](double until, IntervalRecord* rec) {
    std::stable_sort(pending.begin(), pending.end(),
                     [](const Pending& a, const Pending& b) { return a.ready_s < b.ready_s; });
    auto it = pending.begin();
    for (; it != pending.end() && it->ready_s <= until; ++it) {
      active[it->h][it->m] += it->count;
      if (rec) rec->activations += it->count;
    }
    pending.erase(pending.begin(), it);
  };

  for (int k = 0; k < intervals; ++k) {
    const double t = t0 + k * opt.interval_s;
    if (k > 0) promote(t, &tl.intervals.back());
    IntervalRecord rec;
    rec.index = k;
    rec.time_s = t;
    for (const auto& tr : traces) {
      rec.load.push_back(tr.at(t));
      rec.r_percent.push_back(opt.r_mode == RMode::kFixed ? opt.r_percent : trailing_r(tr, t, opt));
    }
    ProvisionProblem p = make_problem(table, tl.workloads, types, rec.load, opt.r_percent);
    p.r_by_workload = rec.r_percent;
    try {
      switch (policy) {
        case Policy::kHercules: rec.allocation = hercules_allocate(p); break;
        case Policy::kGreedy: rec.allocation = greedy_allocate(p, opt.rank); break;
        case Policy::kPriority: rec.allocation = priority_allocate(p, opt.rank); break;
        case Policy::kNh: rec.allocation = nh_allocate(p, opt.seed); break;
      }
    } catch (const InfeasibleError& e) {
      rec.infeasible = true;
      rec.infeasible_reason = e.what();
      rec.allocation = best_effort(p, opt.rank);
    }
    rec.allocation.time_s = t;
    rec.servers = rec.allocation.servers();
    rec.power_w = rec.allocation.power(p);
    for (const auto& v : check_allocation(p, rec.allocation)) {
      if (v.rfind("demand:", 0) == 0) ++rec.demand_violations;
      if (v.rfind("availability:", 0) == 0) ++rec.availability_violations;
    }

    // Shrinking cells cancel pending units first, then release active ones
    // at once; growing cells queue activations behind the setup delay.
    for (int h = 0; h < H; ++h) {
      for (int m = 0; m < M; ++m) {
        int have = active[h][m];
        for (const auto& q : pending) {
          if (q.h == h && q.m == m) have += q.count;
        }
        int target = rec.allocation.n[h][m];
        if (target > have) {
          pending.push_back({t + opt.setup_delay_s, h, m, target - have});
          continue;
        }
        int cut = have - target;
        for (auto it = pending.rbegin(); it != pending.rend() && cut > 0; ++it) {
          if (it->h != h || it->m != m) continue;
          const int c = std::min(cut, it->count);
          it->count -= c;
          cut -= c;
        }
        pending.erase(std::remove_if(pending.begin(), pending.end(), [](const Pending& q) { return q.count == 0; }),
                      pending.end());
        active[h][m] -= cut;
        rec.releases += cut;
      }
    }
    for (int h = 0; h < H; ++h) {
      int used = 0;
      for (int m = 0; m < M; ++m) used += active[h][m];
      for (const auto& q : pending) {
        if (q.h == h) used += q.count;
      }
      if (used > p.availability[h]) ++rec.availability_violations;
    }

    // Coverage between this boundary and the next, against ready servers.
    const double t_next = t + opt.interval_s;
    for (int m = 0; m < M; ++m) {
      for (const auto& pt : traces[m].points) {
        if (pt.time_s < t || pt.time_s >= t_next) continue;
        double cap = 0.0;
        for (int h = 0; h < H; ++h) {
          int n = active[h][m];
          for (const auto& q : pending) {
            if (q.h == h && q.m == m && q.ready_s <= pt.time_s) n += q.count;
          }
          cap += n * p.qps[h][m];
        }
        if (pt.qps > cap * (1.0 + 1e-12)) ++rec.coverage_shortfalls;
      }
    }
    tl.intervals.push_back(std::move(rec));
  }
  promote(t0 + intervals * opt.interval_s, &tl.intervals.back());
  return tl;
}

}  // namespace hercules
