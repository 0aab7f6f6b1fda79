#include "hercules/provisioner.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "hercules/error.h"

namespace hercules {
namespace {

// Relative slack on the demand rows for float noise in capacity sums.
constexpr double kDemandSlack = 1e-12;

bool covers(double capacity, double demand) {
  return capacity >= demand * (1.0 - kDemandSlack) - 1e-9;
}

double capacity_of(const ProvisionProblem& p, const AllocationMatrix& a, int m) {
  double cap = 0.0;
  for (int h = 0; h < p.num_types(); ++h) cap += a.n[h][m] * p.qps[h][m];
  return cap;
}

std::vector<int> workload_order(const ProvisionProblem& p) {
  std::vector<int> order(p.num_workloads());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p.load[a] > p.load[b]; });
  return order;
}

[[noreturn]] void unmet(const ProvisionProblem& p, int m, const char* who, double cap) {
  throw InfeasibleError(fmt::format("{}: workload {} needs {} QPS but only {} fits in the remaining servers",
                                    who, p.workloads[m], p.demand(m), cap));
}

int units_for(double remaining, double qps) {
  return static_cast<int>(std::ceil(remaining / qps * (1.0 - kDemandSlack) - 1e-9));
}

}  // namespace

ProvisionProblem make_problem(const EfficiencyTable& table, const std::vector<std::string>& workloads,
                              const std::vector<ServerSpec>& types, const std::vector<double>& load,
                              double r_percent) {
  if (load.size() != workloads.size()) throw PreconditionError("one load per workload required");
  if (!(r_percent >= 0.0)) throw PreconditionError("over-provision rate must be >= 0");
  ProvisionProblem p;
  p.workloads = workloads;
  p.load = load;
  p.r_percent = r_percent;
  for (const auto& s : types) {
    p.types.push_back(s.name);
    p.availability.push_back(s.availability);
    std::vector<double> q, w;
    for (const auto& m : workloads) {
      const EfficiencyTuple* e = table.find(m, s.name);
      const bool ok = e && !e->violation && e->qps > 0.0;
      q.push_back(ok ? e->qps : 0.0);
      w.push_back(ok ? e->power_w : 0.0);
    }
    p.qps.push_back(std::move(q));
    p.power.push_back(std::move(w));
  }
  for (int m = 0; m < p.num_workloads(); ++m) {
    if (!(p.load[m] >= 0.0)) throw PreconditionError(fmt::format("load of {} must be >= 0", p.workloads[m]));
    if (p.load[m] == 0.0) continue;
    bool any = false;
    for (int h = 0; h < p.num_types(); ++h) any |= p.qps[h][m] > 0.0;
    if (!any) {
      throw InfeasibleError(fmt::format("workload {} has no server type with positive QPS", p.workloads[m]));
    }
  }
  return p;
}

LPInstance build_lp(const ProvisionProblem& p) {
  LPInstance inst;
  inst.problem = p;
  for (int h = 0; h < p.num_types(); ++h) {
    for (int m = 0; m < p.num_workloads(); ++m) {
      if (p.qps[h][m] <= 0.0) continue;
      inst.var_type.push_back(h);
      inst.var_workload.push_back(m);
      inst.lp.c.push_back(p.power[h][m]);
    }
  }
  const std::size_t vars = inst.lp.c.size();
  for (int m = 0; m < p.num_workloads(); ++m) {
    std::vector<double> row(vars, 0.0);
    for (std::size_t k = 0; k < vars; ++k) {
      if (inst.var_workload[k] == m) row[k] = p.qps[inst.var_type[k]][m];
    }
    inst.lp.add_row(std::move(row), RowSense::kGe, p.demand(m), "demand " + p.workloads[m]);
  }
  inst.demand_rows = p.num_workloads();
  for (int h = 0; h < p.num_types(); ++h) {
    std::vector<double> row(vars, 0.0);
    for (std::size_t k = 0; k < vars; ++k) {
      if (inst.var_type[k] == h) row[k] = 1.0;
    }
    inst.lp.add_row(std::move(row), RowSense::kLe, p.availability[h], "availability " + p.types[h]);
  }
  return inst;
}

FractionalAllocation solve_allocation(const LPInstance& inst) {
  const ProvisionProblem& p = inst.problem;
  FractionalAllocation f;
  f.raw = solve_lp(inst.lp);
  if (f.raw.status != LpStatus::kOptimal) {
    std::vector<std::string> names;
    for (int r : f.raw.infeasible_rows) {
      if (r < inst.demand_rows) names.push_back(p.workloads[r]);
    }
    if (names.empty()) {
      for (int m = 0; m < p.num_workloads(); ++m) names.push_back(p.workloads[m]);
    }
    throw InfeasibleError(fmt::format("allocation LP {}: demand of {} cannot be met within availability",
                                      to_string(f.raw.status), fmt::join(names, ", ")));
  }
  f.n.assign(p.num_types(), std::vector<double>(p.num_workloads(), 0.0));
  for (std::size_t k = 0; k < f.raw.x.size(); ++k) f.n[inst.var_type[k]][inst.var_workload[k]] = f.raw.x[k];
  f.objective = f.raw.objective;
  return f;
}

double AllocationMatrix::power(const ProvisionProblem& p) const {
  double w = 0.0;
  for (std::size_t h = 0; h < n.size(); ++h) {
    for (std::size_t m = 0; m < n[h].size(); ++m) w += n[h][m] * p.power[h][m];
  }
  return w;
}

int AllocationMatrix::servers() const {
  int s = 0;
  for (const auto& row : n) s += std::accumulate(row.begin(), row.end(), 0);
  return s;
}

int AllocationMatrix::servers_of_type(int h) const {
  return std::accumulate(n[h].begin(), n[h].end(), 0);
}

AllocationMatrix zero_allocation(const ProvisionProblem& p) {
  AllocationMatrix a;
  a.n.assign(p.num_types(), std::vector<int>(p.num_workloads(), 0));
  return a;
}

std::vector<std::string> check_allocation(const ProvisionProblem& p, const AllocationMatrix& a) {
  std::vector<std::string> out;
  if (static_cast<int>(a.n.size()) != p.num_types()) {
    out.push_back("allocation has the wrong number of server types");
    return out;
  }
  for (int h = 0; h < p.num_types(); ++h) {
    if (static_cast<int>(a.n[h].size()) != p.num_workloads()) {
      out.push_back(fmt::format("type {} row has the wrong number of workloads", p.types[h]));
      return out;
    }
    for (int m = 0; m < p.num_workloads(); ++m) {
      if (a.n[h][m] < 0) out.push_back(fmt::format("N[{}][{}] = {} < 0", p.types[h], p.workloads[m], a.n[h][m]));
      if (a.n[h][m] > 0 && p.qps[h][m] <= 0.0) {
        out.push_back(fmt::format("N[{}][{}] = {} on a pair with no QPS", p.types[h], p.workloads[m], a.n[h][m]));
      }
    }
    if (a.servers_of_type(h) > p.availability[h]) {
      out.push_back(fmt::format("availability: type {} uses {} of {}", p.types[h], a.servers_of_type(h),
                                p.availability[h]));
    }
  }
  for (int m = 0; m < p.num_workloads(); ++m) {
    const double cap = capacity_of(p, a, m);
    if (!covers(cap, p.demand(m))) {
      out.push_back(fmt::format("demand: workload {} capacity {} below {}", p.workloads[m], cap, p.demand(m)));
    }
  }
  return out;
}

const char* to_string(RankBy r) { return r == RankBy::kQps ? "qps" : "qps_per_watt"; }

std::vector<int> rank_types(const ProvisionProblem& p, int m, RankBy rank) {
  std::vector<int> order;
  for (int h = 0; h < p.num_types(); ++h) {
    if (p.qps[h][m] > 0.0) order.push_back(h);
  }
  auto eff = [&](int h) { return p.power[h][m] > 0.0 ? p.qps[h][m] / p.power[h][m] : 0.0; };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (rank == RankBy::kQpsPerWatt) {
      if (eff(a) != eff(b)) return eff(a) > eff(b);
      return p.qps[a][m] > p.qps[b][m];
    }
    if (p.qps[a][m] != p.qps[b][m]) return p.qps[a][m] > p.qps[b][m];
    return p.power[a][m] < p.power[b][m];
  });
  return order;
}

AllocationMatrix greedy_allocate(const ProvisionProblem& p, RankBy rank) {
  AllocationMatrix a = zero_allocation(p);
  std::vector<int> spare = p.availability;
  for (int m : workload_order(p)) {
    double cap = 0.0;
    for (int h : rank_types(p, m, rank)) {
      if (covers(cap, p.demand(m))) break;
      const int take = std::min(spare[h], units_for(p.demand(m) - cap, p.qps[h][m]));
      if (take <= 0) continue;
      a.n[h][m] += take;
      spare[h] -= take;
      cap += take * p.qps[h][m];
    }
    if (!covers(cap, p.demand(m))) unmet(p, m, "greedy", cap);
  }
  return a;
}

AllocationMatrix nh_allocate(const ProvisionProblem& p, std::uint64_t seed) {
  AllocationMatrix a = zero_allocation(p);
  std::vector<int> spare = p.availability;
  std::mt19937_64 rng(seed);
  for (int m : workload_order(p)) {
    double cap = 0.0;
    while (!covers(cap, p.demand(m))) {
      std::int64_t total = 0;
      for (int h = 0; h < p.num_types(); ++h) {
        if (p.qps[h][m] > 0.0) total += spare[h];
      }
      if (total == 0) unmet(p, m, "nh", cap);
      std::int64_t pick = std::uniform_int_distribution<std::int64_t>(0, total - 1)(rng);
      for (int h = 0; h < p.num_types(); ++h) {
        if (p.qps[h][m] <= 0.0) continue;
        if (pick < spare[h]) {
          a.n[h][m] += 1;
          spare[h] -= 1;
          cap += p.qps[h][m];
          break;
        }
        pick -= spare[h];
      }
    }
  }
  return a;
}

double priority_gain(const ProvisionProblem& p, int m, int h, const std::vector<int>& order) {
  auto it = std::find(order.begin(), order.end(), h);
  if (it == order.end()) throw PreconditionError("priority_gain: type not in the ranking");
  if (it + 1 == order.end()) return std::numeric_limits<double>::infinity();
  const int next = *(it + 1);
  const double eff_h = p.qps[h][m] / p.power[h][m];
  const double eff_next = p.qps[next][m] / p.power[next][m];
  return eff_h / eff_next;
}

AllocationMatrix priority_allocate(const ProvisionProblem& p, RankBy rank) {
  struct State {
    AllocationMatrix a;
    std::vector<int> spare;
    std::vector<double> cap;
  };
  State st{zero_allocation(p), p.availability, std::vector<double>(p.num_workloads(), 0.0)};
  std::vector<std::vector<int>> ranking(p.num_workloads());
  for (int m = 0; m < p.num_workloads(); ++m) ranking[m] = rank_types(p, m, rank);
  const std::vector<int> order = workload_order(p);

  // Types the workload can still draw from, in rank order.
  auto open_types = [&](const State& s, int m) {
    std::vector<int> out;
    for (int h : ranking[m]) {
      if (s.spare[h] > 0) out.push_back(h);
    }
    return out;
  };
  auto give = [&](State& s, int h, int m) {
    const int take = std::max(1, std::min(s.spare[h], units_for(p.demand(m) - s.cap[m], p.qps[h][m])));
    s.a.n[h][m] += take;
    s.spare[h] -= take;
    s.cap[m] += take * p.qps[h][m];
  };
  // Power once greedy finishes from `s`; infinite when greedy runs dry.
  auto greedy_power = [&](State s) {
    for (int m : order) {
      for (int h : ranking[m]) {
        if (covers(s.cap[m], p.demand(m))) break;
        if (s.spare[h] > 0) give(s, h, m);
      }
      if (!covers(s.cap[m], p.demand(m))) return std::numeric_limits<double>::infinity();
    }
    return s.a.power(p);
  };
  for (;;) {
    int first = -1;
    for (int m : order) {
      if (!covers(st.cap[m], p.demand(m))) {
        first = m;
        break;
      }
    }
    if (first < 0) break;
    const std::vector<int> open_first = open_types(st, first);
    if (open_first.empty()) unmet(p, first, "priority", st.cap[first]);
    const int h = open_first.front();
    // Every unmet workload whose best open type is h competes for it. The
    // winner is the one whose claim leaves the cheapest greedy completion,
    // then the larger per-unit gain, then load order. Giving h to `first` is
    // greedy's own next step, so each choice is no worse than greedy from here.
    int winner = first;
    State trial = st;
    give(trial, h, first);
    double best_power = greedy_power(trial);
    double best_gain = priority_gain(p, first, h, open_first);
    for (int m : order) {
      if (m == first || covers(st.cap[m], p.demand(m))) continue;
      const std::vector<int> open = open_types(st, m);
      if (open.empty() || open.front() != h) continue;
      trial = st;
      give(trial, h, m);
      const double w = greedy_power(trial);
      const double g = priority_gain(p, m, h, open);
      if (w < best_power || (w == best_power && g > best_gain)) {
        best_power = w;
        best_gain = g;
        winner = m;
      }
    }
    give(st, h, winner);
  }
  return st.a;
}

AllocationMatrix round_and_repair(const FractionalAllocation& frac, const ProvisionProblem& p) {
  AllocationMatrix a = zero_allocation(p);
  for (int h = 0; h < p.num_types(); ++h) {
    for (int m = 0; m < p.num_workloads(); ++m) {
      if (p.qps[h][m] <= 0.0) continue;
      a.n[h][m] = static_cast<int>(std::ceil(frac.n[h][m] - 1e-9));
      a.n[h][m] = std::max(a.n[h][m], 0);
    }
  }
  // Tops workload m back up on the open type with the lowest watts per QPS,
  // skipping type `skip`.
  auto top_up = [&](int m, int skip) {
    while (!covers(capacity_of(p, a, m), p.demand(m))) {
      int best = -1;
      for (int g = 0; g < p.num_types(); ++g) {
        if (g == skip || p.qps[g][m] <= 0.0) continue;
        if (a.servers_of_type(g) >= p.availability[g]) continue;
        if (best < 0 || p.power[g][m] / p.qps[g][m] < p.power[best][m] / p.qps[best][m]) best = g;
      }
      if (best < 0) unmet(p, m, "round_and_repair", capacity_of(p, a, m));
      a.n[best][m] += 1;
    }
  };
  // Overflowing types shed the unit with the most rounding slack.
  for (int h = 0; h < p.num_types(); ++h) {
    while (a.servers_of_type(h) > p.availability[h]) {
      int m_drop = -1;
      double slack = -std::numeric_limits<double>::infinity();
      for (int m = 0; m < p.num_workloads(); ++m) {
        if (a.n[h][m] > 0 && a.n[h][m] - frac.n[h][m] > slack) {
          slack = a.n[h][m] - frac.n[h][m];
          m_drop = m;
        }
      }
      a.n[h][m_drop] -= 1;
      top_up(m_drop, h);
    }
  }
  // The relaxation meets demand only to rounding error; close any gap the
  // ceiling left.
  for (int m = 0; m < p.num_workloads(); ++m) top_up(m, -1);
  // Trim: drop the most power-hungry unit that keeps its workload covered.
  for (;;) {
    int bh = -1, bm = -1;
    for (int h = 0; h < p.num_types(); ++h) {
      for (int m = 0; m < p.num_workloads(); ++m) {
        if (a.n[h][m] == 0) continue;
        if (!covers(capacity_of(p, a, m) - p.qps[h][m], p.demand(m))) continue;
        if (bh < 0 || p.power[h][m] > p.power[bh][bm]) {
          bh = h;
          bm = m;
        }
      }
    }
    if (bh < 0) break;
    a.n[bh][bm] -= 1;
  }

  AllocationMatrix best = a;
  double best_w = a.power(p);
  auto consider = [&](auto make) {
    try {
      AllocationMatrix alt = make();
      const double w = alt.power(p);
      if (w < best_w) {
        best = std::move(alt);
        best_w = w;
      }
    } catch (const InfeasibleError&) {
    }
  };
  consider([&] { return greedy_allocate(p); });
  consider([&] { return priority_allocate(p); });
  return best;
}

AllocationMatrix hercules_allocate(const ProvisionProblem& p) {
  return round_and_repair(solve_allocation(build_lp(p)), p);
}

EfficiencyTable refresh_efficiency(EfficiencyTable table, const std::vector<LiveSample>& samples) {
  for (const auto& s : samples) {
    if (!(s.qps >= 0.0)) throw PreconditionError("live QPS sample must be >= 0");
    for (auto& e : table.entries) {
      if (e.model == s.model && e.server == s.server) e.qps = 0.8 * e.qps + 0.2 * s.qps;
    }
  }
  return table;
}

}  // namespace hercules
