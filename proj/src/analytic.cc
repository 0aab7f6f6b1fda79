#include "hercules/analytic.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include <map>
#include <mutex>
#include <string>

#include "hercules/error.h"

namespace hercules {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Law of the fused batch size when jobs (chunks of at most d items) are
// appended until the trigger is reached. Quantized to equal-mass bins.
struct BatchLaw {
  std::vector<double> size;
  std::vector<double> prob;
  double mean = 0.0;
};

const BatchLaw& batch_law(const SizeDistribution& sizes, int d, int trigger) {
  static std::mutex mu;
  static std::map<std::string, BatchLaw> cache;
  const std::string key = fmt::format("{}|{}|{}|{}|{}|{}", sizes.log_mean, sizes.log_sigma, sizes.min_items,
                                      sizes.max_items, d, trigger);
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  const std::vector<double> p = sizes.probabilities();
  const int lo = static_cast<int>(std::lround(sizes.min_items));
  const int bmax = std::min(d, lo + static_cast<int>(p.size()) - 1);
  std::vector<double> job(bmax + 1, 0.0);
  double jobs = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int n = lo + static_cast<int>(i);
    if (n / d > 0) job[d] += p[i] * (n / d);
    if (n % d > 0) job[n % d] += p[i];
    jobs += p[i] * ((n + d - 1) / d);
  }
  for (double& x : job) x /= jobs;

  const int t = std::max(1, trigger);
  std::vector<double> partial(t, 0.0);
  std::vector<double> batch(t + bmax, 0.0);
  partial[0] = 1.0;
  for (int x = 0; x < t; ++x) {
    if (partial[x] == 0.0) continue;
    for (int b = 1; b <= bmax; ++b) {
      if (job[b] == 0.0) continue;
      const double m = partial[x] * job[b];
      if (x + b < t) {
        partial[x + b] += m;
      } else {
        batch[x + b] += m;
      }
    }
  }
  BatchLaw law;
  constexpr int kBins = 48;
  double mass = 0.0;
  double moment = 0.0;
  double total = 0.0;
  for (double x : batch) total += x;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    if (batch[s] == 0.0) continue;
    const double q = batch[s] / total;
    mass += q;
    moment += q * static_cast<double>(s);
    law.mean += q * static_cast<double>(s);
    if (mass >= 1.0 / kBins) {
      law.size.push_back(moment / mass);
      law.prob.push_back(mass);
      mass = 0.0;
      moment = 0.0;
    }
  }
  if (mass > 0.0) {
    law.size.push_back(moment / mass);
    law.prob.push_back(mass);
  }
  return cache.emplace(key, std::move(law)).first->second;
}

struct PathPart {
  double compute = 0.0;
  double load = 0.0;
  double comm = 0.0;
};

PathPart cpu_part(const Stage& s, double b, double rounds) {
  return {rounds * (s.fixed_s + b * s.item_s), rounds * b * s.sparse_item_s, rounds * b * s.comm_item_s};
}

}  // namespace

double LaneModel::tail_at(double lane_qps, double queue_factor) const {
  if (lane_qps <= 0.0) return base_tail_s;
  double wait = 0.0;
  for (std::size_t i = 0; i < rho_per_qps.size(); ++i) {
    const double rho = lane_qps * rho_per_qps[i];
    if (rho >= 1.0) return kInf;
    const double c = servers[i];
    const double g = c <= 1 ? rho / (1.0 - rho) : std::pow(rho, std::sqrt(2.0 * (c + 1.0)) - 1.0) / (c * (1.0 - rho));
    wait += queue_factor * g * wait_scale_s[i];
  }
  return base_tail_s + wait;
}

LaneModel model_lane(const Pipeline& p, std::size_t lane) {
  const Lane& l = p.lanes.at(lane);
  if (l.stages.empty() || l.stages[0].kind != StageKind::kSplit) {
    throw PreconditionError("model_lane: lane must start with a split stage");
  }
  const SizeDistribution& sizes = p.calib.sizes;
  const double mean_n = sizes.mean();

  const Stage& s1 = l.stages[0];
  const int d = std::max(1, s1.split);
  const double jobs = sizes.mean_chunks(d);
  const double job_items = mean_n / jobs;

  // Job-size moments: E[sum b^2] over a query's jobs, and E[sum J^2] where J
  // counts the jobs round-robin lands on each thread.
  const double sum_b2 = sizes.expect([d](int n) {
    const double full = n / d;
    const double rem = n % d;
    return full * d * d + rem * rem;
  });
  const int m1 = s1.workers;
  const double sum_j2 = sizes.expect([d, m1](int n) {
    const int k = (n + d - 1) / d;
    if (k <= m1) return static_cast<double>(k);
    const double hi = (k + m1 - 1) / m1;
    const double lo = k / m1;
    const int extra = k % m1;
    return extra * hi * hi + (m1 - extra) * lo * lo;
  });
  const double b_var = std::max(0.0, sum_b2 / jobs - job_items * job_items);

  LaneModel out;
  const double per1 = s1.item_s + s1.comm_item_s + s1.sparse_item_s;
  const double work1 = jobs * s1.fixed_s + mean_n * per1;
  const double svc_mean1 = work1 / jobs;
  const double svc_var1 = per1 * per1 * b_var;
  out.rho_per_qps.push_back(work1 / s1.workers);
  out.wait_scale_s.push_back((sum_j2 * svc_mean1 * svc_mean1 + jobs * svc_var1) / (2.0 * jobs * svc_mean1));
  out.servers.push_back(1);
  out.core_s += work1 * s1.cores_per_worker;
  out.mem_bytes += mean_n * s1.mem_bytes_item;

  const Stage* s2 = l.stages.size() > 1 ? &l.stages[1] : nullptr;
  if (s2 != nullptr && s2->kind == StageKind::kPool) {
    const double per2 = s2->item_s + s2->comm_item_s + s2->sparse_item_s;
    const double work2 = jobs * s2->fixed_s + mean_n * per2;
    const double svc_mean2 = work2 / jobs;
    const double cs2 = per2 * per2 * b_var / (svc_mean2 * svc_mean2);
    out.rho_per_qps.push_back(work2 / s2->workers);
    // Jobs reach the pool in per-query bursts: the arrival variability of a
    // compound Poisson stream is E[k^2] / E[k].
    const double k2 = sizes.expect([d](int n) {
      const double k = (n + d - 1) / d;
      return k * k;
    });
    out.wait_scale_s.push_back(svc_mean2 * (k2 / jobs + cs2) / 2.0);
    out.servers.push_back(s2->workers);
    out.core_s += work2 * s2->cores_per_worker;
  }

  double fill_wait = 0.0;
  double batch = 0.0;
  if (s2 != nullptr && s2->kind == StageKind::kAccel) {
    const BatchLaw& law = batch_law(sizes, d, s2->fuse_items);
    batch = law.mean;
    out.accel_batch = batch;
    // Load of batch i overlaps compute of batch i-1, so a thread advances by
    // max(L(B_i), C(B_{i-1})) with independent batch sizes.
    double step = 0.0;
    double comp = 0.0;
    double own = 0.0;
    double own2 = 0.0;
    for (std::size_t i = 0; i < law.size.size(); ++i) {
      const double li = s2->load_time(law.size[i], 1.0);
      const double ci = s2->compute_time(law.size[i], 1.0);
      comp += law.prob[i] * ci;
      const double mi = std::max(li, ci);
      own += law.prob[i] * mi;
      own2 += law.prob[i] * mi * mi;
      for (std::size_t j = 0; j < law.size.size(); ++j) {
        step += law.prob[i] * law.prob[j] * std::max(li, s2->compute_time(law.size[j], 1.0));
      }
    }
    const double cs2 = own > 0 ? std::max(0.0, own2 / (own * own) - 1.0) : 0.0;
    out.rho_per_qps.push_back(mean_n / batch * step / s2->workers);
    out.wait_scale_s.push_back(step * (1.0 + cs2) / 2.0);
    out.servers.push_back(s2->workers);
    out.accel_s += mean_n / batch * comp / s2->workers;
    // Partial batches wait for the trigger or the timer; the fill rate is taken
    // at saturation so the tail stays monotone in load.
    const double sat = std::min(s1.workers / work1, s2->workers * batch / (mean_n * step));
    fill_wait = std::min(s2->fuse_timeout_s, batch / (sat * mean_n));
  }

  // Zero-load critical path of a query of n items. Not monotone in n (one
  // more item can add a round), so the tail is a quantile over the size law.
  auto path_of = [&](int n, PathPart* parts) {
    // Chunks of d items plus a remainder, dealt round-robin from an arbitrary
    // thread; the busiest thread finishes last.
    const int full = n / d;
    const int rem = n % d;
    const int k = full + (rem > 0 ? 1 : 0);
    const double b = std::min(n, d);
    const double svc1 = s1.cpu_service(b, 1.0);
    const double svc_rem = s1.cpu_service(rem, 1.0);
    double path = 0.0;
    double rounds = 0.0;
    for (int t = 0; t < std::min(k, s1.workers); ++t) {
      const int cnt = (k - t + s1.workers - 1) / s1.workers;
      double load = cnt * svc1;
      if (rem > 0 && full > 0 && (k - 1) % s1.workers == t) load -= svc1 - svc_rem;
      if (load > path) {
        path = load;
        rounds = cnt;
      }
    }
    const double r1 = rounds;
    PathPart acc = cpu_part(s1, b, r1);
    if (s2 != nullptr && s2->kind == StageKind::kPool) {
      const double r2 = std::ceil(static_cast<double>(k) / s2->workers);
      const double svc2 = s2->cpu_service(b, 1.0);
      // Two-stage flow shop: the slower stage sets the pace, the faster one
      // adds a single job of fill or drain.
      path = std::max(path, r2 * svc2) + std::min(svc1, svc2);
      const PathPart p2 = cpu_part(*s2, b, 1.0);
      acc.compute += p2.compute;
      acc.load += p2.load;
      acc.comm += p2.comm;
    } else if (s2 != nullptr) {
      // The query's items occupy ceil(n / B) batches spread over threads.
      const double nb = std::ceil(n / batch);
      const double tb = std::min<double>(n, batch);
      const double tload = s2->load_time(tb, 1.0);
      const double tcomp = s2->compute_time(tb, 1.0);
      const double rounds = std::ceil(nb / s2->workers);
      acc.load += tload;
      acc.compute += tcomp;
      path += tload + tcomp + (rounds - 1.0) * std::max(tload, tcomp) + fill_wait;
    }
    if (parts != nullptr) *parts = acc;
    return path;
  };
  std::vector<std::pair<double, int>> dist;
  std::vector<double> prob;
  {
    const int lo = static_cast<int>(std::lround(sizes.min_items));
    const int hi = static_cast<int>(std::lround(sizes.max_items));
    for (int n = lo; n <= hi; ++n) dist.emplace_back(path_of(n, nullptr), n);
    prob = sizes.probabilities();
  }
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a].first < dist[b].first; });
  double acc = 0.0;
  std::size_t pick = order.back();
  for (std::size_t i : order) {
    acc += prob[i];
    if (acc >= p.calib.tail_percentile - 1e-12) {
      pick = i;
      break;
    }
  }
  PathPart parts;
  const double path = path_of(dist[pick].second, &parts);

  out.sat_qps = kInf;
  for (double r : out.rho_per_qps) out.sat_qps = std::min(out.sat_qps, r > 0 ? 1.0 / r : kInf);
  out.base_tail_s = path;
  const double attributed = parts.compute + parts.load + parts.comm;
  const double scale = attributed > 0 ? (path - fill_wait) / attributed : 0.0;
  out.base_breakdown.queueing_s = fill_wait;
  out.base_breakdown.compute_s = parts.compute * scale;
  out.base_breakdown.data_load_s = parts.load * scale;
  out.base_breakdown.comm_s = parts.comm * scale;
  return out;
}

Utilization pipeline_utilization(const Pipeline& p, const std::vector<LaneModel>& lanes,
                                 const std::vector<double>& lane_qps) {
  Utilization u;
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const double q = std::min(lane_qps[i], lanes[i].sat_qps);
    u.cpu += q * lanes[i].core_s / p.cores;
    u.mem += q * lanes[i].mem_bytes / p.mem_capacity_bps;
    u.accel += q * lanes[i].accel_s;
  }
  u.cpu = std::min(u.cpu, 1.0);
  u.mem = std::min(u.mem, 1.0);
  u.accel = std::min(u.accel, 1.0);
  return u;
}

namespace {

double lane_bound(const LaneModel& m, double sla_s, double kappa) {
  if (!(m.base_tail_s < sla_s) || !(m.sat_qps > 0.0)) return 0.0;
  if (std::isinf(sla_s)) return m.sat_qps;
  double lo = 0.0;
  double hi = m.sat_qps;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (m.tail_at(mid, kappa) <= sla_s) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

std::vector<LaneModel> model_lanes(const Pipeline& p) {
  std::vector<LaneModel> out;
  for (std::size_t i = 0; i < p.lanes.size(); ++i) out.push_back(model_lane(p, i));
  return out;
}

std::vector<double> default_weights(const std::vector<LaneModel>& lanes, double sla_s, double kappa) {
  std::vector<double> w;
  for (const auto& l : lanes) w.push_back(lane_bound(l, sla_s, kappa));
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (total <= 0.0) {
    w.clear();
    for (const auto& l : lanes) w.push_back(std::isinf(l.sat_qps) ? 1.0 : l.sat_qps);
    total = std::accumulate(w.begin(), w.end(), 0.0);
  }
  for (double& x : w) x = total > 0 ? x / total : 1.0 / w.size();
  return w;
}

}  // namespace

AnalyticResult analytic_eval(const Pipeline& p, const ServerSpec& server, double offered_qps,
                             std::optional<std::vector<double>> lane_weights) {
  if (!(offered_qps >= 0.0)) throw PreconditionError("analytic_eval: offered load must be >= 0");
  const auto lanes = model_lanes(p);
  const double kappa = p.calib.queue_factor;
  std::vector<double> w = lane_weights ? *lane_weights : default_weights(lanes, p.sla_s, kappa);
  if (w.size() != lanes.size()) throw PreconditionError("analytic_eval: lane weight count mismatch");
  AnalyticResult r;
  std::vector<double> rates;
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const double q = w[i] * offered_qps;
    rates.push_back(q);
    if (q <= 0.0) continue;
    if (q >= lanes[i].sat_qps) r.saturated = true;
    r.tail_latency_s = std::max(r.tail_latency_s, lanes[i].tail_at(q, kappa));
    r.qps += std::min(q, lanes[i].sat_qps);
  }
  if (offered_qps == 0.0) {
    for (const auto& l : lanes) r.tail_latency_s = std::max(r.tail_latency_s, l.base_tail_s);
  }
  r.lane_qps = rates;
  r.utilization = pipeline_utilization(p, lanes, rates);
  r.power_w = power_draw(server, p.cfg, r.utilization, p.calib);
  return r;
}

BoundedQps analytic_latency_bounded_qps(const Pipeline& p, const ServerSpec& server, double sla_s,
                                        std::optional<double> power_budget_w) {
  const auto lanes = model_lanes(p);
  const double kappa = p.calib.queue_factor;
  BoundedQps b;
  std::vector<double> rates;
  double min_base = kInf;
  for (const auto& l : lanes) {
    rates.push_back(lane_bound(l, sla_s, kappa));
    b.saturation_qps += l.sat_qps;
    min_base = std::min(min_base, l.base_tail_s);
  }
  b.idle_power_w = power_draw(server, p.cfg, Utilization{}, p.calib);
  b.qps = std::accumulate(rates.begin(), rates.end(), 0.0);
  b.zero_load_tail_s = 0.0;
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    if (rates[i] > 0) b.zero_load_tail_s = std::max(b.zero_load_tail_s, lanes[i].base_tail_s);
  }
  if (b.qps <= 0.0) {
    b.zero_load_tail_s = min_base;
    b.violation = true;
    b.qps = 0.0;
    b.lane_qps.assign(lanes.size(), 0.0);
    b.power_w = b.idle_power_w;
    b.tail_s = min_base;
    return b;
  }
  double power = power_draw(server, p.cfg, pipeline_utilization(p, lanes, rates), p.calib);
  if (power_budget_w && power > *power_budget_w) {
    if (!(b.idle_power_w < *power_budget_w)) {
      b.violation = true;
      b.qps = 0.0;
      b.lane_qps.assign(lanes.size(), 0.0);
      b.power_w = b.idle_power_w;
      b.tail_s = b.zero_load_tail_s;
      return b;
    }
    // Power is affine in the lane rates below saturation.
    const double s = (*power_budget_w - b.idle_power_w) / (power - b.idle_power_w);
    for (double& q : rates) q *= s;
    b.qps *= s;
    power = power_draw(server, p.cfg, pipeline_utilization(p, lanes, rates), p.calib);
  }
  b.lane_qps = rates;
  b.power_w = power;
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    if (rates[i] > 0) b.tail_s = std::max(b.tail_s, lanes[i].tail_at(rates[i], kappa));
  }
  return b;
}

}  // namespace hercules
