#include "hercules/serversim.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>

#include "hercules/analytic.h"
#include "hercules/error.h"

namespace hercules {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class EventType { kArrival, kCpuDone, kLoadDone, kComputeDone, kFuseTimeout };

struct Event {
  double t;
  std::uint64_t seq;
  EventType type;
  int lane;
  int stage;
  int worker;
  std::int64_t aux;
};

struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    if (a.t != b.t) return a.t > b.t;
    return a.seq > b.seq;
  }
};

struct Job {
  int query = 0;
  int items = 0;
  double r = 1.0;
  double ready = 0.0;
  StageLatency bd;
};

struct Batch {
  std::vector<Job> jobs;
  int items = 0;
  double r = 1.0;
  double load_start = 0.0;
  double load_end = 0.0;
  double comp_start = 0.0;
  double load_s = 0.0;
  double comp_s = 0.0;
};

struct CpuWorker {
  std::deque<Job> queue;  // private FIFO of split stages
  std::optional<Job> current;
  std::optional<Job> held;  // finished but blocked on a full downstream queue
};

struct AccelThread {
  std::optional<Batch> loading;
  std::optional<Batch> loaded;
  std::optional<Batch> computing;
};

struct StageState {
  std::vector<CpuWorker> workers;
  std::deque<Job> shared;                // pool stages
  std::deque<int> waiters;               // upstream workers blocked on `shared`
  std::vector<Job> fuse_buf;             // accel stages
  int fuse_items = 0;
  std::int64_t epoch = 0;
  std::deque<Batch> batches;
  std::vector<AccelThread> threads;
  int rr = 0;
};

struct QueryState {
  double arrival = 0.0;
  int remaining = 0;
  double done = -1.0;
  StageLatency bd;
};

class Sim {
 public:
  Sim(const Pipeline& p, const ServerSpec& server, const std::vector<Query>& stream, double duration,
      const SimOptions& opt)
      : p_(p), server_(server), stream_(stream), duration_(duration), opt_(opt) {
    warm_ = opt.warmup_frac * duration;
    const double drain = opt.drain_s >= 0 ? opt.drain_s : std::max(2.0, 10.0 * p.sla_s);
    horizon_ = duration + drain;
    bins_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((duration_ - warm_) / opt.power_window_s)));
    cpu_bin_.assign(bins_, 0.0);
    mem_bin_.assign(bins_, 0.0);
    acc_bin_.assign(bins_, 0.0);
    mean_rows_ = 0.0;
    lanes_.resize(p.lanes.size());
    for (std::size_t l = 0; l < p.lanes.size(); ++l) {
      for (const Stage& s : p.lanes[l].stages) {
        StageState st;
        if (s.kind == StageKind::kAccel) {
          st.threads.resize(s.workers);
        } else {
          st.workers.resize(s.workers);
        }
        lanes_[l].push_back(std::move(st));
      }
      for (const Stage& s : p.lanes[l].stages) {
        if (s.kind == StageKind::kAccel) accel_threads_ += s.workers;
      }
    }
    weights_ = opt.lane_weights;
    if (weights_.empty()) weights_ = default_lane_weights(p, server);
    if (weights_.size() != p.lanes.size()) throw PreconditionError("simulate: lane weight count mismatch");
    swrr_.assign(weights_.size(), 0.0);
  }

  static std::vector<double> default_lane_weights(const Pipeline& p, const ServerSpec& server) {
    if (p.lanes.size() == 1) return {1.0};
    BoundedQps b = analytic_latency_bounded_qps(p, server, p.sla_s);
    std::vector<double> w = b.lane_qps;
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (total <= 0) {
      w.clear();
      for (std::size_t i = 0; i < p.lanes.size(); ++i) {
        const double s = model_lane(p, i).sat_qps;
        w.push_back(std::isinf(s) ? 1.0 : s);
      }
    }
    return w;
  }

  SimReport run() {
    mean_rows_ = p_.mean_rows_per_item;
    queries_.resize(stream_.size());
    // Arrivals are injected lazily so the heap stays small.
    if (!stream_.empty()) push({stream_[0].arrival_time, 0, EventType::kArrival, 0, 0, 0, 0});
    bool cut = false;
    while (!events_.empty()) {
      Event e = events_.top();
      if (e.t > horizon_) {
        cut = true;
        break;
      }
      events_.pop();
      now_ = e.t;
      switch (e.type) {
        case EventType::kArrival:
          on_arrival(static_cast<std::size_t>(e.aux));
          break;
        case EventType::kCpuDone:
          on_cpu_done(e.lane, e.stage, e.worker);
          break;
        case EventType::kLoadDone:
          on_load_done(e.lane, e.stage, e.worker);
          break;
        case EventType::kComputeDone:
          on_compute_done(e.lane, e.stage, e.worker);
          break;
        case EventType::kFuseTimeout:
          on_timeout(e.lane, e.stage, e.aux);
          break;
      }
    }
    return report(cut);
  }

 private:
  void push(Event e) {
    e.seq = seq_++;
    events_.push(e);
  }

  void account(double start, double end, std::vector<double>& bins, double amount) {
    if (!(end > start)) return;
    const double rate = amount / (end - start);
    const double lo = std::max(start, warm_);
    const double hi = std::min(end, duration_);
    if (!(hi > lo)) return;
    const double w = opt_.power_window_s;
    auto b0 = static_cast<std::size_t>((lo - warm_) / w);
    for (std::size_t b = b0; b < bins_; ++b) {
      const double bs = warm_ + b * w;
      const double be = std::min(bs + w, duration_);
      if (bs >= hi) break;
      const double ov = std::min(be, hi) - std::max(bs, lo);
      if (ov > 0) bins[b] += rate * ov;
    }
  }

  std::size_t pick_lane() {
    if (weights_.size() == 1) return 0;
    const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      swrr_[i] += weights_[i];
      if (swrr_[i] > swrr_[best]) best = i;
    }
    swrr_[best] -= total;
    return best;
  }

  void on_arrival(std::size_t qi) {
    if (qi + 1 < stream_.size()) {
      push({stream_[qi + 1].arrival_time, 0, EventType::kArrival, 0, 0, 0, static_cast<std::int64_t>(qi + 1)});
    }
    const Query& q = stream_[qi];
    QueryState& qs = queries_[qi];
    qs.arrival = q.arrival_time;
    const double r = q.per_table_pooling.empty() || mean_rows_ <= 0 ? 1.0 : rows_per_item(q) / mean_rows_;
    const auto lane = static_cast<int>(pick_lane());
    const Stage& s = p_.lanes[lane].stages[0];
    StageState& st = lanes_[lane][0];
    const int d = std::max(1, s.split);
    const int jobs = (q.size + d - 1) / d;
    qs.remaining = jobs;
    for (int j = 0; j < jobs; ++j) {
      Job job;
      job.query = static_cast<int>(qi);
      job.items = std::min(d, q.size - j * d);
      job.r = r;
      job.ready = now_;
      const int w = st.rr;
      st.rr = (st.rr + 1) % s.workers;
      st.workers[w].queue.push_back(job);
      if (!st.workers[w].current && !st.workers[w].held) next_split(lane, 0, w);
    }
  }

  void start_cpu(int lane, int stage, int w, Job job) {
    const Stage& s = p_.lanes[lane].stages[stage];
    const double b = job.items;
    const double svc = s.cpu_service(b, job.r);
    job.bd.queueing_s += now_ - job.ready;
    job.bd.data_load_s += b * s.sparse_item_s * job.r;
    job.bd.compute_s += s.fixed_s + b * s.item_s;
    job.bd.comm_s += b * s.comm_item_s;
    account(now_, now_ + svc, cpu_bin_, s.cores_per_worker * svc);
    account(now_, now_ + svc, mem_bin_, b * s.mem_bytes_item * job.r);
    lanes_[lane][stage].workers[w].current = std::move(job);
    push({now_ + svc, 0, EventType::kCpuDone, lane, stage, w, 0});
  }

  void next_split(int lane, int stage, int w) {
    CpuWorker& wk = lanes_[lane][stage].workers[w];
    if (wk.current || wk.held || wk.queue.empty()) return;
    Job job = std::move(wk.queue.front());
    wk.queue.pop_front();
    start_cpu(lane, stage, w, std::move(job));
  }

  void start_pool_workers(int lane, int stage) {
    StageState& st = lanes_[lane][stage];
    for (std::size_t w = 0; w < st.workers.size() && !st.shared.empty(); ++w) {
      if (st.workers[w].current) continue;
      Job job = std::move(st.shared.front());
      st.shared.pop_front();
      start_cpu(lane, stage, static_cast<int>(w), std::move(job));
      release_waiter(lane, stage);
    }
  }

  // A slot opened in the shared queue of `stage`; move one blocked upstream job in.
  void release_waiter(int lane, int stage) {
    StageState& st = lanes_[lane][stage];
    if (st.waiters.empty()) return;
    const int up = st.waiters.front();
    st.waiters.pop_front();
    CpuWorker& wk = lanes_[lane][stage - 1].workers[up];
    Job job = std::move(*wk.held);
    wk.held.reset();
    job.ready = now_;
    st.shared.push_back(std::move(job));
    next_split(lane, stage - 1, up);
  }

  // False when the downstream queue is full.
  bool deliver(int lane, int stage, Job job) {
    const Stage& s = p_.lanes[lane].stages[stage];
    StageState& st = lanes_[lane][stage];
    job.ready = now_;
    if (s.kind == StageKind::kPool) {
      if (s.queue_capacity > 0 && static_cast<int>(st.shared.size()) >= s.queue_capacity) return false;
      st.shared.push_back(std::move(job));
      start_pool_workers(lane, stage);
      return true;
    }
    st.fuse_items += job.items;
    st.fuse_buf.push_back(std::move(job));
    if (st.fuse_buf.size() == 1) {
      ++st.epoch;
      if (std::isfinite(s.fuse_timeout_s)) {
        push({now_ + s.fuse_timeout_s, 0, EventType::kFuseTimeout, lane, stage, 0, st.epoch});
      }
    }
    if (st.fuse_items >= s.fuse_items) flush(lane, stage);
    return true;
  }

  void flush(int lane, int stage) {
    StageState& st = lanes_[lane][stage];
    Batch b;
    double rw = 0.0;
    for (const Job& j : st.fuse_buf) rw += j.r * j.items;
    b.items = st.fuse_items;
    b.r = b.items > 0 ? rw / b.items : 1.0;
    b.jobs = std::move(st.fuse_buf);
    st.fuse_buf.clear();
    st.fuse_items = 0;
    ++st.epoch;
    st.batches.push_back(std::move(b));
    dispatch_accel(lane, stage);
  }

  void dispatch_accel(int lane, int stage) {
    const Stage& s = p_.lanes[lane].stages[stage];
    StageState& st = lanes_[lane][stage];
    for (std::size_t t = 0; t < st.threads.size() && !st.batches.empty(); ++t) {
      AccelThread& th = st.threads[t];
      if (th.loading || th.loaded) continue;
      Batch b = std::move(st.batches.front());
      st.batches.pop_front();
      b.load_start = now_;
      b.load_s = s.load_time(b.items, b.r);
      th.loading = std::move(b);
      push({now_ + th.loading->load_s, 0, EventType::kLoadDone, lane, stage, static_cast<int>(t), 0});
    }
  }

  void start_compute(int lane, int stage, int t, Batch b) {
    const Stage& s = p_.lanes[lane].stages[stage];
    b.comp_start = now_;
    b.comp_s = s.compute_time(b.items, b.r);
    account(now_, now_ + b.comp_s, acc_bin_, b.comp_s);
    AccelThread& th = lanes_[lane][stage].threads[t];
    th.computing = std::move(b);
    push({now_ + th.computing->comp_s, 0, EventType::kComputeDone, lane, stage, t, 0});
  }

  void on_load_done(int lane, int stage, int t) {
    AccelThread& th = lanes_[lane][stage].threads[t];
    Batch b = std::move(*th.loading);
    th.loading.reset();
    b.load_end = now_;
    if (!th.computing) {
      start_compute(lane, stage, t, std::move(b));
    } else {
      th.loaded = std::move(b);
    }
    dispatch_accel(lane, stage);
  }

  void on_compute_done(int lane, int stage, int t) {
    AccelThread& th = lanes_[lane][stage].threads[t];
    Batch b = std::move(*th.computing);
    th.computing.reset();
    for (Job& j : b.jobs) {
      j.bd.queueing_s += (b.load_start - j.ready) + (b.comp_start - b.load_end);
      j.bd.data_load_s += b.load_s;
      j.bd.compute_s += b.comp_s;
      finish(j);
    }
    if (th.loaded) {
      Batch next = std::move(*th.loaded);
      th.loaded.reset();
      start_compute(lane, stage, t, std::move(next));
    }
    dispatch_accel(lane, stage);
  }

  void on_timeout(int lane, int stage, std::int64_t epoch) {
    StageState& st = lanes_[lane][stage];
    if (epoch == st.epoch && !st.fuse_buf.empty()) flush(lane, stage);
  }

  void on_cpu_done(int lane, int stage, int w) {
    const auto& stages = p_.lanes[lane].stages;
    StageState& st = lanes_[lane][stage];
    Job job = std::move(*st.workers[w].current);
    st.workers[w].current.reset();
    if (static_cast<std::size_t>(stage) + 1 == stages.size()) {
      finish(job);
    } else if (!deliver(lane, stage + 1, job)) {
      st.workers[w].held = std::move(job);
      lanes_[lane][stage + 1].waiters.push_back(w);
      return;
    }
    if (stages[stage].kind == StageKind::kSplit) {
      next_split(lane, stage, w);
    } else {
      start_pool_workers(lane, stage);
    }
  }

  void finish(const Job& j) {
    QueryState& q = queries_[j.query];
    if (--q.remaining == 0) {
      q.done = now_;
      q.bd = j.bd;
    }
  }

  SimReport report(bool cut) {
    SimReport r;
    r.arrivals = static_cast<std::int64_t>(stream_.size());
    const double window = duration_ - warm_;
    std::vector<double> lat;
    std::int64_t measured = 0;
    std::int64_t departed = 0;
    double sum = 0.0;
    std::int64_t done_measured = 0;
    for (std::size_t i = 0; i < queries_.size(); ++i) {
      const QueryState& q = queries_[i];
      if (q.done >= warm_ && q.done <= duration_) ++departed;
      if (q.done >= 0) {
        ++r.completed;
      } else if (cut) {
        ++r.in_flight;
      } else {
        ++r.dropped;
      }
      const double a = stream_[i].arrival_time;
      if (a < warm_ || a >= duration_) continue;
      ++measured;
      if (q.done >= 0) {
        const double l = q.done - a;
        lat.push_back(l);
        sum += l;
        ++done_measured;
        r.latency_breakdown += q.bd;
      } else {
        lat.push_back(kInf);
      }
    }
    r.offered_qps = window > 0 ? measured / window : 0.0;
    r.achieved_qps = window > 0 ? std::min(departed, measured) / window : 0.0;
    if (done_measured > 0) {
      r.mean_latency_s = sum / done_measured;
      const double inv = 1.0 / done_measured;
      r.latency_breakdown.queueing_s *= inv;
      r.latency_breakdown.data_load_s *= inv;
      r.latency_breakdown.compute_s *= inv;
      r.latency_breakdown.comm_s *= inv;
    }
    if (!lat.empty()) {
      std::vector<double> sorted = lat;
      std::sort(sorted.begin(), sorted.end());
      const double pct = p_.calib.tail_percentile;
      const auto idx = static_cast<std::size_t>(std::max(0.0, std::ceil(pct * sorted.size()) - 1.0));
      r.tail_latency_s = sorted[std::min(idx, sorted.size() - 1)];
    }
    if (r.tail_latency_s < r.mean_latency_s) r.tail_latency_s = r.mean_latency_s;
    if (opt_.keep_latencies) r.latencies = std::move(lat);

    const double w = opt_.power_window_s;
    double psum = 0.0;
    double wsum = 0.0;
    Utilization total;
    for (std::size_t b = 0; b < bins_; ++b) {
      const double bs = warm_ + b * w;
      const double width = std::min(bs + w, duration_) - bs;
      if (!(width > 0)) continue;
      Utilization u;
      u.cpu = std::min(1.0, cpu_bin_[b] / (p_.cores * width));
      u.mem = std::min(1.0, mem_bin_[b] / (p_.mem_capacity_bps * width));
      u.accel = accel_threads_ > 0 ? std::min(1.0, acc_bin_[b] / (accel_threads_ * width)) : 0.0;
      const double pw = power_draw(server_, p_.cfg, u, p_.calib);
      psum += pw * width;
      wsum += width;
      r.peak_power_w = std::max(r.peak_power_w, pw);
      total.cpu += u.cpu * width;
      total.mem += u.mem * width;
      total.accel += u.accel * width;
    }
    if (wsum > 0) {
      r.avg_power_w = psum / wsum;
      r.utilization = {total.cpu / wsum, total.mem / wsum, total.accel / wsum};
    }
    r.peak_power_w = std::max(r.peak_power_w, r.avg_power_w);
    return r;
  }

  const Pipeline& p_;
  const ServerSpec& server_;
  const std::vector<Query>& stream_;
  double duration_;
  SimOptions opt_;
  double warm_ = 0.0;
  double horizon_ = 0.0;
  double now_ = 0.0;
  double mean_rows_ = 1.0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventLater> events_;
  std::vector<std::vector<StageState>> lanes_;
  std::vector<QueryState> queries_;
  std::vector<double> weights_;
  std::vector<double> swrr_;
  std::size_t bins_ = 1;
  std::vector<double> cpu_bin_, mem_bin_, acc_bin_;
  int accel_threads_ = 0;
};

}  // namespace

SimReport simulate_pipeline(const Pipeline& p, const ServerSpec& server, const std::vector<Query>& stream,
                            double duration_s, const SimOptions& opt) {
  if (stream.empty()) throw PreconditionError("simulate: empty query stream");
  if (!(duration_s > 0)) throw PreconditionError("simulate: duration must be > 0");
  if (!(opt.warmup_frac >= 0 && opt.warmup_frac < 1)) throw PreconditionError("simulate: warmup_frac outside [0, 1)");
  if (!(opt.power_window_s > 0)) throw PreconditionError("simulate: power window must be > 0");
  Sim sim(p, server, stream, duration_s, opt);
  return sim.run();
}

SimReport simulate(const ServerSpec& server, const ModelSpec& model, const PartitionPlan& plan,
                   const SchedConfig& cfg, const std::vector<Query>& stream, double duration_s,
                   std::uint64_t /*seed*/, const SimOptions& opt, const Calibration& c) {
  check_config(cfg, server);
  const Pipeline p = build_pipeline(model, server, plan, cfg, c);
  return simulate_pipeline(p, server, stream, duration_s, opt);
}

SimBoundedQps measure_latency_bounded_qps(const ServerSpec& server, const ModelSpec& model,
                                          const SchedConfig& cfg, double sla_ms,
                                          std::optional<double> power_budget_w, std::uint64_t seed,
                                          const SimSearchOptions& opt, const Calibration& c) {
  if (!(sla_ms > 0)) throw PreconditionError("measure_latency_bounded_qps: sla_ms must be > 0");
  check_config(cfg, server);
  const Pipeline p = build_pipeline(model, server, cfg, c);
  const double sla_s = sla_ms * 1e-3;
  SimOptions so;
  so.lane_weights = Sim::default_lane_weights(p, server);

  SimBoundedQps out;
  double best_peak = 0.0;
  double best_tail = 0.0;
  auto sustains = [&](double rate) {
    ++out.simulations;
    const double dur = std::clamp(opt.target_queries / rate, opt.min_duration_s, opt.max_duration_s);
    const auto stream = gen_query_stream(rate, dur, model, seed, opt.stream);
    if (stream.empty()) return false;
    const SimReport r = simulate_pipeline(p, server, stream, dur, so);
    // A window with no measured query says nothing about the tail.
    const bool ok = r.offered_qps > 0 && r.dropped == 0 && r.in_flight == 0 && r.tail_latency_s <= sla_s &&
                    r.achieved_qps >= opt.min_throughput_ratio * r.offered_qps &&
                    (!power_budget_w || r.peak_power_w <= *power_budget_w);
    if (ok) {
      best_peak = r.peak_power_w;
      best_tail = r.tail_latency_s;
    }
    return ok;
  };

  double start = 0.0;
  if (opt.start_qps) {
    start = *opt.start_qps;
  } else {
    const BoundedQps a = analytic_latency_bounded_qps(p, server, sla_s, power_budget_w);
    start = a.qps > 0 ? a.qps : 0.5 * a.saturation_qps;
    if (!std::isfinite(start) || !(start > 0)) start = 1.0;
  }
  double lo = 0.0;
  double hi = 0.0;
  double lo_peak = 0.0;
  double lo_tail = 0.0;
  if (sustains(start)) {
    lo = start;
    lo_peak = best_peak;
    lo_tail = best_tail;
    hi = 2.0 * start;
    for (int i = 0; i < 20 && sustains(hi); ++i) {
      lo = hi;
      lo_peak = best_peak;
      lo_tail = best_tail;
      hi *= 2.0;
    }
  } else {
    hi = start;
    double probe = 0.5 * start;
    for (int i = 0; i < 20; ++i, probe *= 0.5) {
      if (sustains(probe)) {
        lo = probe;
        lo_peak = best_peak;
        lo_tail = best_tail;
        break;
      }
      hi = probe;
    }
    if (lo == 0.0) {
      out.violation = true;
      return out;
    }
  }
  for (int it = 0; it < opt.iterations && (hi - lo) / lo >= opt.tolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sustains(mid)) {
      lo = mid;
      lo_peak = best_peak;
      lo_tail = best_tail;
    } else {
      hi = mid;
    }
  }
  out.qps = lo;
  out.peak_power_w = lo_peak;
  out.tail_s = lo_tail;
  return out;
}

}  // namespace hercules
