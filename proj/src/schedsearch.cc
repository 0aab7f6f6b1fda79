#include "hercules/schedsearch.h"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <thread>
#include <tuple>

#include "hercules/analytic.h"
#include "hercules/error.h"
#include "hercules/pipeline.h"

namespace hercules {

const char* to_string(EvaluatorKind k) { return k == EvaluatorKind::kAnalytic ? "analytic" : "simulate"; }

EvaluatorKind evaluator_from_string(const std::string& s) {
  if (s == "analytic") return EvaluatorKind::kAnalytic;
  if (s == "simulate") return EvaluatorKind::kSimulate;
  throw ConfigError("evaluator", 0, fmt::format("unknown evaluator '{}' (analytic|simulate)", s));
}

namespace {

int level_of(int value, int min_value) {
  int level = 0;
  while ((min_value << level) < value) ++level;
  if ((min_value << level) != value) {
    throw PreconditionError(fmt::format("batch {} is not on the grid {}*2^i", value, min_value));
  }
  return level;
}

int total_cores(const ServerSpec& server, const SearchSpace& space) {
  return space.max_cores > 0 ? std::min(space.max_cores, server.cpu.cores) : server.cpu.cores;
}

// Grid coordinates. Accelerator fields are -1 on host-only strategies.
struct Point {
  int o = 1, m = 1, di = 0, am = -1, adi = -1;
  auto key() const { return std::array<int, 5>{o, m, di, am, adi}; }
};

struct Scored {
  Point pt;
  SchedConfig cfg;
  bool valid = false;
  double qps = 0.0;
  double power_w = 0.0;
  double tail_s = 0.0;
  double zero_load_tail_s = std::numeric_limits<double>::infinity();

  double value() const { return valid ? qps : 0.0; }
};

// Strict preference. Among equal QPS: lower power, then lower m, d, o and
// accelerator settings.
bool better(const Scored& a, const Scored& b) {
  if (a.valid != b.valid) return a.valid;
  if (a.valid) {
    if (a.qps != b.qps) return a.qps > b.qps;
    if (a.power_w != b.power_w) return a.power_w < b.power_w;
  }
  return std::tie(a.pt.m, a.pt.di, a.pt.o, a.pt.am, a.pt.adi) <
         std::tie(b.pt.m, b.pt.di, b.pt.o, b.pt.am, b.pt.adi);
}

class Evaluator {
 public:
  explicit Evaluator(const SearchRequest& r) : r_(r), model_(r.model ? *r.model : ModelSpec{}) {
    if (!r.model || !r.server) throw PreconditionError("search needs a model and a server");
    if (!(r.sla_ms > 0.0)) throw PreconditionError("SLA must be positive");
    if (uses_accel(r.strategy.kind) && !r.server->accel) {
      throw PreconditionError(fmt::format("{} needs an accelerator but {} has none",
                                          r.strategy.name(), r.server->name));
    }
    if (r.strategy.leftover && r.strategy.kind != Strategy::kHotDenseOnAccel) {
      throw PreconditionError("a leftover lane needs HotDenseOnAccel");
    }
    model_.sla_ms = r.sla_ms;
    cap_ = host_core_cap(r.strategy, *r.server, r.space);
  }

  bool accel() const { return uses_accel(r_.strategy.kind); }
  int cap() const { return cap_; }
  int evaluations() const { return static_cast<int>(memo_.size()); }

  SchedConfig config_of(const Point& p) {
    SchedConfig cfg;
    cfg.strategy = r_.strategy.kind;
    cfg.host = {p.m, p.o, r_.space.batch(p.di)};
    if (accel()) cfg.accel = AccelCfg{p.am, r_.space.accel_batch(p.adi)};
    if (r_.strategy.leftover) cfg.leftover = leftover_for(cfg);
    return cfg;
  }

  const Scored& eval(const Point& p) {
    auto it = memo_.find(p.key());
    if (it != memo_.end()) return it->second;
    Scored s;
    s.pt = p;
    s.cfg = config_of(p);
    if (config_fits(s.cfg, *r_.server)) {
      PointEval e;
      if (r_.surface) {
        e = r_.surface(s.cfg);
      } else if (r_.evaluator == EvaluatorKind::kAnalytic) {
        Pipeline pipe = build_pipeline(model_, *r_.server, s.cfg, r_.calib);
        const BoundedQps b = analytic_latency_bounded_qps(pipe, *r_.server, r_.sla_ms * 1e-3,
                                                          r_.power_budget_w);
        e = {!b.violation && b.qps > 0.0, b.qps, b.power_w, b.tail_s, b.zero_load_tail_s};
      } else {
        const SimBoundedQps b = measure_latency_bounded_qps(*r_.server, model_, s.cfg, r_.sla_ms,
                                                            r_.power_budget_w, r_.seed, r_.sim, r_.calib);
        e = {!b.violation && b.qps > 0.0, b.qps, b.peak_power_w, b.tail_s, b.tail_s};
      }
      s.valid = e.valid;
      s.qps = e.qps;
      s.power_w = e.power_w;
      s.tail_s = e.tail_s;
      s.zero_load_tail_s = e.zero_load_tail_s;
    }
    return memo_.emplace(p.key(), std::move(s)).first->second;
  }

 private:
  // The leftover lane takes whatever cores the miss threads leave. Its
  // triple is the analytic best for that lane alone, memoized per (m, o).
  std::optional<LeftoverCfg> leftover_for(const SchedConfig& base) {
    const auto key = std::make_pair(base.host.m, base.host.o);
    if (auto it = leftover_memo_.find(key); it != leftover_memo_.end()) return it->second;
    const Strategy kind = *r_.strategy.leftover;
    int free = total_cores(*r_.server, r_.space) - base.host.m * base.host.o;
    if (kind == Strategy::kSDHostOnly) --free;
    std::optional<LeftoverCfg> best;
    double best_qps = 0.0;
    for (int o = 1; o <= free; ++o) {
      for (int m = 1; m * o <= free; ++m) {
        for (int di = 0; di < r_.space.batch_levels; ++di) {
          SchedConfig cfg = base;
          if (!cfg.accel) cfg.accel = AccelCfg{};
          cfg.leftover = LeftoverCfg{kind, {m, o, r_.space.batch(di)}};
          if (!config_fits(cfg, *r_.server)) continue;
          Pipeline pipe = build_pipeline(model_, *r_.server, cfg, r_.calib);
          const BoundedQps b = analytic_latency_bounded_qps(pipe, *r_.server, r_.sla_ms * 1e-3);
          const double q = b.lane_qps.size() > 1 ? b.lane_qps[1] : 0.0;
          if (q > best_qps) {
            best_qps = q;
            best = cfg.leftover;
          }
        }
      }
    }
    leftover_memo_.emplace(key, best);
    return best;
  }

  const SearchRequest& r_;
  ModelSpec model_;
  int cap_ = 0;
  std::map<std::array<int, 5>, Scored> memo_;
  std::map<std::pair<int, int>, std::optional<LeftoverCfg>> leftover_memo_;
};

std::vector<Point> host_moves(const Point& p, int step, int cap, int levels) {
  std::vector<Point> out;
  const std::array<std::pair<int, int>, 3> dirs = {{{0, step}, {step, 0}, {step, step}}};
  for (auto [dm, dd] : dirs) {
    Point q = p;
    q.m += dm;
    q.di += dd;
    if (q.m * q.o > cap || q.di >= levels) continue;
    out.push_back(q);
  }
  return out;
}

std::vector<Point> accel_moves(const Point& p, int step, const SearchSpace& space) {
  std::vector<Point> out;
  const std::array<std::pair<int, int>, 3> dirs = {{{0, step}, {step, 0}, {step, step}}};
  for (auto [dm, dd] : dirs) {
    Point q = p;
    q.am += dm;
    q.adi += dd;
    if (q.am > space.max_accel_threads || q.adi >= space.accel_batch_levels) continue;
    out.push_back(q);
  }
  return out;
}

// Moves to the valid candidate with the largest QPS gain above `band`
// (relative to the current QPS) until none qualifies. From an invalid point
// with no valid candidate, steps to the candidate with the lowest zero-load
// tail when that tail improves.
template <typename Moves>
Scored climb(const Point& start, Moves moves, double band,
             const std::function<Scored(const Point&)>& score, std::vector<SchedConfig>* path) {
  Scored cur = score(start);
  for (;;) {
    const double threshold = band * cur.value();
    std::optional<Scored> pick;
    std::optional<Scored> closer;
    for (const Point& q : moves(cur.pt)) {
      Scored s = score(q);
      if (!s.valid) {
        if (!cur.valid && s.zero_load_tail_s < cur.zero_load_tail_s &&
            (!closer || s.zero_load_tail_s < closer->zero_load_tail_s)) {
          closer = s;
        }
        continue;
      }
      if (s.value() - cur.value() <= threshold) continue;
      if (!pick || better(s, *pick)) pick = s;
    }
    if (!pick) pick = closer;
    if (!pick) break;
    cur = *pick;
    if (path) path->push_back(cur.cfg);
  }
  return cur;
}

EfficiencyTuple to_tuple(const SearchRequest& req, const Scored& s, int evaluations) {
  EfficiencyTuple t;
  t.model = req.model->name;
  t.server = req.server->name;
  t.strategy = req.strategy;
  t.cfg = s.cfg;
  t.violation = !s.valid;
  t.qps = s.valid ? s.qps : 0.0;
  t.power_w = s.valid ? s.power_w : 0.0;
  t.tail_s = s.valid ? s.tail_s : 0.0;
  t.evaluations = evaluations;
  return t;
}

Point origin(const Evaluator& ev, int o) {
  Point p;
  p.o = o;
  if (ev.accel()) {
    p.am = 1;
    p.adi = 0;
  }
  return p;
}

}  // namespace

int host_core_cap(const SchedulingStrategy& s, const ServerSpec& server, const SearchSpace& space) {
  const int cores = total_cores(server, space);
  return s.kind == Strategy::kSDHostOnly ? cores - 1 : cores;
}

std::vector<SchedConfig> candidate_moves(const SchedConfig& cfg, int step, const ServerSpec& server,
                                         const SearchSpace& space) {
  if (step <= 0) throw PreconditionError(fmt::format("move step must be positive, got {}", step));
  check_config(cfg, server);
  const int cap = host_core_cap({cfg.strategy, std::nullopt}, server, space);
  std::vector<SchedConfig> out;
  const int di = level_of(cfg.host.d, space.min_batch);
  Point p{cfg.host.o, cfg.host.m, di};
  for (const Point& q : host_moves(p, step, cap, space.batch_levels)) {
    SchedConfig c = cfg;
    c.host.m = q.m;
    c.host.d = space.batch(q.di);
    if (config_fits(c, server)) out.push_back(c);
  }
  return out;
}

std::vector<SchedConfig> accel_candidate_moves(const SchedConfig& cfg, int step, const SearchSpace& space) {
  if (step <= 0) throw PreconditionError(fmt::format("move step must be positive, got {}", step));
  if (!cfg.accel) throw PreconditionError("configuration has no accelerator settings");
  Point p;
  p.am = cfg.accel->m;
  p.adi = level_of(cfg.accel->d, space.accel_min_batch);
  std::vector<SchedConfig> out;
  for (const Point& q : accel_moves(p, step, space)) {
    SchedConfig c = cfg;
    c.accel = AccelCfg{q.am, space.accel_batch(q.adi)};
    out.push_back(c);
  }
  return out;
}

PointEval evaluate_point(const SearchRequest& req, int o, int m, int di, int am, int adi, SchedConfig* filled) {
  Evaluator ev(req);
  if (ev.accel() != (am >= 0 && adi >= 0)) {
    throw PreconditionError("accelerator levels must be given exactly for accelerator strategies");
  }
  const Scored& s = ev.eval(Point{o, m, di, am, adi});
  if (filled) *filled = s.cfg;
  return {s.valid, s.qps, s.power_w, s.tail_s, s.zero_load_tail_s};
}

EfficiencyTuple gradient_search(const SearchRequest& req, SearchTrace* trace) {
  Evaluator ev(req);
  const double band = req.evaluator == EvaluatorKind::kSimulate ? 0.02 : 0.0;
  const int levels = req.space.batch_levels;

  // Host point value: the nested accelerator climb's result, memoized per
  // host point.
  std::map<std::array<int, 3>, Scored> host_memo;
  std::function<Scored(const Point&)> eval_point = [&](const Point& p) { return ev.eval(p); };
  std::function<Scored(const Point&)> host_value = [&](const Point& p) -> Scored {
    if (!ev.accel()) return ev.eval(p);
    const std::array<int, 3> key{p.o, p.m, p.di};
    if (auto it = host_memo.find(key); it != host_memo.end()) return it->second;
    Point start = p;
    start.am = 1;
    start.adi = 0;
    Scored s = climb(
        start, [&](const Point& q) { return accel_moves(q, 1, req.space); }, band, eval_point,
        nullptr);
    host_memo.emplace(key, s);
    return s;
  };

  std::optional<Scored> best;
  double prev_peak = -1.0;
  for (int o = 1; o <= ev.cap(); ++o) {
    Scored peak = climb(
        origin(ev, o), [&](const Point& q) { return host_moves(q, 1, ev.cap(), levels); }, band,
        host_value, trace ? &trace->moves : nullptr);
    if (trace) {
      trace->outer_o.push_back(o);
      trace->per_o_peak.push_back(peak.value());
    }
    if (!best || better(peak, *best)) best = peak;
    // Infeasible o values before the first feasible one do not end the loop.
    if (prev_peak >= 0.0 && peak.value() <= prev_peak) break;
    if (peak.valid) prev_peak = peak.value();
  }
  if (!best) {
    // No o fits the core budget: report the origin as a violation.
    Scored s;
    s.cfg = ev.config_of(origin(ev, 1));
    return to_tuple(req, s, ev.evaluations());
  }
  return to_tuple(req, *best, ev.evaluations());
}

EfficiencyTuple brute_force_search(const SearchRequest& req, Surface* surface) {
  Evaluator ev(req);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (surface) {
    *surface = Surface{};
    surface->o_max = std::max(ev.cap(), 0);
    surface->m_max = std::max(ev.cap(), 0);
    surface->d_levels = req.space.batch_levels;
    surface->qps.assign(surface->o_max, std::vector<std::vector<double>>(
                                            surface->m_max, std::vector<double>(surface->d_levels, nan)));
  }
  const int am_n = req.space.max_accel_threads, ad_n = req.space.accel_batch_levels;
  std::vector<std::vector<double>> plane(am_n, std::vector<double>(ad_n));
  std::optional<Scored> best;
  for (int o = 1; o <= ev.cap(); ++o) {
    for (int m = 1; m * o <= ev.cap(); ++m) {
      for (int di = 0; di < req.space.batch_levels; ++di) {
        Point p{o, m, di};
        double top = 0.0;
        if (!ev.accel()) {
          const Scored& s = ev.eval(p);
          if (!best || better(s, *best)) best = s;
          top = s.value();
        } else {
          for (int am = 1; am <= am_n; ++am) {
            for (int adi = 0; adi < ad_n; ++adi) {
              p.am = am;
              p.adi = adi;
              const Scored& s = ev.eval(p);
              if (!best || better(s, *best)) best = s;
              plane[am - 1][adi] = s.value();
              top = std::max(top, s.value());
            }
          }
          if (surface && !unimodal_2d(plane)) surface->accel_slices_unimodal = false;
        }
        if (surface) surface->qps[o - 1][m - 1][di] = top;
      }
    }
  }
  if (!best) {
    Scored s;
    s.cfg = ev.config_of(origin(ev, 1));
    return to_tuple(req, s, ev.evaluations());
  }
  return to_tuple(req, *best, ev.evaluations());
}

std::int64_t grid_size(const SearchRequest& req) {
  const int cap = host_core_cap(req.strategy, *req.server, req.space);
  std::int64_t host = 0;
  for (int o = 1; o <= cap; ++o) host += cap / o;
  host *= req.space.batch_levels;
  if (uses_accel(req.strategy.kind)) host *= std::int64_t{req.space.max_accel_threads} * req.space.accel_batch_levels;
  return host;
}

Surface host_surface(const SearchRequest& req) {
  Surface s;
  brute_force_search(req, &s);
  return s;
}

bool unimodal(const std::vector<double>& v, double rel_tol) {
  double peak = 0.0;
  for (double x : v) peak = std::max(peak, std::abs(x));
  const double flat = rel_tol * peak;
  std::size_t i = 0;
  while (i + 1 < v.size() && v[i] == 0.0 && v[i + 1] == 0.0) ++i;
  // Strict growth to the peak, then never up again by more than `flat`.
  while (i + 1 < v.size() && v[i + 1] > v[i]) ++i;
  for (; i + 1 < v.size(); ++i) {
    if (v[i + 1] > v[i] + flat) return false;
  }
  return true;
}

namespace {

// First argmax, or -1 when the slice is all zero.
int ridge(const std::vector<double>& v) {
  int best = -1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > 0.0 && (best < 0 || v[i] > v[best])) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace

bool unimodal_2d(const std::vector<std::vector<double>>& grid) {
  if (grid.empty()) return true;
  const std::size_t cols = grid[0].size();
  int last = -1;
  for (const auto& row : grid) {
    if (!unimodal(row)) return false;
    const int r = ridge(row);
    if (r < 0) continue;
    if (r < last) return false;
    last = r;
  }
  last = -1;
  for (std::size_t d = 0; d < cols; ++d) {
    std::vector<double> col;
    for (const auto& row : grid) col.push_back(row[d]);
    if (!unimodal(col)) return false;
    const int r = ridge(col);
    if (r < 0) continue;
    if (r < last) return false;
    last = r;
  }
  return true;
}

SurfaceCheck check_surface(const Surface& s) {
  SurfaceCheck out;
  out.accel = s.accel_slices_unimodal;
  std::vector<double> peaks;
  for (int o = 1; o <= s.o_max; ++o) {
    const int m_n = s.m_max / o;
    if (m_n == 0) break;
    std::vector<std::vector<double>> plane(s.qps[o - 1].begin(), s.qps[o - 1].begin() + m_n);
    if (!unimodal_2d(plane)) out.slices = false;
    double peak = 0.0;
    for (const auto& row : plane) {
      for (double x : row) peak = std::max(peak, x);
    }
    peaks.push_back(peak);
  }
  // The outer loop stops at the first non-increase, so the maximum must come
  // before it.
  const auto top = std::max_element(peaks.begin(), peaks.end());
  for (auto it = peaks.begin(); it != top; ++it) {
    if (!(*(it + 1) > *it)) out.o_peaks = false;
  }
  return out;
}

const EfficiencyTuple* EfficiencyTable::find(const std::string& model, const std::string& server) const {
  for (const auto& e : entries) {
    if (e.model == model && e.server == server) return &e;
  }
  return nullptr;
}

kv::Document EfficiencyTable::serialize() const {
  kv::Document doc;
  for (const auto& e : entries) {
    kv::Section& s = doc.add_section("efficiency", e.model + "@" + e.server);
    s.add("model", e.model);
    s.add("server", e.server);
    s.add("qps", kv::format_number(e.qps));
    s.add("power_w", kv::format_number(e.power_w));
    s.add("tail_ms", kv::format_number(e.tail_s * 1e3));
    s.add("strategy", e.strategy.name());
    s.add("host_m", std::to_string(e.cfg.host.m));
    s.add("host_o", std::to_string(e.cfg.host.o));
    s.add("host_d", std::to_string(e.cfg.host.d));
    if (e.cfg.accel) {
      s.add("accel_m", std::to_string(e.cfg.accel->m));
      s.add("accel_d", std::to_string(e.cfg.accel->d));
    }
    if (e.cfg.leftover) {
      s.add("leftover_m", std::to_string(e.cfg.leftover->host.m));
      s.add("leftover_o", std::to_string(e.cfg.leftover->host.o));
      s.add("leftover_d", std::to_string(e.cfg.leftover->host.d));
    }
    s.add("violation", e.violation ? "true" : "false");
    s.add("evaluations", std::to_string(e.evaluations));
    if (!e.error.empty()) s.add("error", e.error);
  }
  return doc;
}

EfficiencyTable EfficiencyTable::parse(const kv::Document& doc) {
  EfficiencyTable t;
  for (const kv::Section* s : doc.of_kind("efficiency")) {
    s->reject_unknown({"model", "server", "qps", "power_w", "tail_ms", "strategy", "host_m", "host_o",
                       "host_d", "accel_m", "accel_d", "leftover_m", "leftover_o", "leftover_d",
                       "violation", "evaluations", "error"});
    EfficiencyTuple e;
    e.model = s->require_string("model");
    e.server = s->require_string("server");
    e.qps = s->require_double("qps");
    e.power_w = s->require_double("power_w");
    e.tail_s = s->get_double("tail_ms").value_or(0.0) * 1e-3;
    e.strategy = scheduling_strategy_from_string(s->require_string("strategy"));
    e.cfg.strategy = e.strategy.kind;
    e.cfg.host = {static_cast<int>(s->require_int("host_m")), static_cast<int>(s->require_int("host_o")),
                  static_cast<int>(s->require_int("host_d"))};
    if (s->has("accel_m")) {
      e.cfg.accel = AccelCfg{static_cast<int>(s->require_int("accel_m")),
                             static_cast<int>(s->require_int("accel_d"))};
    }
    if (s->has("leftover_m")) {
      if (!e.strategy.leftover) s->fail("leftover_m", "strategy has no leftover lane");
      e.cfg.leftover = LeftoverCfg{*e.strategy.leftover,
                                   {static_cast<int>(s->require_int("leftover_m")),
                                    static_cast<int>(s->require_int("leftover_o")),
                                    static_cast<int>(s->require_int("leftover_d"))}};
    }
    e.violation = s->require_bool("violation");
    e.evaluations = static_cast<int>(s->get_int("evaluations").value_or(0));
    e.error = s->get_string("error").value_or("");
    if (e.qps < 0.0) s->fail("qps", "must be >= 0");
    t.entries.push_back(std::move(e));
  }
  return t;
}

namespace {

EfficiencyTuple profile_pair(const ModelSpec& model, const ServerSpec& server, const ProfileOptions& opt,
                             SearchTrace* trace) {
  EfficiencyTuple best;
  best.model = model.name;
  best.server = server.name;
  try {
    SearchRequest req;
    req.model = &model;
    req.server = &server;
    auto it = opt.sla_ms.find(model.name);
    req.sla_ms = it != opt.sla_ms.end() ? it->second : model.sla_ms;
    req.power_budget_w = opt.power_budget_w;
    req.evaluator = opt.evaluator;
    req.seed = opt.seed;
    req.space = opt.space;
    req.sim = opt.sim;
    req.calib = opt.calib;
    int evaluations = 0;
    bool have = false;
    for (const SchedulingStrategy& s : enumerate_strategies(model, server, opt.calib)) {
      req.strategy = s;
      SearchTrace tr;
      EfficiencyTuple t = gradient_search(req, &tr);
      evaluations += t.evaluations;
      const bool wins = !have || (!t.violation && best.violation) ||
                        (!t.violation && t.qps > best.qps) ||
                        (!t.violation && t.qps == best.qps && t.power_w < best.power_w);
      if (wins) {
        best = t;
        have = true;
        if (trace) *trace = std::move(tr);
      }
    }
    best.evaluations = evaluations;
  } catch (const std::exception& e) {
    best.violation = true;
    best.error = e.what();
  }
  return best;
}

}  // namespace

EfficiencyTable profile_all(const std::vector<ModelSpec>& models, const std::vector<ServerSpec>& servers,
                            const ProfileOptions& opt, std::vector<SearchTrace>* traces) {
  const std::size_t n = models.size() * servers.size();
  EfficiencyTable table;
  table.entries.resize(n);
  if (traces) traces->assign(n, SearchTrace{});
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      table.entries[i] = profile_pair(models[i / servers.size()], servers[i % servers.size()], opt,
                                      traces ? &(*traces)[i] : nullptr);
    }
  };
  int jobs = opt.jobs > 0 ? opt.jobs : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return table;
}

}  // namespace hercules
