#include "hercules/loadgen.h"

#include <fmt/format.h>

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <tuple>

namespace hercules {
namespace {

// Uniform double in [0, 1) from the top 53 bits, independent of the standard
// library's distribution implementations.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(static_cast<double>(span) * unit(rng));
}

struct Pmf {
  int lo = 0;
  std::vector<double> p;  // p[i] = P(size == lo + i)
  std::vector<double> cdf;
};

// Integer sizes are the rounded continuous draw, so the mass of n is the
// truncated lognormal probability of [n - 0.5, n + 0.5).
std::shared_ptr<const Pmf> pmf_of(const SizeDistribution& d) {
  using Key = std::tuple<double, double, double, double>;
  thread_local std::map<Key, std::shared_ptr<const Pmf>> cache;
  Key key{d.log_mean, d.log_sigma, d.min_items, d.max_items};
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  boost::math::normal_distribution<double> z;
  auto cdf_at = [&](double x) {
    x = std::clamp(x, d.min_items, d.max_items);
    return boost::math::cdf(z, (std::log(x) - d.log_mean) / d.log_sigma);
  };
  const double lo_c = cdf_at(d.min_items);
  const double mass = cdf_at(d.max_items) - lo_c;
  auto pmf = std::make_shared<Pmf>();
  const int lo = static_cast<int>(std::lround(d.min_items));
  const int hi = static_cast<int>(std::lround(d.max_items));
  pmf->lo = lo;
  double acc = 0.0;
  for (int n = lo; n <= hi; ++n) {
    double p = (cdf_at(n + 0.5) - cdf_at(n - 0.5)) / mass;
    pmf->p.push_back(p);
    acc += p;
    pmf->cdf.push_back(acc);
  }
  cache.emplace(key, pmf);
  return pmf;
}

}  // namespace

double SizeDistribution::quantile(double q) const {
  auto pmf = pmf_of(*this);
  auto it = std::lower_bound(pmf->cdf.begin(), pmf->cdf.end(), q - 1e-12);
  if (it == pmf->cdf.end()) --it;
  return pmf->lo + static_cast<double>(it - pmf->cdf.begin());
}

double SizeDistribution::mean() const {
  auto pmf = pmf_of(*this);
  double s = 0.0;
  for (std::size_t i = 0; i < pmf->p.size(); ++i) s += pmf->p[i] * (pmf->lo + static_cast<double>(i));
  return s;
}

double SizeDistribution::mean_squared() const {
  auto pmf = pmf_of(*this);
  double s = 0.0;
  for (std::size_t i = 0; i < pmf->p.size(); ++i) {
    const double n = pmf->lo + static_cast<double>(i);
    s += pmf->p[i] * n * n;
  }
  return s;
}

double SizeDistribution::mean_chunks(double d) const {
  auto pmf = pmf_of(*this);
  double s = 0.0;
  for (std::size_t i = 0; i < pmf->p.size(); ++i) {
    s += pmf->p[i] * std::ceil((pmf->lo + static_cast<double>(i)) / d);
  }
  return s;
}

double SizeDistribution::expect(const std::function<double(int)>& f) const {
  auto pmf = pmf_of(*this);
  double s = 0.0;
  for (std::size_t i = 0; i < pmf->p.size(); ++i) s += pmf->p[i] * f(pmf->lo + static_cast<int>(i));
  return s;
}

std::vector<double> SizeDistribution::probabilities() const { return pmf_of(*this)->p; }

double rows_per_item(const Query& q) {
  double s = 0.0;
  for (int p : q.per_table_pooling) s += p;
  return s;
}

std::vector<Query> gen_query_stream(double rate_qps, double duration_s, const ModelSpec& model,
                                    std::uint64_t seed, const StreamOptions& opt) {
  if (!(rate_qps > 0.0) || !(duration_s > 0.0)) {
    throw PreconditionError("gen_query_stream: rate and duration must be > 0");
  }
  std::vector<Query> out;
  out.reserve(static_cast<std::size_t>(rate_qps * duration_s * 1.05) + 16);

  const int tables = model.num_emb_tables;
  const int plain = tables - model.seq_tables;
  if (opt.deterministic) {
    Query q;
    q.size = std::max(1, static_cast<int>(std::lround(opt.sizes.mean())));
    for (int t = 0; t < tables; ++t) {
      const Range& r = t < plain ? model.lookups_per_table : model.seq_len;
      q.per_table_pooling.push_back(std::max(1, static_cast<int>(std::lround(r.mid()))));
    }
    const double gap = 1.0 / rate_qps;
    for (std::int64_t k = 0;; ++k) {
      q.arrival_time = static_cast<double>(k) * gap;
      if (q.arrival_time >= duration_s) break;
      out.push_back(q);
    }
    return out;
  }

  // Arrivals and query contents draw from separate engines, so the k-th query
  // has the same contents at every rate and only its arrival time scales.
  std::mt19937_64 arrivals(seed);
  std::mt19937_64 contents(seed ^ 0x9e3779b97f4a7c15ULL);
  boost::math::normal_distribution<double> z;
  const SizeDistribution& sd = opt.sizes;
  const double c_lo = boost::math::cdf(z, (std::log(sd.min_items) - sd.log_mean) / sd.log_sigma);
  const double c_hi = boost::math::cdf(z, (std::log(sd.max_items) - sd.log_mean) / sd.log_sigma);

  double t = 0.0;
  while (true) {
    t += -std::log1p(-unit(arrivals)) / rate_qps;
    if (t >= duration_s) break;
    Query q;
    q.arrival_time = t;
    double p = c_lo + (c_hi - c_lo) * unit(contents);
    p = std::clamp(p, 1e-300, 1.0 - 1e-16);
    double x = std::exp(sd.log_mean + sd.log_sigma * boost::math::quantile(z, p));
    x = std::clamp(x, sd.min_items, sd.max_items);
    q.size = std::max(1, static_cast<int>(std::lround(x)));
    q.per_table_pooling.resize(tables);
    for (int tb = 0; tb < tables; ++tb) {
      const Range& r = tb < plain ? model.lookups_per_table : model.seq_len;
      const int lo = static_cast<int>(std::lround(r.lo));
      const int hi = static_cast<int>(std::lround(r.hi));
      int v;
      if (lo == hi) {
        v = lo;
      } else if (opt.pooling == PoolingLaw::kLongTail) {
        const double u = std::pow(unit(contents), opt.long_tail_power);
        v = std::min(hi, lo + static_cast<int>((hi - lo + 1) * u));
      } else {
        v = uniform_int(contents, lo, hi);
      }
      q.per_table_pooling[tb] = std::max(1, v);
    }
    out.push_back(std::move(q));
  }
  return out;
}

double LoadTrace::at(double t) const {
  if (points.empty() || t < points.front().time_s) return 0.0;
  auto it = std::upper_bound(points.begin(), points.end(), t,
                             [](double v, const TracePoint& p) { return v < p.time_s; });
  return std::prev(it)->qps;
}

double LoadTrace::peak() const {
  double m = 0.0;
  for (const auto& p : points) m = std::max(m, p.qps);
  return m;
}

double LoadTrace::mean() const {
  if (points.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : points) s += p.qps;
  return s / static_cast<double>(points.size());
}

double diurnal_value(double peak_qps, double trough_ratio, double t) {
  const double w = 2.0 * std::numbers::pi * t / 86400.0;
  return peak_qps * (0.5 * (1.0 + trough_ratio) - 0.5 * (1.0 - trough_ratio) * std::cos(w));
}

LoadTrace gen_diurnal_trace(double peak_qps, int days, double trough_ratio, double noise,
                            double interval_s, std::uint64_t seed, std::string workload) {
  if (!(trough_ratio > 0.0 && trough_ratio < 1.0)) {
    throw PreconditionError("gen_diurnal_trace: trough_ratio must lie in (0, 1)");
  }
  if (!(interval_s > 0.0) || days < 0 || noise < 0.0) {
    throw PreconditionError("gen_diurnal_trace: interval must be > 0, days and noise >= 0");
  }
  LoadTrace tr;
  tr.workload = std::move(workload);
  tr.interval_s = interval_s;
  std::mt19937_64 rng(seed);
  const double horizon = 86400.0 * days;
  for (std::int64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * interval_s;
    if (t >= horizon) break;
    double v = diurnal_value(peak_qps, trough_ratio, t);
    if (noise > 0.0) v *= 1.0 + noise * (2.0 * unit(rng) - 1.0);
    tr.points.push_back({t, v});
  }
  return tr;
}

LoadTrace parse_trace(const std::string& text, const std::string& source) {
  LoadTrace tr;
  std::stringstream ss(text);
  std::string line;
  int row = 0;
  while (std::getline(ss, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[0] == '#') continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ConfigError(source, row, "expected two comma-separated columns 'time_s,qps'");
    }
    std::string a = line.substr(0, comma);
    std::string b = line.substr(comma + 1);
    if (tr.points.empty() && a.find_first_of("0123456789") == std::string::npos) continue;  // header
    double t = kv::parse_number(a, "time_s", row);
    double q = kv::parse_number(b, "qps", row);
    if (q < 0.0) throw ConfigError("qps", row, "negative load");
    if (!tr.points.empty() && t <= tr.points.back().time_s) {
      throw ConfigError("time_s", row, "rows must be strictly increasing in time");
    }
    tr.points.push_back({t, q});
  }
  if (tr.points.empty()) throw ConfigError(source, row, "trace has no data rows");
  tr.interval_s = tr.points.size() > 1 ? tr.points[1].time_s - tr.points[0].time_s : 0.0;
  return tr;
}

LoadTrace ingest_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("trace", 0, fmt::format("cannot open '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  LoadTrace tr = parse_trace(buf.str(), path);
  auto slash = path.find_last_of('/');
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  if (auto dot = stem.rfind('.'); dot != std::string::npos) stem = stem.substr(0, dot);
  tr.workload = stem;
  return tr;
}

std::string export_trace(const LoadTrace& trace) {
  std::string out = "time_s,qps\n";
  for (const auto& p : trace.points) {
    out += kv::format_number(p.time_s);
    out += ',';
    out += kv::format_number(p.qps);
    out += '\n';
  }
  return out;
}

double estimate_overprovision_rate(const LoadTrace& trace, double interval_s) {
  if (!(interval_s > 0.0) || trace.points.empty()) {
    throw PreconditionError("estimate_overprovision_rate: empty trace or non-positive interval");
  }
  const double t0 = trace.points.front().time_s;
  const double t1 = trace.points.back().time_s;
  const auto intervals = static_cast<std::int64_t>(std::floor((t1 - t0) / interval_s + 1e-9)) + 1;
  if (intervals < 2) {
    throw PreconditionError("estimate_overprovision_rate: trace must span at least 2 intervals");
  }
  double r = 0.0;
  double prev = trace.at(t0);
  for (std::int64_t k = 1; k < intervals; ++k) {
    double cur = trace.at(t0 + static_cast<double>(k) * interval_s);
    if (prev > 0.0) r = std::max(r, (cur - prev) / prev);
    prev = cur;
  }
  return 100.0 * r;
}

}  // namespace hercules
