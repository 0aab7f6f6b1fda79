#include "hercules/catalog.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace hercules {

const char* to_string(AttentionKind k) {
  switch (k) {
    case AttentionKind::kNone:
      return "none";
    case AttentionKind::kFc:
      return "fc";
    case AttentionKind::kGru:
      return "gru";
  }
  return "none";
}

AttentionKind attention_from_string(const std::string& s) {
  if (s == "none" || s == "-") return AttentionKind::kNone;
  if (s == "fc") return AttentionKind::kFc;
  if (s == "gru") return AttentionKind::kGru;
  throw ConfigError("attention_kind", 0, fmt::format("unknown attention kind '{}'", s));
}

namespace {

double stack_weights(const std::vector<std::int64_t>& widths) {
  double w = 0.0;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    w += static_cast<double>(widths[i]) * static_cast<double>(widths[i + 1]);
  }
  return w;
}

// Attention weights evaluated once per behavior-sequence step.
double attention_step_weights(const ModelSpec& m) {
  const double d = m.emb_dim;
  const double fc = 4.0 * d * 80.0 + 80.0 * 40.0 + 40.0;
  switch (m.attention_kind) {
    case AttentionKind::kNone:
      return 0.0;
    case AttentionKind::kFc:
      return fc;
    case AttentionKind::kGru:
      // Two GRU layers with three gates each, hidden width = emb_dim, followed
      // by the same scoring MLP.
      return 2.0 * 3.0 * (2.0 * d) * d + fc;
  }
  return 0.0;
}

}  // namespace

double ModelSpec::mean_lookups_per_item() const {
  const int plain = num_emb_tables - seq_tables;
  return plain * lookups_per_table.mid() + seq_tables * seq_len.mid();
}

double ModelSpec::dense_weights() const {
  double w = stack_weights(bottom_fc) + predict_fc_replicas * stack_weights(predict_fc);
  if (attention_kind != AttentionKind::kNone) w += attention_step_weights(*this);
  return w;
}

double ModelSpec::dense_flops_per_item() const {
  double flops = 2.0 * (stack_weights(bottom_fc) + predict_fc_replicas * stack_weights(predict_fc));
  if (attention_kind != AttentionKind::kNone) {
    flops += 2.0 * attention_step_weights(*this) * seq_len.mid() * std::max(1, seq_tables);
  }
  return flops;
}

int ModelSpec::fc_layers() const {
  auto layers = [](const std::vector<std::int64_t>& w) {
    return w.size() > 1 ? static_cast<int>(w.size()) - 1 : 0;
  };
  int n = layers(bottom_fc) + predict_fc_replicas * layers(predict_fc);
  if (attention_kind != AttentionKind::kNone) n += attention_kind == AttentionKind::kGru ? 5 : 3;
  return n;
}

double ModelSpec::dense_input_width() const {
  if (!bottom_fc.empty()) return static_cast<double>(bottom_fc.front());
  if (predict_fc.empty()) return 0.0;
  return std::max(0.0, static_cast<double>(predict_fc.front()) -
                           static_cast<double>(num_emb_tables) * emb_dim);
}

double ModelSpec::rows_per_table(SizeClass c) const {
  return c == SizeClass::kProd ? emb_rows_prod.mid() : emb_rows_small.mid();
}

double ServerSpec::tdp_sum() const {
  double p = cpu.tdp_w + memory.tdp_w + memory.nmp_logic_w;
  if (accel) p += accel->tdp_w;
  return p;
}

Footprint model_footprint(const ModelSpec& m, SizeClass size_class, int bytes_per_element) {
  Footprint f;
  f.embedding_bytes = static_cast<double>(m.num_emb_tables) * m.rows_per_table(size_class) *
                      m.emb_dim * bytes_per_element;
  f.dense_bytes = m.dense_weights() * bytes_per_element;
  return f;
}

namespace {

void check_range(const Range& r, const std::string& field) {
  if (!(r.lo > 0.0) || !(r.hi >= r.lo)) {
    throw ConfigError(field, 0, fmt::format("range [{}, {}] must be positive and ordered", r.lo, r.hi));
  }
}

}  // namespace

void validate(const ModelSpec& m) {
  if (m.name.empty()) throw ConfigError("name", 0, "model name is empty");
  if (m.num_emb_tables < 0) throw ConfigError("num_emb_tables", 0, "must be >= 0");
  if (m.num_emb_tables > 0) {
    check_range(m.emb_rows_prod, "emb_rows_prod");
    check_range(m.emb_rows_small, "emb_rows_small");
    check_range(m.lookups_per_table, "lookups_per_table");
  }
  if (m.emb_dim <= 0) throw ConfigError("emb_dim", 0, "must be > 0");
  if (!m.has_pooling && m.lookups_per_table.hi != 1.0) {
    throw ConfigError("lookups_per_table", 0, "one-hot models take exactly 1 lookup per table");
  }
  if (m.predict_fc_replicas <= 0) throw ConfigError("predict_fc_replicas", 0, "must be > 0");
  if (!(m.sla_ms > 0.0)) throw ConfigError("sla_ms", 0, "must be > 0");
  if (m.seq_tables < 0 || m.seq_tables > m.num_emb_tables) {
    throw ConfigError("seq_tables", 0, "must lie in [0, num_emb_tables]");
  }
  if (m.seq_tables > 0) check_range(m.seq_len, "seq_len");
  for (auto w : m.bottom_fc) {
    if (w <= 0) throw ConfigError("bottom_fc", 0, "layer widths must be > 0");
  }
  for (auto w : m.predict_fc) {
    if (w <= 0) throw ConfigError("predict_fc", 0, "layer widths must be > 0");
  }
}

void validate(const ServerSpec& s) {
  if (s.name.empty()) throw ConfigError("name", 0, "server name is empty");
  if (s.availability < 0) throw ConfigError("availability", 0, "must be >= 0");
  if (s.cpu.cores <= 0) throw ConfigError("cpu_cores", 0, "must be > 0");
  if (!(s.cpu.freq_ghz > 0) || !(s.cpu.peak_flops_per_core > 0)) {
    throw ConfigError("cpu_freq_ghz", 0, "frequency and FLOP rate must be > 0");
  }
  const int f = s.memory.nmp_factor;
  if (f != 1 && f != 2 && f != 4 && f != 8) throw ConfigError("mem_nmp_factor", 0, "must be 1, 2, 4 or 8");
  if (!(s.memory.bandwidth_gbps > 0)) throw ConfigError("mem_bandwidth_gbps", 0, "must be > 0");
  if (f == 1 && s.memory.nmp_logic_w != 0.0) {
    throw ConfigError("mem_nmp_logic_w", 0, "only NMP memory carries logic power");
  }
  if (s.accel) {
    if (!(s.accel->hbm_gb > 0)) throw ConfigError("accel_hbm_gb", 0, "must be > 0");
    if (!(s.accel->pcie_gbps > 0) || !(s.accel->peak_tflops > 0) || !(s.accel->hbm_bw_gbps > 0)) {
      throw ConfigError("accel_pcie_gbps", 0, "accelerator rates must be > 0");
    }
  }
}

std::vector<ModelSpec> builtin_models() {
  std::vector<ModelSpec> v;
  auto dlrm = [](std::string name, int tables, Range prod, Range lookups,
                 std::vector<std::int64_t> bottom, std::vector<std::int64_t> predict, double sla) {
    ModelSpec m;
    m.name = std::move(name);
    m.service = "Social Media";
    m.num_emb_tables = tables;
    m.emb_rows_prod = prod;
    m.emb_rows_small = {1e6, 1e6};
    m.emb_dim = 32;
    m.lookups_per_table = lookups;
    m.has_pooling = true;
    m.bottom_fc = std::move(bottom);
    m.predict_fc = std::move(predict);
    m.sla_ms = sla;
    return m;
  };
  v.push_back(dlrm("DLRM-RMC1", 10, {1e6, 5e6}, {20, 160}, {256, 128, 32}, {256, 64, 1}, 20));
  v.push_back(dlrm("DLRM-RMC2", 100, {1e6, 5e6}, {20, 160}, {256, 128, 32}, {512, 128, 1}, 50));
  v.push_back(dlrm("DLRM-RMC3", 10, {10e6, 20e6}, {20, 50}, {2560, 512, 32}, {512, 128, 1}, 50));

  ModelSpec wnd;
  wnd.name = "MT-WnD";
  wnd.service = "Video";
  wnd.num_emb_tables = 26;
  wnd.emb_rows_prod = {3e6, 40e6};
  wnd.emb_rows_small = {1e6, 1e6};
  wnd.emb_dim = 32;
  wnd.lookups_per_table = {1, 1};
  wnd.has_pooling = false;
  wnd.predict_fc = {1024, 512, 256};
  wnd.predict_fc_replicas = 3;
  wnd.sla_ms = 100;
  v.push_back(wnd);

  auto din_like = [](std::string name, AttentionKind att, double sla) {
    ModelSpec m;
    m.name = std::move(name);
    m.service = "E-commerce";
    m.num_emb_tables = 3;
    m.emb_rows_prod = {0.1e6, 600e6};
    m.emb_rows_small = {0.1e6, 1e6};
    m.emb_dim = 32;
    m.lookups_per_table = {1, 1};
    m.has_pooling = false;
    m.attention_kind = att;
    m.predict_fc = {200, 80, 2};
    m.sla_ms = sla;
    m.seq_tables = 1;
    m.seq_len = {100, 1000};
    return m;
  };
  v.push_back(din_like("DIN", AttentionKind::kFc, 50));
  v.push_back(din_like("DIEN", AttentionKind::kGru, 100));
  return v;
}

namespace {

CpuSpec cpu_t1() { return {"CPU-T1", 18, 1.6, 86.0, 32.0}; }
CpuSpec cpu_t2() { return {"CPU-T2", 20, 2.0, 125.0, 32.0}; }

// Bandwidths are effective embedding-gather rates, not pin rates; see the
// calibration notes in docs/calibration.md.
MemorySpec ddr4_t1() { return {"DDR4", 4, 1, 1, 64, 28, 180.0, 1, 0.0}; }
MemorySpec ddr4_t2() { return {"DDR4", 4, 1, 2, 128, 50, 200.0, 1, 0.0}; }
MemorySpec nmp(int factor) {
  MemorySpec m;
  m.name = fmt::format("NMPx{}", factor);
  m.channels = 4;
  m.dimms_per_channel = factor / 2;
  m.ranks_per_dimm = 2;
  m.capacity_gb = 64.0 * factor;
  m.tdp_w = 25.0 * factor;
  m.bandwidth_gbps = 200.0;
  m.nmp_factor = factor;
  m.nmp_logic_w = 2.5 * factor;
  return m;
}

AccelSpec p100() { return {"P100", 56, 1480, 16, 900, 16, 300, 9.3}; }
AccelSpec v100() { return {"V100", 80, 1530, 16, 900, 16, 300, 14.0}; }

ServerSpec server(std::string name, int n, CpuSpec c, MemorySpec m, std::optional<AccelSpec> a) {
  return {std::move(name), n, std::move(c), std::move(m), std::move(a)};
}

}  // namespace

std::vector<ServerSpec> builtin_servers() {
  return {
      server("T1", 100, cpu_t1(), ddr4_t1(), std::nullopt),
      server("T2", 100, cpu_t2(), ddr4_t2(), std::nullopt),
      server("T3", 15, cpu_t2(), nmp(2), std::nullopt),
      server("T4", 10, cpu_t2(), nmp(4), std::nullopt),
      server("T5", 5, cpu_t2(), nmp(8), std::nullopt),
      server("T6", 10, cpu_t1(), ddr4_t1(), p100()),
      server("T7", 5, cpu_t2(), ddr4_t2(), v100()),
      server("T8", 6, cpu_t2(), nmp(2), v100()),
      server("T9", 4, cpu_t2(), nmp(4), v100()),
      server("T10", 2, cpu_t2(), nmp(8), v100()),
  };
}

Catalog builtin_catalog() { return {builtin_models(), builtin_servers()}; }

const ModelSpec* Catalog::find_model(const std::string& name) const {
  for (const auto& m : models) {
    if (m.name == name) return &m;
  }
  for (const auto& m : models) {
    if (m.name.rfind("DLRM-", 0) == 0 && m.name.substr(5) == name) return &m;
  }
  return nullptr;
}

const ServerSpec* Catalog::find_server(const std::string& name) const {
  for (const auto& s : servers) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const ModelSpec& Catalog::model(const std::string& name) const {
  const ModelSpec* m = find_model(name);
  if (!m) throw ConfigError("model", 0, fmt::format("unknown model '{}'", name));
  return *m;
}

const ServerSpec& Catalog::server(const std::string& name) const {
  const ServerSpec* s = find_server(name);
  if (!s) throw ConfigError("server", 0, fmt::format("unknown server type '{}'", name));
  return *s;
}

namespace {

const std::vector<std::string> kModelKeys = {
    "service",         "num_emb_tables", "emb_rows_prod", "emb_rows_small",      "emb_dim",
    "lookups_per_table", "has_pooling",  "attention_kind", "bottom_fc",          "predict_fc",
    "predict_fc_replicas", "sla_ms",     "seq_tables",    "seq_len"};

const std::vector<std::string> kServerKeys = {
    "availability",     "cpu_name",       "cpu_cores",        "cpu_freq_ghz",
    "cpu_tdp_w",        "cpu_peak_flops_per_core",            "mem_name",
    "mem_channels",     "mem_dimms_per_channel",              "mem_ranks_per_dimm",
    "mem_capacity_gb",  "mem_tdp_w",      "mem_bandwidth_gbps", "mem_nmp_factor",
    "mem_nmp_logic_w",  "accel",          "accel_name",       "accel_sms",
    "accel_boost_mhz",  "accel_hbm_gb",   "accel_hbm_bw_gbps", "accel_pcie_gbps",
    "accel_tdp_w",      "accel_peak_tflops"};

Range parse_range(const kv::Section& s, const std::string& key) {
  const kv::Entry* e = s.find(key);
  std::string v = e->value;
  // "lo..hi" or a single value.
  auto dots = v.find("..");
  if (dots == std::string::npos) {
    double x = kv::parse_number(v, key, e->line);
    return {x, x};
  }
  return {kv::parse_number(v.substr(0, dots), key, e->line),
          kv::parse_number(v.substr(dots + 2), key, e->line)};
}

std::string format_range(const Range& r) {
  if (r.lo == r.hi) return kv::format_number(r.lo);
  return kv::format_number(r.lo) + ".." + kv::format_number(r.hi);
}

int to_int(std::int64_t v, const kv::Section& s, const std::string& key) {
  if (v < 0 || v > 1'000'000'000) s.fail(key, "integer out of range");
  return static_cast<int>(v);
}

void apply_model(ModelSpec& m, const kv::Section& s) {
  s.reject_unknown(kModelKeys);
  if (auto v = s.get_string("service")) m.service = *v;
  if (auto v = s.get_int("num_emb_tables")) m.num_emb_tables = to_int(*v, s, "num_emb_tables");
  if (s.has("emb_rows_prod")) m.emb_rows_prod = parse_range(s, "emb_rows_prod");
  if (s.has("emb_rows_small")) m.emb_rows_small = parse_range(s, "emb_rows_small");
  if (auto v = s.get_int("emb_dim")) m.emb_dim = to_int(*v, s, "emb_dim");
  if (s.has("lookups_per_table")) m.lookups_per_table = parse_range(s, "lookups_per_table");
  if (auto v = s.get_bool("has_pooling")) m.has_pooling = *v;
  if (auto v = s.get_string("attention_kind")) {
    try {
      m.attention_kind = attention_from_string(*v);
    } catch (const ConfigError& e) {
      s.fail("attention_kind", e.what());
    }
  }
  if (const kv::Entry* e = s.find("bottom_fc")) m.bottom_fc = kv::parse_dash_list(e->value, e->key, e->line);
  if (const kv::Entry* e = s.find("predict_fc")) m.predict_fc = kv::parse_dash_list(e->value, e->key, e->line);
  if (auto v = s.get_int("predict_fc_replicas")) m.predict_fc_replicas = to_int(*v, s, "predict_fc_replicas");
  if (auto v = s.get_double("sla_ms")) m.sla_ms = *v;
  if (auto v = s.get_int("seq_tables")) m.seq_tables = to_int(*v, s, "seq_tables");
  if (s.has("seq_len")) m.seq_len = parse_range(s, "seq_len");
}

void apply_server(ServerSpec& sv, const kv::Section& s) {
  s.reject_unknown(kServerKeys);
  if (auto v = s.get_int("availability")) sv.availability = to_int(*v, s, "availability");
  if (auto v = s.get_string("cpu_name")) sv.cpu.name = *v;
  if (auto v = s.get_int("cpu_cores")) sv.cpu.cores = to_int(*v, s, "cpu_cores");
  if (auto v = s.get_double("cpu_freq_ghz")) sv.cpu.freq_ghz = *v;
  if (auto v = s.get_double("cpu_tdp_w")) sv.cpu.tdp_w = *v;
  if (auto v = s.get_double("cpu_peak_flops_per_core")) sv.cpu.peak_flops_per_core = *v;
  if (auto v = s.get_string("mem_name")) sv.memory.name = *v;
  if (auto v = s.get_int("mem_channels")) sv.memory.channels = to_int(*v, s, "mem_channels");
  if (auto v = s.get_int("mem_dimms_per_channel")) sv.memory.dimms_per_channel = to_int(*v, s, "mem_dimms_per_channel");
  if (auto v = s.get_int("mem_ranks_per_dimm")) sv.memory.ranks_per_dimm = to_int(*v, s, "mem_ranks_per_dimm");
  if (auto v = s.get_double("mem_capacity_gb")) sv.memory.capacity_gb = *v;
  if (auto v = s.get_double("mem_tdp_w")) sv.memory.tdp_w = *v;
  if (auto v = s.get_double("mem_bandwidth_gbps")) sv.memory.bandwidth_gbps = *v;
  if (auto v = s.get_int("mem_nmp_factor")) sv.memory.nmp_factor = to_int(*v, s, "mem_nmp_factor");
  if (auto v = s.get_double("mem_nmp_logic_w")) sv.memory.nmp_logic_w = *v;
  if (auto v = s.get_bool("accel")) {
    if (!*v) {
      sv.accel.reset();
    } else if (!sv.accel) {
      sv.accel = AccelSpec{};
    }
  }
  bool any_accel_key = false;
  for (const auto& e : s.entries()) {
    if (e.key.rfind("accel_", 0) == 0) any_accel_key = true;
  }
  if (any_accel_key) {
    if (!sv.accel) s.fail("accel", "accelerator fields given but 'accel = false' or unset");
    AccelSpec& a = *sv.accel;
    if (auto v = s.get_string("accel_name")) a.name = *v;
    if (auto v = s.get_int("accel_sms")) a.sms = to_int(*v, s, "accel_sms");
    if (auto v = s.get_double("accel_boost_mhz")) a.boost_mhz = *v;
    if (auto v = s.get_double("accel_hbm_gb")) a.hbm_gb = *v;
    if (auto v = s.get_double("accel_hbm_bw_gbps")) a.hbm_bw_gbps = *v;
    if (auto v = s.get_double("accel_pcie_gbps")) a.pcie_gbps = *v;
    if (auto v = s.get_double("accel_tdp_w")) a.tdp_w = *v;
    if (auto v = s.get_double("accel_peak_tflops")) a.peak_tflops = *v;
  }
}

template <typename Spec>
void validate_section(const Spec& spec, const kv::Section& s) {
  try {
    validate(spec);
  } catch (const ConfigError& e) {
    const kv::Entry* entry = s.find(e.field());
    throw ConfigError(e.field(), entry ? entry->line : s.line(),
                      fmt::format("[{} {}]: {}", s.kind(), s.name(), e.what()));
  }
}

}  // namespace

Catalog apply_catalog_overrides(Catalog base, const kv::Document& doc) {
  for (const kv::Section* s : doc.of_kind("model")) {
    if (s->name().empty()) throw ConfigError("model", s->line(), "model section needs a name");
    auto it = std::find_if(base.models.begin(), base.models.end(),
                           [&](const ModelSpec& m) { return m.name == s->name(); });
    if (it == base.models.end()) {
      for (const char* key : {"num_emb_tables", "emb_rows_prod", "emb_rows_small",
                              "lookups_per_table", "has_pooling", "predict_fc", "sla_ms"}) {
        if (!s->has(key)) {
          throw ConfigError(key, s->line(), fmt::format("new model '{}' must set '{}'", s->name(), key));
        }
      }
      ModelSpec m;
      m.name = s->name();
      apply_model(m, *s);
      validate_section(m, *s);
      base.models.push_back(std::move(m));
    } else {
      apply_model(*it, *s);
      validate_section(*it, *s);
    }
  }
  for (const kv::Section* s : doc.of_kind("server")) {
    if (s->name().empty()) throw ConfigError("server", s->line(), "server section needs a name");
    auto it = std::find_if(base.servers.begin(), base.servers.end(),
                           [&](const ServerSpec& v) { return v.name == s->name(); });
    if (it == base.servers.end()) {
      for (const char* key : {"availability", "cpu_cores", "cpu_freq_ghz", "cpu_tdp_w",
                              "mem_tdp_w", "mem_bandwidth_gbps"}) {
        if (!s->has(key)) {
          throw ConfigError(key, s->line(), fmt::format("new server '{}' must set '{}'", s->name(), key));
        }
      }
      ServerSpec v;
      v.name = s->name();
      apply_server(v, *s);
      validate_section(v, *s);
      base.servers.push_back(std::move(v));
    } else {
      apply_server(*it, *s);
      validate_section(*it, *s);
    }
  }
  return base;
}

Catalog load_catalogs(const std::string& config_path) {
  Catalog c = builtin_catalog();
  if (config_path.empty()) return c;
  return apply_catalog_overrides(std::move(c), kv::Document::parse_file(config_path));
}

kv::Document serialize_catalog(const Catalog& c) {
  using kv::format_number;
  kv::Document doc;
  for (const auto& m : c.models) {
    kv::Section& s = doc.add_section("model", m.name);
    s.add("service", m.service);
    s.add("num_emb_tables", std::to_string(m.num_emb_tables));
    s.add("emb_rows_prod", format_range(m.emb_rows_prod));
    s.add("emb_rows_small", format_range(m.emb_rows_small));
    s.add("emb_dim", std::to_string(m.emb_dim));
    s.add("lookups_per_table", format_range(m.lookups_per_table));
    s.add("has_pooling", m.has_pooling ? "true" : "false");
    s.add("attention_kind", to_string(m.attention_kind));
    s.add("bottom_fc", kv::format_dash_list(m.bottom_fc));
    s.add("predict_fc", kv::format_dash_list(m.predict_fc));
    s.add("predict_fc_replicas", std::to_string(m.predict_fc_replicas));
    s.add("sla_ms", format_number(m.sla_ms));
    s.add("seq_tables", std::to_string(m.seq_tables));
    s.add("seq_len", format_range(m.seq_len));
  }
  for (const auto& v : c.servers) {
    kv::Section& s = doc.add_section("server", v.name);
    s.add("availability", std::to_string(v.availability));
    s.add("cpu_name", v.cpu.name);
    s.add("cpu_cores", std::to_string(v.cpu.cores));
    s.add("cpu_freq_ghz", format_number(v.cpu.freq_ghz));
    s.add("cpu_tdp_w", format_number(v.cpu.tdp_w));
    s.add("cpu_peak_flops_per_core", format_number(v.cpu.peak_flops_per_core));
    s.add("mem_name", v.memory.name);
    s.add("mem_channels", std::to_string(v.memory.channels));
    s.add("mem_dimms_per_channel", std::to_string(v.memory.dimms_per_channel));
    s.add("mem_ranks_per_dimm", std::to_string(v.memory.ranks_per_dimm));
    s.add("mem_capacity_gb", format_number(v.memory.capacity_gb));
    s.add("mem_tdp_w", format_number(v.memory.tdp_w));
    s.add("mem_bandwidth_gbps", format_number(v.memory.bandwidth_gbps));
    s.add("mem_nmp_factor", std::to_string(v.memory.nmp_factor));
    s.add("mem_nmp_logic_w", format_number(v.memory.nmp_logic_w));
    s.add("accel", v.accel ? "true" : "false");
    if (v.accel) {
      const AccelSpec& a = *v.accel;
      s.add("accel_name", a.name);
      s.add("accel_sms", std::to_string(a.sms));
      s.add("accel_boost_mhz", format_number(a.boost_mhz));
      s.add("accel_hbm_gb", format_number(a.hbm_gb));
      s.add("accel_hbm_bw_gbps", format_number(a.hbm_bw_gbps));
      s.add("accel_pcie_gbps", format_number(a.pcie_gbps));
      s.add("accel_tdp_w", format_number(a.tdp_w));
      s.add("accel_peak_tflops", format_number(a.peak_tflops));
    }
  }
  return doc;
}

Catalog parse_catalog(const std::string& text) {
  return apply_catalog_overrides(Catalog{}, kv::Document::parse(text));
}

}  // namespace hercules
