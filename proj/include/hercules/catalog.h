#pragma once

// Model and server catalogs plus footprint arithmetic.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hercules/kvtext.h"

namespace hercules {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double mid() const { return 0.5 * (lo + hi); }
  bool operator==(const Range&) const = default;
};

enum class AttentionKind { kNone, kFc, kGru };

const char* to_string(AttentionKind k);
AttentionKind attention_from_string(const std::string& s);

enum class SizeClass { kProd, kSmall };

struct ModelSpec {
  std::string name;
  std::string service;
  int num_emb_tables = 0;
  Range emb_rows_prod;
  Range emb_rows_small;
  int emb_dim = 32;
  Range lookups_per_table;
  bool has_pooling = true;
  AttentionKind attention_kind = AttentionKind::kNone;
  // Layer widths; the first entry is the input width of the stack.
  std::vector<std::int64_t> bottom_fc;
  std::vector<std::int64_t> predict_fc;
  int predict_fc_replicas = 1;
  double sla_ms = 0.0;
  // Trailing tables holding user-behavior sequences (attention models). Each
  // item gathers `seq_len` rows from such a table instead of `lookups`.
  int seq_tables = 0;
  Range seq_len{1, 1};

  bool operator==(const ModelSpec&) const = default;

  // Mean sparse rows gathered per item, over all tables.
  double mean_lookups_per_item() const;
  double dense_weights() const;
  // FC plus attention FLOPs for one item.
  double dense_flops_per_item() const;
  int fc_layers() const;
  // Width of the dense feature vector shipped with every item.
  double dense_input_width() const;
  double rows_per_table(SizeClass c) const;
};

struct CpuSpec {
  std::string name;
  int cores = 0;
  double freq_ghz = 0.0;
  double tdp_w = 0.0;
  double peak_flops_per_core = 32.0;  // FLOP per cycle
  bool operator==(const CpuSpec&) const = default;
  double core_flops() const { return freq_ghz * 1e9 * peak_flops_per_core; }
};

struct MemorySpec {
  std::string name;
  int channels = 0;
  int dimms_per_channel = 0;
  int ranks_per_dimm = 0;
  double capacity_gb = 0.0;
  double tdp_w = 0.0;
  double bandwidth_gbps = 0.0;
  int nmp_factor = 1;
  // Always-on power of the near-memory processing units.
  double nmp_logic_w = 0.0;
  bool operator==(const MemorySpec&) const = default;
};

struct AccelSpec {
  std::string name;
  int sms = 0;
  double boost_mhz = 0.0;
  double hbm_gb = 0.0;
  double hbm_bw_gbps = 0.0;
  double pcie_gbps = 0.0;
  double tdp_w = 0.0;
  double peak_tflops = 0.0;
  bool operator==(const AccelSpec&) const = default;
};

struct ServerSpec {
  std::string name;
  int availability = 0;
  CpuSpec cpu;
  MemorySpec memory;
  std::optional<AccelSpec> accel;
  bool operator==(const ServerSpec&) const = default;

  double tdp_sum() const;
  bool has_accel() const { return accel.has_value(); }
};

struct Footprint {
  double embedding_bytes = 0.0;
  double dense_bytes = 0.0;
  double total() const { return embedding_bytes + dense_bytes; }
  double embedding_share() const { return total() > 0 ? embedding_bytes / total() : 0.0; }
};

Footprint model_footprint(const ModelSpec& m, SizeClass size_class, int bytes_per_element = 4);

void validate(const ModelSpec& m);
void validate(const ServerSpec& s);

class Catalog {
 public:
  std::vector<ModelSpec> models;
  std::vector<ServerSpec> servers;

  // Accepts the full name or the name without a "DLRM-" prefix.
  const ModelSpec* find_model(const std::string& name) const;
  const ServerSpec* find_server(const std::string& name) const;
  const ModelSpec& model(const std::string& name) const;
  const ServerSpec& server(const std::string& name) const;

  bool operator==(const Catalog&) const = default;
};

std::vector<ModelSpec> builtin_models();
std::vector<ServerSpec> builtin_servers();
Catalog builtin_catalog();

// Applies `[model ...]` and `[server ...]` sections from `doc` on top of
// `base`. A section naming an existing entry overrides only the keys it lists;
// a new name must list every required key. Other section kinds are ignored.
Catalog apply_catalog_overrides(Catalog base, const kv::Document& doc);

// Builtin catalogs, extended by `config_path` when non-empty.
Catalog load_catalogs(const std::string& config_path = "");

kv::Document serialize_catalog(const Catalog& c);
Catalog parse_catalog(const std::string& text);

}  // namespace hercules
