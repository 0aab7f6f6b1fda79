#pragma once

// Sectioned key-value text shared by every configuration file:
//
//   # comment
//   [model DLRM-RMC1]
//   num_emb_tables = 10
//   bottom_fc = 256-128-32
//
// A section header is `[kind]` or `[kind name]`. Keys are unique within a
// section. Numbers accept the decimal suffixes K, M and G.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hercules/error.h"

namespace hercules::kv {

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

class Section {
 public:
  Section(std::string kind, std::string name, int line)
      : kind_(std::move(kind)), name_(std::move(name)), line_(line) {}

  const std::string& kind() const { return kind_; }
  const std::string& name() const { return name_; }
  int line() const { return line_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void add(std::string key, std::string value, int line = 0);
  const Entry* find(const std::string& key) const;
  bool has(const std::string& key) const { return find(key) != nullptr; }

  // Typed accessors. The `require_*` forms throw ConfigError naming the field
  // and the line when the key is missing or malformed.
  std::string require_string(const std::string& key) const;
  double require_double(const std::string& key) const;
  std::int64_t require_int(const std::string& key) const;
  bool require_bool(const std::string& key) const;

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;

  // Throws on any key outside `known`.
  void reject_unknown(const std::vector<std::string>& known) const;

  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

 private:
  std::string kind_;
  std::string name_;
  int line_;
  std::vector<Entry> entries_;
};

class Document {
 public:
  static Document parse(const std::string& text);
  static Document parse_file(const std::string& path);

  std::string serialize() const;

  Section& add_section(std::string kind, std::string name = "");
  const std::vector<Section>& sections() const { return sections_; }
  std::vector<const Section*> of_kind(const std::string& kind) const;
  const Section* find(const std::string& kind, const std::string& name = "") const;

 private:
  std::vector<Section> sections_;
};

// Value grammar helpers, also used by serializers so both directions agree.
double parse_number(const std::string& text, const std::string& field, int line);
std::int64_t parse_integer(const std::string& text, const std::string& field, int line);
bool parse_bool(const std::string& text, const std::string& field, int line);
std::vector<std::int64_t> parse_dash_list(const std::string& text, const std::string& field,
                                          int line);
std::vector<std::string> parse_csv_list(const std::string& text);

std::string format_number(double value);  // shortest round-trip text
std::string format_dash_list(const std::vector<std::int64_t>& values);

}  // namespace hercules::kv
