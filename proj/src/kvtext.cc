#include "hercules/kvtext.h"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace hercules {

ConfigError::ConfigError(const std::string& field, int line, const std::string& what)
    : std::runtime_error(line > 0 ? fmt::format("line {}: field '{}': {}", line, field, what)
                                  : fmt::format("field '{}': {}", field, what)),
      field_(field),
      line_(line) {}

namespace kv {
namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double suffix_scale(char c) {
  switch (c) {
    case 'k':
    case 'K':
      return 1e3;
    case 'M':
      return 1e6;
    case 'G':
      return 1e9;
    default:
      return 0.0;
  }
}

}  // namespace

double parse_number(const std::string& raw, const std::string& field, int line) {
  std::string text = trim(raw);
  if (text.empty()) throw ConfigError(field, line, "expected a number, got an empty value");
  double scale = 1.0;
  if (double s = suffix_scale(text.back()); s > 0.0) {
    scale = s;
    text.pop_back();
  }
  if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE) {
    throw ConfigError(field, line, fmt::format("expected a number, got '{}'", raw));
  }
  return v * scale;
}

std::int64_t parse_integer(const std::string& raw, const std::string& field, int line) {
  double v = parse_number(raw, field, line);
  if (!std::isfinite(v) || v != std::floor(v) || std::fabs(v) > 9.0e15) {
    throw ConfigError(field, line, fmt::format("expected an integer, got '{}'", raw));
  }
  return static_cast<std::int64_t>(v);
}

bool parse_bool(const std::string& raw, const std::string& field, int line) {
  std::string t = trim(raw);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "no" || t == "0") return false;
  throw ConfigError(field, line, fmt::format("expected true/false, got '{}'", raw));
}

std::vector<std::int64_t> parse_dash_list(const std::string& raw, const std::string& field,
                                          int line) {
  std::vector<std::int64_t> out;
  std::string t = trim(raw);
  if (t.empty() || t == "-") return out;
  std::stringstream ss(t);
  std::string part;
  while (std::getline(ss, part, '-')) out.push_back(parse_integer(part, field, line));
  return out;
}

std::vector<std::string> parse_csv_list(const std::string& raw) {
  std::vector<std::string> out;
  std::stringstream ss(raw);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return fmt::format("{}", value);
}

std::string format_dash_list(const std::vector<std::int64_t>& values) {
  if (values.empty()) return "-";
  return fmt::format("{}", fmt::join(values, "-"));
}

void Section::add(std::string key, std::string value, int line) {
  if (find(key) != nullptr) throw ConfigError(key, line, "duplicate key in section");
  entries_.push_back({std::move(key), std::move(value), line});
}

const Entry* Section::find(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

void Section::fail(const std::string& key, const std::string& what) const {
  const Entry* e = find(key);
  throw ConfigError(key, e ? e->line : line_, what);
}

std::string Section::require_string(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw ConfigError(key, line_, fmt::format("missing in [{} {}]", kind_, name_));
  return e->value;
}
double Section::require_double(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw ConfigError(key, line_, fmt::format("missing in [{} {}]", kind_, name_));
  return parse_number(e->value, key, e->line);
}
std::int64_t Section::require_int(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw ConfigError(key, line_, fmt::format("missing in [{} {}]", kind_, name_));
  return parse_integer(e->value, key, e->line);
}
bool Section::require_bool(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw ConfigError(key, line_, fmt::format("missing in [{} {}]", kind_, name_));
  return parse_bool(e->value, key, e->line);
}

std::optional<std::string> Section::get_string(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  return e->value;
}
std::optional<double> Section::get_double(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  return parse_number(e->value, key, e->line);
}
std::optional<std::int64_t> Section::get_int(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  return parse_integer(e->value, key, e->line);
}
std::optional<bool> Section::get_bool(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  return parse_bool(e->value, key, e->line);
}

void Section::reject_unknown(const std::vector<std::string>& known) const {
  for (const auto& e : entries_) {
    if (std::find(known.begin(), known.end(), e.key) == known.end()) {
      throw ConfigError(e.key, e.line, fmt::format("unknown key in [{}]", kind_));
    }
  }
}

Document Document::parse(const std::string& text) {
  Document doc;
  std::stringstream ss(text);
  std::string raw;
  int line_no = 0;
  Section* current = nullptr;
  while (std::getline(ss, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line[0] == '[') {
      if (line.back() != ']') throw ConfigError("section", line_no, "unterminated section header");
      std::string inner = trim(line.substr(1, line.size() - 2));
      if (inner.empty()) throw ConfigError("section", line_no, "empty section header");
      auto sp = inner.find_first_of(" \t");
      std::string kind = sp == std::string::npos ? inner : inner.substr(0, sp);
      std::string name = sp == std::string::npos ? "" : trim(inner.substr(sp));
      for (const auto& s : doc.sections_) {
        if (s.kind() == kind && s.name() == name) {
          throw ConfigError(kind, line_no, fmt::format("duplicate section [{} {}]", kind, name));
        }
      }
      doc.sections_.emplace_back(kind, name, line_no);
      current = &doc.sections_.back();
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line, line_no, "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("key", line_no, "empty key");
    if (!current) throw ConfigError(key, line_no, "key outside of any section");
    current->add(key, value, line_no);
  }
  return doc;
}

Document Document::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("file", 0, fmt::format("cannot open '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string Document::serialize() const {
  std::string out;
  for (const auto& s : sections_) {
    if (!out.empty()) out += "\n";
    out += s.name().empty() ? fmt::format("[{}]\n", s.kind())
                            : fmt::format("[{} {}]\n", s.kind(), s.name());
    for (const auto& e : s.entries()) out += fmt::format("{} = {}\n", e.key, e.value);
  }
  return out;
}

Section& Document::add_section(std::string kind, std::string name) {
  sections_.emplace_back(std::move(kind), std::move(name), 0);
  return sections_.back();
}

std::vector<const Section*> Document::of_kind(const std::string& kind) const {
  std::vector<const Section*> out;
  for (const auto& s : sections_) {
    if (s.kind() == kind) out.push_back(&s);
  }
  return out;
}

const Section* Document::find(const std::string& kind, const std::string& name) const {
  for (const auto& s : sections_) {
    if (s.kind() == kind && s.name() == name) return &s;
  }
  return nullptr;
}

}  // namespace kv
}  // namespace hercules
