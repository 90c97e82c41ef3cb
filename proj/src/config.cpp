#include "fpsam/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fpsam/errors.hpp"

namespace fpsam {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& text, const std::string& origin,
                    const std::string& key) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    throw FormatError(origin + ": key '" + key + "' has non-numeric value '" +
                      text + "'");
  }
  return v;
}

}  // namespace

ConfigMap ConfigMap::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path.string());
}

ConfigMap ConfigMap::parse_text(const std::string& text, const std::string& origin) {
  ConfigMap cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    Entry e;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = line_no;
    if (e.key.empty()) {
      throw FormatError(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    cfg.entries_.push_back(std::move(e));
  }
  return cfg;
}

const ConfigMap::Entry* ConfigMap::find(const std::string& key) const {
  for (const Entry& e : entries_) {
    if (e.key == key) {
      consumed_.insert(key);
      return &e;
    }
  }
  return nullptr;
}

bool ConfigMap::has(const std::string& key) const { return find(key) != nullptr; }

std::string ConfigMap::get_string(const std::string& key,
                                  const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

std::string ConfigMap::require_string(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw FormatError(origin_ + ": missing required key '" + key + "'");
  return e->value;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  return parse_double(e->value, origin_, key);
}

uint64_t ConfigMap::get_u64(const std::string& key, uint64_t fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(e->value.c_str(), &end, 10);
  if (end == e->value.c_str() || *end != '\0') {
    throw FormatError(origin_ + ": key '" + key + "' has non-integer value '" +
                      e->value + "'");
  }
  return v;
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1") return true;
  if (e->value == "false" || e->value == "0") return false;
  throw FormatError(origin_ + ": key '" + key + "' has non-boolean value '" +
                    e->value + "'");
}

std::vector<double> ConfigMap::get_double_list(const std::string& key, size_t count,
                                               double fallback) const {
  const Entry* e = find(key);
  if (!e) return std::vector<double>(count, fallback);
  std::vector<double> values;
  std::string item;
  std::istringstream in(e->value);
  while (std::getline(in, item, ',')) {
    values.push_back(parse_double(trim(item), origin_, key));
  }
  if (values.size() == 1) return std::vector<double>(count, values[0]);
  if (values.size() != count) {
    throw FormatError(origin_ + ": key '" + key + "' expects 1 or " +
                      std::to_string(count) + " values, got " +
                      std::to_string(values.size()));
  }
  return values;
}

std::vector<std::string> ConfigMap::get_all(const std::string& key) const {
  consumed_.insert(key);
  std::vector<std::string> out;
  for (const Entry& e : entries_) {
    if (e.key == key) out.push_back(e.value);
  }
  return out;
}

void ConfigMap::finish() const {
  for (const Entry& e : entries_) {
    if (!consumed_.count(e.key)) {
      throw FormatError(origin_ + ":" + std::to_string(e.line) +
                        ": unknown key '" + e.key + "'");
    }
  }
}

}  // namespace fpsam
