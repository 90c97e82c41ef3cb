#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace fpsam {

// "key = value" config file, '#' starts a comment. Keys keep first-seen
// order; reads are tracked so finish() can reject unknown keys.
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::filesystem::path& path);
  static ConfigMap parse_text(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated doubles; a single value broadcasts to `count` entries.
  std::vector<double> get_double_list(const std::string& key, size_t count,
                                      double fallback) const;

  // All values stored under a repeatable key, in file order.
  std::vector<std::string> get_all(const std::string& key) const;

  // Throws FormatError if any key was never read.
  void finish() const;

  const std::string& origin() const { return origin_; }

 private:
  struct Entry {
    std::string key;
    std::string value;
    size_t line = 0;
  };
  std::vector<Entry> entries_;
  std::string origin_;
  mutable std::set<std::string> consumed_;

  const Entry* find(const std::string& key) const;
};

}  // namespace fpsam
