#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace pctlab {

/// Flat "dotted.key = value" configuration with '#' comments.
///
/// Getters record which keys were read so that callers can reject typos via
/// require_all_consumed().
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& source = "<string>");
  static ConfigFile load(const std::filesystem::path& path);

  [[nodiscard]] bool has(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated integers; "" or "none" is the empty list.
  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         const std::vector<std::int64_t>& fallback) const;

  /// Throws ConfigError listing keys no getter asked for.
  void require_all_consumed() const;

  /// Sorted "key = value" lines; the basis of every config hash.
  [[nodiscard]] std::string canonical() const;
  /// Hash of the canonical text restricted to keys matching any prefix
  /// (all keys when `prefixes` is empty).
  [[nodiscard]] std::string hash(const std::vector<std::string>& prefixes = {}) const;

  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }
  [[nodiscard]] const std::string& source() const { return source_; }

 private:
  const std::string* lookup(const std::string& key) const;

  std::map<std::string, std::string> values_;
  std::string source_;
  mutable std::set<std::string> consumed_;
};

}  // namespace pctlab
