#include "pctlab/config.hpp"

#include <sstream>

#include "pctlab/errors.hpp"
#include "pctlab/text_io.hpp"

namespace pctlab {

ConfigFile ConfigFile::parse(const std::string& text, const std::string& source) {
  ConfigFile cfg;
  cfg.source_ = source;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string t = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    if (cfg.values_.contains(key))
      throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    cfg.values_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse(read_file(path), path.string());
}

const std::string* ConfigFile::lookup(const std::string& key) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  const auto* v = lookup(key);
  return v ? *v : fallback;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  const auto* v = lookup(key);
  if (!v) return fallback;
  try {
    return parse_double(*v);
  } catch (const ConfigError& e) {
    throw ConfigError(source_ + ": key '" + key + "': " + e.what());
  }
}

std::int64_t ConfigFile::get_int(const std::string& key, std::int64_t fallback) const {
  const auto* v = lookup(key);
  if (!v) return fallback;
  try {
    return parse_int(*v);
  } catch (const ConfigError& e) {
    throw ConfigError(source_ + ": key '" + key + "': " + e.what());
  }
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  const auto* v = lookup(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError(source_ + ": key '" + key + "': expected a boolean, got '" + *v + "'");
}

std::vector<std::int64_t> ConfigFile::get_int_list(const std::string& key,
                                                   const std::vector<std::int64_t>& fallback) const {
  const auto* v = lookup(key);
  if (!v) return fallback;
  std::vector<std::int64_t> out;
  if (v->empty() || *v == "none") return out;
  try {
    for (const auto& part : split_string(*v, ',')) out.push_back(parse_int(part));
  } catch (const ConfigError& e) {
    throw ConfigError(source_ + ": key '" + key + "': " + e.what());
  }
  return out;
}

void ConfigFile::require_all_consumed() const {
  std::string unknown;
  for (const auto& [k, v] : values_)
    if (!consumed_.contains(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  if (!unknown.empty()) throw ConfigError(source_ + ": unknown keys: " + unknown);
}

std::string ConfigFile::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string ConfigFile::hash(const std::vector<std::string>& prefixes) const {
  std::string text;
  for (const auto& [k, v] : values_) {
    bool keep = prefixes.empty();
    for (const auto& p : prefixes) keep = keep || k.rfind(p, 0) == 0;
    if (keep) text += k + " = " + v + "\n";
  }
  return hex64(fnv1a64(text));
}

}  // namespace pctlab
