#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ntiqa/error.hpp"

namespace ntiqa {

// Plain-text key/value configuration: one `key = value` per line, '#'
// comments. Values keep their literal text so the config hash is stable.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_text(const std::string& text, const std::string& context);

  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& key_eq_value);  // "key=value"

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  // FNV-1a over the sorted canonical "key=value" lines.
  uint64_t hash() const;
  std::string hash_hex() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ntiqa
