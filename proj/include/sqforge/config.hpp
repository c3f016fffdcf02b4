#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace sqforge {

/// Flat key=value settings. `[section]` headers prefix following keys with "section.".
/// `#` starts a comment; values may be double-quoted.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);
  /// Loads `path` if given, else $FORGE_CONFIG if set, else returns an empty config.
  static Config resolve(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> raw(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get(const std::string& key, const std::string& fallback) const;
  std::string get(const std::string& key, const char* fallback) const { return get(key, std::string(fallback)); }
  int get(const std::string& key, int fallback) const;
  double get(const std::string& key, double fallback) const;
  std::uint64_t get(const std::string& key, std::uint64_t fallback) const;
  bool get(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace sqforge
