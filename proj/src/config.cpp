#include "sqforge/config.hpp"

#include "sqforge/binary_io.hpp"
#include "sqforge/common.hpp"

#include <cstdint>
#include <cstdlib>
#include <sstream>

namespace sqforge {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strips a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      require(line.back() == ']', where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), where + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    c.values_[section.empty() ? key : section + "." + key] = value;
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) { return parse(io::read_file(path), path.string()); }

Config Config::resolve(const std::string& path) {
  if (!path.empty()) return load(path);
  if (const char* env = std::getenv("FORGE_CONFIG"); env && *env) return load(env);
  return {};
}

std::optional<std::string> Config::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  return raw(key).value_or(fallback);
}

int Config::get(const std::string& key, int fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const int out = std::stoi(*v, &used);
    if (used == v->size()) return out;
  } catch (const std::exception&) {
  }
  throw Error("config: " + key + " must be an integer, got '" + *v + "'");
}

double Config::get(const std::string& key, double fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double out = std::stod(*v, &used);
    if (used == v->size()) return out;
  } catch (const std::exception&) {
  }
  throw Error("config: " + key + " must be a number, got '" + *v + "'");
}

std::uint64_t Config::get(const std::string& key, std::uint64_t fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const auto out = std::stoull(*v, &used);
    if (used == v->size() && v->front() != '-') return out;
  } catch (const std::exception&) {
  }
  throw Error("config: " + key + " must be a non-negative integer, got '" + *v + "'");
}

bool Config::get(const std::string& key, bool fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw Error("config: " + key + " must be true or false, got '" + *v + "'");
}

}  // namespace sqforge
