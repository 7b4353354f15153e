#include "chemolab/config.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <fmt/format.h>

#include "chemolab/error.hpp"

namespace chemolab {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::istringstream ss(v);
  double d;
  if (!(ss >> d) || !(ss >> std::ws).eof())
    throw ValidationError(fmt::format("config: {} = '{}' is not a number", key, v));
  return d;
}

}  // namespace

Config Config::parse(std::istream& is, const std::string& source) {
  Config c;
  c.source_ = source;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(fmt::format("{}:{}: expected 'key = value'", source, lineno));
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ValidationError(fmt::format("{}:{}: empty key", source, lineno));
    if (c.values_.count(key)) throw ValidationError(fmt::format("{}:{}: duplicate key '{}'", source, lineno, key));
    c.values_[key] = value;
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  Config c = parse(in, path.string());
  c.base_dir_ = path.parent_path();
  return c;
}

const std::string* Config::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

void Config::erase(const std::string& key) {
  values_.erase(key);
  used_.erase(key);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

std::string Config::require_string(const std::string& key) const {
  const std::string* v = find(key);
  if (!v || v->empty()) throw ValidationError("config: missing required key " + key);
  return *v;
}

double Config::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  return v ? to_double(key, *v) : fallback;
}

std::optional<double> Config::get_optional_double(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) return std::nullopt;
  return to_double(key, *v);
}

long Config::get_int(const std::string& key, long fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  const double d = to_double(key, *v);
  if (d != std::floor(d) || std::abs(d) > 1e15)
    throw ValidationError(fmt::format("config: {} = '{}' is not an integer", key, *v));
  return static_cast<long>(d);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "yes" || *v == "1") return true;
  if (*v == "false" || *v == "no" || *v == "0") return false;
  throw ValidationError(fmt::format("config: {} = '{}' is not a boolean", key, *v));
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  std::istringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ValidationError("config: empty list for " + key);
  return out;
}

std::vector<std::string> Config::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

}  // namespace chemolab
