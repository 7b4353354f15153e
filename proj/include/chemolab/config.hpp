#pragma once

// Flat "section.key = value" configuration files. Blank lines and lines
// starting with '#' are ignored; a trailing "# ..." after a value is a comment.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace chemolab {

class Config {
 public:
  Config() = default;
  static Config parse(std::istream& is, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  void erase(const std::string& key);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::optional<double> get_optional_double(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated numbers.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  /// Keys never read by any getter, sorted.
  std::vector<std::string> unused_keys() const;
  const std::map<std::string, std::string>& entries() const { return values_; }
  /// The directory of the loaded file, for resolving relative paths.
  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string source_;
  std::filesystem::path base_dir_;
  const std::string* find(const std::string& key) const;
};

}  // namespace chemolab
