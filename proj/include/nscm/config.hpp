#pragma once

#include <map>
#include <string>
#include <vector>

#include "nscm/common.hpp"

namespace nscm {

// Flat key-value configuration read from an INI-style text file:
//
//   # comment (also ';')
//   [section]
//   key = value            -> stored under "section.key"
//   list = 1.0, 2.0, 3.0   -> numbers() / strings()
//
// Keys outside any section are stored bare. Lookups on missing keys throw
// ConfigError naming the key, so a typo surfaces as exit code 2 in the CLI
// instead of a silent default.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  std::string str(const std::string& key) const;
  std::string str(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  long integer(const std::string& key) const;
  long integer(const std::string& key, long fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<std::string> strings(const std::string& key) const;

  Vector vector(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set_number(const std::string& key, double value);

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::string require(const std::string& key) const;
  std::map<std::string, std::string> values_;
  std::string origin_;
};

}  // namespace nscm
