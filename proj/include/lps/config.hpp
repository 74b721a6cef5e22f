#pragma once

// Minimal TOML-style key-value config: [table] headers, key = value lines,
// '#' comments, string / number / bool / comma-free scalar values.

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lps {

class Config {
 public:
  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
  }

  static Config parse_string(const std::string& text, const std::string& origin = "<string>") {
    Config cfg;
    std::istringstream in(text);
    std::string line, table;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = strip(line);
      if (s.empty() || s[0] == '#') continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": malformed table header");
        table = strip(s.substr(1, s.size() - 2));
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
      std::string key = strip(s.substr(0, eq));
      std::string val = strip(s.substr(eq + 1));
      auto hash = val.find('#');
      if (hash != std::string::npos && (val.empty() || val[0] != '"')) val = strip(val.substr(0, hash));
      if (val.size() >= 2 && val.front() == '"' && val.back() == '"') val = val.substr(1, val.size() - 2);
      cfg.values_[table.empty() ? key : table + "." + key] = val;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& def) const {
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }
  std::string require_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::runtime_error("config: missing key '" + key + "'");
    return it->second;
  }
  double get_real(const std::string& key, double def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    return to_real(key, it->second);
  }
  long get_int(const std::string& key, long def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    return to_int(key, it->second);
  }
  bool get_bool(const std::string& key, bool def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw std::runtime_error("config: key '" + key + "' is not a bool: " + it->second);
  }
  // value like "0.5, -0.3, 0.2"
  std::vector<double> get_real_list(const std::string& key, const std::vector<double>& def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::vector<double> out;
    std::string item;
    std::istringstream ss(it->second);
    while (std::getline(ss, item, ',')) out.push_back(to_real(key, strip(item)));
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  static std::string strip(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }
  static double to_real(const std::string& key, const std::string& v) {
    try {
      size_t pos;
      double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw std::runtime_error("config: key '" + key + "' is not a number: " + v);
    }
  }
  static long to_int(const std::string& key, const std::string& v) {
    try {
      size_t pos;
      long d = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw std::runtime_error("config: key '" + key + "' is not an integer: " + v);
    }
  }
  std::map<std::string, std::string> values_;
};

}  // namespace lps
