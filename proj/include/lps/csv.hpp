#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lps {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  }
  int require_col(const std::string& name) const {
    int j = col(name);
    if (j < 0) throw DataError("missing required column '" + name + "'");
    return j;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  t.header = split_csv_line(line);
  size_t ncol = t.header.size();
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != ncol)
      throw DataError(path + ":" + std::to_string(lineno) +
                               ": expected " + std::to_string(ncol) + " fields, got " +
                               std::to_string(f.size()));
    t.rows.push_back(std::move(f));
  }
  return t;
}

inline double parse_real(const std::string& s, const std::string& context) {
  if (s == "NA" || s == "na" || s.empty())
    throw DataError(context + ": missing value ('" + s + "') not allowed");
  size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DataError(context + ": not a number: '" + s + "'");
  }
  if (pos != s.size()) throw DataError(context + ": not a number: '" + s + "'");
  return v;
}

inline int parse_int01(const std::string& s, const std::string& context) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw DataError(context + ": expected 0 or 1, got '" + s + "'");
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write file: " + path);
    out_.precision(17);
  }
  template <typename... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    (write_field(fields, first), ...);
    out_ << '\n';
  }

 private:
  template <typename T>
  void write_field(const T& v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    out_ << v;
  }
  std::ofstream out_;
};

}  // namespace lps
