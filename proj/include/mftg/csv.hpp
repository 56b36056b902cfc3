#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mftg/common.hpp"
#include "mftg/linalg.hpp"
#include "mftg/measures.hpp"

namespace mftg {

// 17 significant digits: doubles survive a print/parse round trip unchanged,
// so identical runs produce bitwise identical files.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

// Column-checked CSV file starting with the schema line "# mftg-csv v1".
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : path_(path), width_(columns.size()) {
    if (columns.empty()) throw InvalidInput("CsvWriter: no columns");
    out_.open(path);
    if (!out_) throw InvalidInput("CsvWriter: cannot open " + path);
    out_ << "# mftg-csv v1\n";
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
  }

  void row(const Vec& values) {
    if (values.size() != width_)
      throw InvalidInput("CsvWriter: row width mismatch in " + path_);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_double(values[i]);
    }
    out_ << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_)
      throw InvalidInput("CsvWriter: row width mismatch in " + path_);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t width_;
};

inline void write_measure_csv(const std::string& path, const DiscreteMeasure& m) {
  std::vector<std::string> cols;
  for (std::size_t c = 0; c < m.dim(); ++c) cols.push_back("x_" + std::to_string(c + 1));
  cols.push_back("weight");
  CsvWriter w(path, cols);
  for (const auto& a : m.atoms()) {
    Vec row(a.point.coords());
    row.push_back(a.weight);
    w.row(row);
  }
}

inline void write_lattice_csv(const std::string& path, const Lattice& lat) {
  std::vector<std::string> cols;
  for (std::size_t c = 0; c < lat.dim(); ++c) cols.push_back("x_" + std::to_string(c + 1));
  CsvWriter w(path, cols);
  for (const auto& p : lat.points()) w.row(p.coords());
}

// Plain-text manifest: one "key: value" line per entry, in the given order.
inline void write_manifest(const std::string& path,
                           const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("write_manifest: cannot open " + path);
  for (const auto& [k, v] : entries) out << k << ": " << v << '\n';
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace detail

// Flat key=value configuration with optional [section] headers; a section
// prefixes its keys as "section.key". Lines starting with '#' or ';' are
// comments. Values keep their literal text; callers convert as needed.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("Config: cannot open " + path);
    Config cfg;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = detail::trim(line);
      if (s.empty() || s[0] == '#' || s[0] == ';') continue;
      if (s.front() == '[' && s.back() == ']') {
        section = detail::trim(s.substr(1, s.size() - 2));
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw InvalidInput("Config: line " + std::to_string(lineno) + " of " + path +
                           " is not key=value");
      std::string key = detail::trim(s.substr(0, eq));
      std::string val = detail::trim(s.substr(eq + 1));
      if (key.empty())
        throw InvalidInput("Config: empty key on line " + std::to_string(lineno) + " of " +
                           path);
      if (!section.empty()) key = section + "." + key;
      cfg.values_[key] = val;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  // section-qualified key wins over the bare one
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const {
    auto it = values_.find(section + "." + key);
    if (it != values_.end()) return it->second;
    it = values_.find(key);
    if (it != values_.end()) return it->second;
    return fallback;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Accepts "1/16" style ratios and plain decimals; both must be positive.
inline double parse_ratio(const std::string& text) {
  const std::string s = detail::trim(text);
  if (s.empty()) throw InvalidInput("parse_ratio: empty value");
  std::size_t slash = s.find('/');
  try {
    if (slash == std::string::npos) {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw InvalidInput("parse_ratio: trailing text in " + s);
      if (!(v > 0.0)) throw InvalidInput("parse_ratio: value must be positive, got " + s);
      return v;
    }
    std::size_t un = 0, ud = 0;
    const std::string num = detail::trim(s.substr(0, slash));
    const std::string den = detail::trim(s.substr(slash + 1));
    double a = std::stod(num, &un);
    double b = std::stod(den, &ud);
    if (un != num.size() || ud != den.size())
      throw InvalidInput("parse_ratio: trailing text in " + s);
    if (!(a > 0.0) || !(b > 0.0))
      throw InvalidInput("parse_ratio: both parts must be positive in " + s);
    return a / b;
  } catch (const std::invalid_argument&) {
    throw InvalidInput("parse_ratio: cannot parse " + s);
  } catch (const std::out_of_range&) {
    throw InvalidInput("parse_ratio: out of range " + s);
  }
}

}  // namespace mftg
