#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "voxdiff/error.hpp"

namespace voxdiff::csv {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Shortest round-trip decimal form, so rewritten CSVs are byte-stable.
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, Errc code) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(code, "not a number: '" + s + "'");
  }
}

inline int parse_int(const std::string& s, Errc code) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(code, "not an integer: '" + s + "'");
  }
}

inline void check_field(const std::string& f, Errc code) {
  if (f.find_first_of(",\n\r\"") != std::string::npos) throw Error(code, "field contains a reserved character: " + f);
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace voxdiff::csv
