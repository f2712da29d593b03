#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "semisurv/core.hpp"

namespace semisurv {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Splits one CSV line; double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.emplace_back(trim(field));
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Shortest text that parses back to exactly `v`.
inline std::string format_exact(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Reads a dataset CSV: header row, a `time` column, a `status` column
/// (1 observed, 0 censored, empty or -1 unlabeled), every other column a
/// numeric feature. Errors name the 1-based file line.
inline Dataset read_dataset(std::istream& in, const std::string& source = "<stream>") {
  auto fail = [&](std::size_t line, const std::string& what) -> Error {
    return Error(source + ":" + std::to_string(line) + ": " + what);
  };

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header = detail::split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw Error(source + ": empty dataset");

  std::ptrdiff_t time_col = -1, status_col = -1;
  Dataset data;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string name = header[c];
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (lower == "time" && time_col < 0) {
      time_col = static_cast<std::ptrdiff_t>(c);
    } else if (lower == "status" && status_col < 0) {
      status_col = static_cast<std::ptrdiff_t>(c);
    } else {
      feature_cols.push_back(c);
      data.feature_names.push_back(name);
    }
  }
  if (time_col < 0) throw fail(1, "missing 'time' column");
  if (status_col < 0) throw fail(1, "missing 'status' column");

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw fail(line_no, "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));

    SurvivalRecord rec;
    const std::string_view status = cells[static_cast<std::size_t>(status_col)];
    if (status == "1") {
      rec.status = SupervisionStatus::Observed;
    } else if (status == "0") {
      rec.status = SupervisionStatus::Censored;
    } else if (status.empty() || status == "-1") {
      rec.status = SupervisionStatus::Unlabeled;
    } else {
      throw fail(line_no, "invalid status '" + std::string(status) + "'");
    }
    if (rec.labeled()) {
      const std::string& t = cells[static_cast<std::size_t>(time_col)];
      if (!detail::parse_double(t, rec.time)) throw fail(line_no, "non-numeric time '" + t + "'");
      if (rec.time < 0.0) throw fail(line_no, "negative time");
    }
    rec.features.reserve(feature_cols.size());
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      const std::string& cell = cells[feature_cols[j]];
      double v = 0.0;
      if (!detail::parse_double(cell, v))
        throw fail(line_no, "non-numeric value '" + cell + "' in feature '" + data.feature_names[j] + "'");
      rec.features.push_back(v);
    }
    data.records.push_back(std::move(rec));
  }
  if (data.records.empty()) throw Error(source + ": empty dataset");
  return data;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  return read_dataset(in, path);
}

inline void write_dataset(std::ostream& out, const Dataset& data) {
  out << "time,status";
  for (const auto& n : data.feature_names) out << ',' << n;
  out << '\n';
  for (const auto& r : data.records) {
    if (r.labeled())
      out << format_exact(r.time) << ',' << (r.observed() ? "1" : "0");
    else
      out << ",-1";
    for (double v : r.features) out << ',' << format_exact(v);
    out << '\n';
  }
}

/// Keeps the k features with the largest variance over all records, in
/// their original column order. Ties favour earlier columns.
inline Dataset reduce_features(const Dataset& data, std::size_t k) {
  const std::size_t p = data.feature_count();
  if (k == 0 || k > p) throw Error("k must be in [1, " + std::to_string(p) + "]");
  const double n = static_cast<double>(data.size());
  std::vector<double> variance(p, 0.0);
  for (std::size_t f = 0; f < p; ++f) {
    double sum = 0.0;
    for (const auto& r : data.records) sum += r.features[f];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : data.records) ss += (r.features[f] - mean) * (r.features[f] - mean);
    variance[f] = ss / n;
  }
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return variance[a] > variance[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());

  Dataset out;
  for (auto f : order) out.feature_names.push_back(data.feature_names[f]);
  out.records.reserve(data.size());
  for (const auto& r : data.records) {
    SurvivalRecord rec{{}, r.time, r.status};
    rec.features.reserve(k);
    for (auto f : order) rec.features.push_back(r.features[f]);
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace semisurv
