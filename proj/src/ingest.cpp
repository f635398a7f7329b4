#include "flicker/ingest.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "flicker/errors.hpp"
#include "flicker/features.hpp"

namespace flicker::ingest {

namespace {

std::vector<std::string> split_row(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, delimiter)) cells.push_back(cell);
  if (!line.empty() && line.back() == delimiter) cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

bool parse_number(const std::string& cell, double& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

}  // namespace

EmpiricalSeries load_csv(const std::string& path, const std::string& time_column,
                         const std::string& value_column,
                         const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input file: " + path);
  const auto header = split_row(line, options.delimiter);
  int time_idx = -1, value_idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = trim(header[i]);
    if (name == time_column) time_idx = static_cast<int>(i);
    if (name == value_column) value_idx = static_cast<int>(i);
  }
  if (time_idx < 0) throw DataError("time column not found: " + time_column);
  if (value_idx < 0) throw DataError("value column not found: " + value_column);

  std::vector<std::pair<double, double>> rows;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_row(line, options.delimiter);
    double t = 0, v = 0;
    if (static_cast<int>(cells.size()) <= std::max(time_idx, value_idx) ||
        !parse_number(cells[time_idx], t) || !parse_number(cells[value_idx], v)) {
      ++dropped;
      continue;
    }
    rows.emplace_back(t, v);
  }
  if (rows.size() < 2)
    throw DataError("fewer than 2 usable rows in: " + path);

  EmpiricalSeries series;
  series.source_label = path;
  series.dropped_rows = dropped;
  if (options.direction_override >= 0) {
    series.direction = options.direction_override == 1 ? Direction::time_reversed
                                                       : Direction::time_forward;
  } else {
    // Descending row order marks a before-present (reversed) time axis.
    series.direction = rows.front().first > rows.back().first
                           ? Direction::time_reversed
                           : Direction::time_forward;
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  // Collapse duplicate timestamps by averaging their values.
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    double sum = 0;
    while (j < rows.size() && rows[j].first == rows[i].first) sum += rows[j++].second;
    series.timestamps.push_back(rows[i].first);
    series.values.push_back(sum / static_cast<double>(j - i));
    i = j;
  }
  if (series.timestamps.size() < 2)
    throw DataError("fewer than 2 distinct timestamps in: " + path);
  return series;
}

std::vector<double> regularize(const EmpiricalSeries& series,
                               std::size_t target_len) {
  if (series.timestamps.size() < 2 ||
      series.timestamps.size() != series.values.size())
    throw DataError("regularize: invalid series");
  if (target_len < 2) throw DataError("regularize: target length must be >= 2");

  const auto& ts = series.timestamps;
  const auto& vs = series.values;
  const double t0 = ts.front();
  const double t1 = ts.back();
  std::vector<double> out(target_len);
  out.front() = vs.front();
  out.back() = vs.back();
  std::size_t seg = 0;
  for (std::size_t j = 1; j + 1 < target_len; ++j) {
    const double t = t0 + (t1 - t0) * static_cast<double>(j) /
                              static_cast<double>(target_len - 1);
    while (seg + 2 < ts.size() && ts[seg + 1] <= t) ++seg;
    const double span = ts[seg + 1] - ts[seg];
    const double frac = span > 0 ? (t - ts[seg]) / span : 0.0;
    out[j] = vs[seg] + frac * (vs[seg + 1] - vs[seg]);
  }
  return out;
}

std::vector<double> forward_time_values(const EmpiricalSeries& series,
                                        std::size_t target_len) {
  auto values = regularize(series, target_len);
  if (series.direction == Direction::time_reversed)
    std::reverse(values.begin(), values.end());
  return values;
}

}  // namespace flicker::ingest
