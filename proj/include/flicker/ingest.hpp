#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace flicker::ingest {

enum class Direction { time_forward, time_reversed };

/// An empirical record after cleaning: strictly increasing timestamps
/// (duplicates collapsed by mean), at least two points. `direction` is
/// time_reversed for before-present style axes (rows arriving in descending
/// time order), where physical time runs against the stored axis.
struct EmpiricalSeries {
  std::vector<double> timestamps;
  std::vector<double> values;
  std::string source_label;
  Direction direction = Direction::time_forward;
  std::size_t dropped_rows = 0;
};

struct LoadOptions {
  char delimiter = ',';
  /// -1 = infer from row order, 0 = force forward, 1 = force reversed.
  int direction_override = -1;
};

/// Reads a delimited text file with a header row, extracting the named time
/// and value columns. Rows with missing or unparseable entries are dropped
/// and counted. Throws DataError for missing columns or fewer than two
/// usable rows.
EmpiricalSeries load_csv(const std::string& path, const std::string& time_column,
                         const std::string& value_column,
                         const LoadOptions& options = {});

/// Piecewise-linear interpolation of (timestamps, values) at target_len
/// uniformly spaced times spanning [t_min, t_max]; endpoints exact.
std::vector<double> regularize(const EmpiricalSeries& series,
                               std::size_t target_len = 100000);

/// regularize(), then flipped when the record is time_reversed, so the
/// output always runs forward in physical time.
std::vector<double> forward_time_values(const EmpiricalSeries& series,
                                        std::size_t target_len = 100000);

}  // namespace flicker::ingest
