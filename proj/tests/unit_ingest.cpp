#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "flicker/errors.hpp"
#include "flicker/ingest.hpp"

using namespace flicker;
using namespace flicker::ingest;

namespace {

struct TempCsv {
  std::string path;
  explicit TempCsv(const std::string& name, const std::string& content)
      : path(name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempCsv() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("load_csv: drops unusable rows and reports the count") {
  TempCsv file("ingest_blank.csv", "t,temp\n1,20.5\n2,\n3,21.5\n");
  const auto series = load_csv(file.path, "t", "temp");
  REQUIRE(series.timestamps.size() == 2);
  CHECK(series.dropped_rows == 1);
  CHECK(series.values[0] == 20.5);
  CHECK(series.values[1] == 21.5);
  CHECK(series.direction == Direction::time_forward);
}

TEST_CASE("load_csv: descending before-present axis is flagged and stored ascending") {
  TempCsv file("ingest_bp.csv", "age_kyr,K\n9.0,1.1\n7.5,0.9\n3.0,0.2\n");
  const auto series = load_csv(file.path, "age_kyr", "K");
  CHECK(series.direction == Direction::time_reversed);
  REQUIRE(series.timestamps.size() == 3);
  CHECK(series.timestamps[0] == 3.0);
  CHECK(series.timestamps[2] == 9.0);
  CHECK(series.values[0] == 0.2);
  CHECK(series.values[2] == 1.1);

  // Physical forward time runs 9 -> 3 kyr BP.
  const auto forward = forward_time_values(series, 5);
  CHECK(forward.front() == 1.1);
  CHECK(forward.back() == 0.2);
}

TEST_CASE("load_csv: duplicate timestamps collapse to their mean") {
  TempCsv file("ingest_dup.csv", "t,v\n1,10\n2,20\n2,30\n3,40\n");
  const auto series = load_csv(file.path, "t", "v");
  REQUIRE(series.timestamps.size() == 3);
  CHECK(series.values[1] == doctest::Approx(25.0));
}

TEST_CASE("load_csv: strictly monotone timestamps after ingestion") {
  TempCsv file("ingest_sort.csv", "t,v\n5,1\n2,2\n9,3\n2,4\n7,5\n");
  const auto series = load_csv(file.path, "t", "v");
  for (std::size_t i = 1; i < series.timestamps.size(); ++i)
    CHECK(series.timestamps[i] > series.timestamps[i - 1]);
}

TEST_CASE("load_csv: error paths") {
  TempCsv missing_col("ingest_cols.csv", "a,b\n1,2\n3,4\n");
  CHECK_THROWS_AS(load_csv(missing_col.path, "t", "b"), DataError);
  CHECK_THROWS_AS(load_csv(missing_col.path, "a", "v"), DataError);

  TempCsv too_few("ingest_short.csv", "t,v\n1,2\n");
  CHECK_THROWS_AS(load_csv(too_few.path, "t", "v"), DataError);

  TempCsv bad_time("ingest_badtime.csv", "t,v\nx,2\ny,3\nz,4\n");
  CHECK_THROWS_AS(load_csv(bad_time.path, "t", "v"), DataError);

  CHECK_THROWS_AS(load_csv("does_not_exist.csv", "t", "v"), DataError);
}

TEST_CASE("load_csv: direction override") {
  TempCsv file("ingest_override.csv", "t,v\n1,10\n2,20\n3,30\n");
  LoadOptions options;
  options.direction_override = 1;
  const auto series = load_csv(file.path, "t", "v", options);
  CHECK(series.direction == Direction::time_reversed);
}

TEST_CASE("regularize: identity on an already-uniform series") {
  EmpiricalSeries series;
  series.timestamps = {0, 1, 2, 3, 4};
  series.values = {5, 3, 8, 1, 9};
  const auto out = regularize(series, 5);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(out[i] == doctest::Approx(series.values[i]).epsilon(1e-12));
}

TEST_CASE("regularize: two points make a straight line") {
  EmpiricalSeries series;
  series.timestamps = {0, 10};
  series.values = {1, 3};
  const auto out = regularize(series, 11);
  for (std::size_t i = 0; i < 11; ++i)
    CHECK(out[i] == doctest::Approx(1.0 + 0.2 * static_cast<double>(i)).epsilon(1e-12));
}

TEST_CASE("regularize: hand-evaluated non-uniform interpolation") {
  EmpiricalSeries series;
  series.timestamps = {0, 1, 3};
  series.values = {0, 2, 1};
  const auto out = regularize(series, 7);
  const std::vector<double> expected = {0, 1, 2, 1.75, 1.5, 1.25, 1};
  REQUIRE(out.size() == 7);
  for (std::size_t i = 0; i < 7; ++i)
    CHECK(out[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("regularize: output bounded by the input range, deterministic") {
  EmpiricalSeries series;
  series.timestamps = {0, 0.3, 1.1, 4, 4.7, 6.2};
  series.values = {2, -1, 5, 0.5, 3, 1};
  const auto a = regularize(series, 1000);
  const auto b = regularize(series, 1000);
  CHECK(a == b);
  for (double v : a) {
    CHECK(v >= -1.0);
    CHECK(v <= 5.0);
  }
  CHECK(a.front() == 2.0);
  CHECK(a.back() == 1.0);
}
