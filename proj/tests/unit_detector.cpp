#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "flicker/detector.hpp"
#include "flicker/errors.hpp"
#include "flicker/rng.hpp"

using namespace flicker;
using namespace flicker::detector;

namespace {

/// Small random-weight model; structural detector behavior (alignment,
/// invariances, formats) does not require trained weights.
nn::Checkpoint tiny_checkpoint(std::uint64_t seed, int input_length = 100) {
  nn::Architecture arch;
  arch.input_length = input_length;
  arch.conv_kernel = 10;
  arch.conv1_filters = 4;
  arch.conv2_filters = 8;
  arch.lstm1_cells = 6;
  arch.lstm2_cells = 3;
  arch.dropout_rate = 0.05;
  nn::Net<float> net(arch);
  net.init_weights(seed);
  nn::Checkpoint ckpt;
  ckpt.arch = arch;
  ckpt.weights = net.params;
  return ckpt;
}

std::vector<double> noisy_series(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  double walk = 0;
  for (auto& v : x) v = 2.0 + 0.1 * rng.gaussian() + 0.02 * (walk += rng.gaussian());
  return x;
}

}  // namespace

TEST_CASE("dl_score: max minus mean") {
  CHECK(dl_score(std::vector<double>{0.2, 0.9, 0.4}) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(std::abs(dl_score(std::vector<double>{0.37, 0.37, 0.37})) < 1e-15);

  Rng rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> trace(20);
    for (auto& v : trace) v = rng.uniform01();
    const double s = dl_score(trace);
    CHECK(s >= 0.0);
    CHECK(s < 1.0);
  }
  CHECK_THROWS_AS(dl_score(std::vector<double>{}), DataError);
}

TEST_CASE("conservative_score: minimum member score") {
  auto member = [](std::initializer_list<double> pf) {
    MemberTrace t;
    t.p_flicker = pf;
    t.end_index.resize(t.p_flicker.size());
    return t;
  };
  // members with dl scores {0.4, 0.1, 0.3}
  std::vector<MemberTrace> members = {member({0.1, 0.5, 0.0}),
                                      member({0.2, 0.3, 0.1}),
                                      member({0.0, 0.4, 0.2})};
  CHECK(dl_score(members[0].p_flicker) == doctest::Approx(0.3));
  CHECK(conservative_score(members) == doctest::Approx(0.1).epsilon(1e-12));

  std::vector<MemberTrace> one = {member({0.2, 0.9, 0.4})};
  CHECK(conservative_score(one) == doctest::Approx(0.4).epsilon(1e-12));

  std::vector<MemberTrace> flat = {member({0.5, 0.5}), member({0.1, 0.1})};
  CHECK(conservative_score(flat) == 0.0);
}

TEST_CASE("variance_score: constructed rolling-variance path [1,1,4]") {
  // Trailing pair variances of [0,2,0,4] are exactly 1, 1, 4.
  const std::vector<double> series = {0, 2, 0, 4};
  const double expected = 4.0 / (2.0 + std::sqrt(2.0));
  CHECK(variance_score(series, 2) == doctest::Approx(expected).epsilon(1e-9));

  CHECK(variance_score(std::vector<double>(100, 2.5), 10) == 0.0);
  CHECK_THROWS_AS(variance_score({1.0, 2.0}, 10), DataError);
}

TEST_CASE("variance_score: affine invariance and white-noise concentration") {
  Rng rng(55);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> x(5000);
    for (auto& v : x) v = rng.gaussian();
    const double base = variance_score(x, 1000);
    std::vector<double> ax(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) ax[i] = -2.5 * x[i] + 7.0;
    CHECK(variance_score(ax, 1000) == doctest::Approx(base).epsilon(1e-9));
    // stationary noise: the max surge stays close to the normalized baseline
    CHECK(base > 1.0);
    CHECK(base < 1.5);
  }
}

TEST_CASE("scan_series: single member ensemble reproduces the member trace") {
  EnsembleSpec spec;
  spec.members.push_back({tiny_checkpoint(42), 0.1});
  spec.threads = 1;
  const auto series = noisy_series(4000, 5);
  const auto trace = scan_series(series, spec);

  REQUIRE(trace.per_member.size() == 1);
  REQUIRE(trace.times.size() == trace.per_member[0].end_index.size());
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    CHECK(trace.times[i] == trace.per_member[0].end_index[i]);
    CHECK(trace.p_flicker[i] == doctest::Approx(trace.per_member[0].p_flicker[i]).epsilon(1e-12));
    CHECK(trace.p_flicker[i] >= 0.0);
    CHECK(trace.p_flicker[i] <= 1.0);
  }
  // window 400, stride 40: end indices 399, 439, ...
  CHECK(trace.times.front() == 399.0);
  CHECK(trace.per_member[0].end_index[1] == 439.0);
}

TEST_CASE("scan_series: trace is invariant under positive affine input maps") {
  EnsembleSpec spec;
  spec.members.push_back({tiny_checkpoint(7), 0.12});
  spec.members.push_back({tiny_checkpoint(8, 120), 0.2});
  const auto series = noisy_series(3000, 9);
  std::vector<double> mapped(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) mapped[i] = 3.7 * series[i] - 12.0;

  const auto trace_a = scan_series(series, spec);
  const auto trace_b = scan_series(mapped, spec);
  REQUIRE(trace_a.times == trace_b.times);
  for (std::size_t i = 0; i < trace_a.p_flicker.size(); ++i)
    CHECK(std::abs(trace_a.p_flicker[i] - trace_b.p_flicker[i]) < 1e-6);
}

TEST_CASE("scan_series: member order does not change ensemble or scores") {
  EnsembleSpec spec;
  spec.members.push_back({tiny_checkpoint(1), 0.1});
  spec.members.push_back({tiny_checkpoint(2, 150), 0.15});
  spec.members.push_back({tiny_checkpoint(3, 80), 0.2});
  EnsembleSpec shuffled;
  shuffled.members = {spec.members[2], spec.members[0], spec.members[1]};

  const auto series = noisy_series(2500, 13);
  const auto a = scan_series(series, spec);
  const auto b = scan_series(series, shuffled);
  CHECK(a.times == b.times);
  for (std::size_t i = 0; i < a.p_flicker.size(); ++i)
    CHECK(a.p_flicker[i] == doctest::Approx(b.p_flicker[i]).epsilon(1e-12));
  CHECK(conservative_score(a.per_member) ==
        doctest::Approx(conservative_score(b.per_member)).epsilon(1e-12));
}

TEST_CASE("scan_series: thread count does not change the trace") {
  EnsembleSpec spec;
  spec.members.push_back({tiny_checkpoint(21), 0.15});
  const auto series = noisy_series(2000, 17);
  spec.threads = 1;
  const auto a = scan_series(series, spec);
  spec.threads = 4;
  const auto b = scan_series(series, spec);
  CHECK(a.times == b.times);
  CHECK(a.p_flicker == b.p_flicker);
}

TEST_CASE("scan_series: series shorter than a member window is rejected") {
  EnsembleSpec spec;
  spec.members.push_back({tiny_checkpoint(4), 0.08});
  const auto series = noisy_series(50, 3);  // window would be 4 samples
  CHECK_THROWS_AS(scan_series(series, spec), DataError);
  CHECK_THROWS_AS(scan_series({}, spec), DataError);
}

TEST_CASE("write_trace_csv: header carries ensemble member columns") {
  EnsembleSpec spec;
  spec.members.push_back({tiny_checkpoint(31), 0.1});
  spec.members.push_back({tiny_checkpoint(32, 120), 0.14});
  const auto trace = scan_series(noisy_series(2000, 23), spec);
  const std::string path = "trace_test.csv";
  write_trace_csv(trace, path);
  std::ifstream in(path);
  std::string header;
  REQUIRE(std::getline(in, header));
  CHECK(header == "index,p_flicker,p_nonflicker,member_1,member_2");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    double idx, pf, pn, m1, m2;
    REQUIRE(std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg,%lg", &idx, &pf, &pn,
                        &m1, &m2) == 5);
    CHECK(pf + pn == doctest::Approx(1.0).epsilon(1e-12));
    ++rows;
  }
  CHECK(rows == trace.times.size());
  std::remove(path.c_str());
}
