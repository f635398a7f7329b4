// Trained-detector behavior on series it was never shown: quiet on null
// records, loud before a genuine transition. Uses a small but real model
// trained in-process on sampler data.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "flicker/datagen.hpp"
#include "flicker/detector.hpp"
#include "flicker/nn/checkpoint.hpp"
#include "flicker/nn/train.hpp"

using namespace flicker;

namespace {

constexpr int kLength = 250;
constexpr int kVarWindow = 50;
constexpr int kPerClass = 80;

nn::Checkpoint train_small_model() {
  datagen::DatasetManifest manifest;
  manifest.native_length = kLength;
  manifest.count_per_class = kPerClass;
  manifest.var_window = kVarWindow;
  manifest.base_seed = 3100;

  nn::Dataset data;
  data.length = kLength;
  for (int label = 0; label <= 1; ++label) {
    for (int i = 0; i < kPerClass; ++i) {
      Rng stream(manifest.base_seed + static_cast<std::uint64_t>(label) * kPerClass + i);
      const auto coeffs = datagen::sample_coefficients(stream);
      const auto sample = datagen::make_sample(coeffs, kLength, label,
                                               stream.next_u64(), kVarWindow);
      for (int t = 0; t < kLength; ++t) {
        data.inputs.push_back(static_cast<float>(sample.channels.raw[t]));
        data.inputs.push_back(static_cast<float>(sample.channels.rollvar[t]));
      }
      data.labels.push_back(label);
    }
  }

  nn::Architecture arch;
  arch.input_length = kLength;
  arch.conv_kernel = 12;
  nn::Net<float> net(arch);
  net.init_weights(5 ^ 0x5DEECE66Dull);
  nn::TrainConfig config;
  config.shuffle_seed = 5;
  config.threads = 2;
  const auto result = nn::train(net, data, config);

  double best_val = 0;
  for (const auto& h : result.history) best_val = std::max(best_val, h.val_accuracy);
  CAPTURE(best_val);
  REQUIRE(best_val >= 0.85);  // the detector checks below assume a usable model

  nn::Checkpoint ckpt;
  ckpt.arch = arch;
  ckpt.weights = result.best_weights;
  ckpt.history = result.history;
  return ckpt;
}

/// Long record of the training family: ramped control for flicker == true,
/// constant control otherwise.
std::vector<double> long_series(bool flicker, std::uint64_t seed) {
  Rng stream(seed);
  const auto coeffs = datagen::sample_coefficients(stream);
  const double x0 = dynamics::equilibria(dynamics::Drift{coeffs}).back();
  const double p_star = dynamics::critical_point(coeffs).p_star;
  const auto param = flicker ? dynamics::Schedule::linear_ramp(coeffs.p, p_star)
                             : dynamics::Schedule::constant(coeffs.p);
  const auto traj = dynamics::simulate(dynamics::Drift{coeffs}, param,
                                       dynamics::Schedule::constant(1.2 * x0),
                                       x0, 2499, 0.01, stream.next_u64());
  return traj.values;
}

}  // namespace

TEST_CASE("trained detector: quiet on null records, loud before transitions") {
  const auto ckpt = train_small_model();
  detector::EnsembleSpec spec;
  spec.members.push_back({ckpt, 0.1});  // 250-sample windows, native length
  spec.threads = 2;

  SUBCASE("null series keep the mean flicker posterior below 0.5") {
    int quiet = 0;
    const int reps = 6;
    for (int r = 0; r < reps; ++r) {
      const auto series = long_series(false, 9100 + r);
      const auto trace = detector::scan_series(series, spec);
      double mean = 0;
      for (double p : trace.p_flicker) mean += p;
      mean /= static_cast<double>(trace.p_flicker.size());
      CAPTURE(r);
      CAPTURE(mean);
      quiet += mean < 0.5;
    }
    CHECK(quiet >= 5);
  }

  SUBCASE("flickering series push the posterior above 0.9 before the end") {
    int loud = 0;
    const int reps = 6;
    for (int r = 0; r < reps; ++r) {
      const auto series = long_series(true, 9600 + r);
      const auto trace = detector::scan_series(series, spec);
      double max_p = 0;
      for (double p : trace.p_flicker) max_p = std::max(max_p, p);
      CAPTURE(r);
      CAPTURE(max_p);
      loud += max_p > 0.9;
    }
    CHECK(loud >= 5);
  }

  SUBCASE("white noise around one equilibrium stays quiet") {
    Rng rng(777);
    const auto drift = dynamics::make_named(dynamics::Family::cubic, 0.5);
    const auto traj = dynamics::simulate(
        dynamics::Drift{drift}, dynamics::Schedule::constant(0.5),
        dynamics::Schedule::constant(0.05), 1.0, 2499, 0.01, 4242);
    const auto trace = detector::scan_series(traj.values, spec);
    double mean = 0;
    for (double p : trace.p_flicker) mean += p;
    mean /= static_cast<double>(trace.p_flicker.size());
    CHECK(mean < 0.5);
  }
}
