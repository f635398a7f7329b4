#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flicker/dynamics.hpp"
#include "flicker/features.hpp"
#include "flicker/nn/train.hpp"
#include "flicker/rng.hpp"

namespace flicker::datagen {

/// Recipe for one synthetic training set (a single native length).
struct DatasetManifest {
  std::size_t native_length = 5000;
  std::size_t count_per_class = 2000;
  std::size_t var_window = 1000;
  std::uint64_t base_seed = 0;
  double p0 = 5.0;
  double sigma_factor = 1.2;  // sigma = 1.2 * x0
};

struct LabeledSample {
  features::ChannelPair channels;
  int label = 0;  // 1 = flicker (p ramped to p*), 0 = non-flicker (p fixed)
  std::size_t length = 0;
  std::uint64_t gen_seed = 0;
  dynamics::PolyDrift coeffs;  // with p = p0
  double x0 = 0;               // largest positive equilibrium at p0
  double sigma = 0;
  double p_star = 0;
};

/// Degree-7 coefficient draw:
///   g ~ U(-2,0), f ~ U(-|g|,|g|), e ~ U(-2,0), d ~ U(-|e|,|e|),
///   c ~ U(-2,0), b = 0, a ~ U(1,3),
/// redrawn (up to max_retries) until the drift has a positive equilibrium at
/// p0 and a saddle-node p* below it.
dynamics::PolyDrift sample_coefficients(Rng& rng, double p0 = 5.0,
                                        int max_retries = 100);

/// One labeled series: x0 = largest positive root at p0, sigma = factor*x0,
/// dt = 0.01, length-1 Euler steps. label 1 ramps p linearly p0 -> p*;
/// label 0 holds p at p0. On overflow the trajectory seed is redrawn a few
/// times before giving up.
LabeledSample make_sample(const dynamics::PolyDrift& coeffs,
                          std::size_t length, int label, std::uint64_t seed,
                          std::size_t var_window = 1000,
                          double sigma_factor = 1.2, int sim_retries = 8);

/// Re-runs the recorded simulation of a sample (raw, pre-normalization
/// values); exact by the determinism contract.
dynamics::Trajectory regenerate_raw(const LabeledSample& sample);

/// Writes count_per_class samples of each label under out_dir:
/// samples_label{0,1}.f32 (per sample: z-scored raw channel then z-scored
/// rolling-variance channel, float32 LE), samples.csv (per-sample
/// provenance), manifest.txt. Deterministic for a fixed base_seed and
/// independent of the thread count. Set csv_export for a plain-text dump of
/// the channels.
void build_dataset(const DatasetManifest& manifest, const std::string& out_dir,
                   int threads = 0, bool csv_export = false);

DatasetManifest read_manifest(const std::string& dir);

/// Loads a dataset directory into training memory (label-0 block first).
nn::Dataset load_dataset(const std::string& dir);

}  // namespace flicker::datagen
