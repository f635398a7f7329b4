#include "flicker/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "flicker/errors.hpp"
#include "flicker/parallel.hpp"

namespace flicker::eval {

using dynamics::Family;

ExperimentSpec default_spec(Family system, Regime regime,
                            std::size_t replicates, std::uint64_t base_seed) {
  ExperimentSpec spec;
  spec.system = system;
  spec.regime = regime;
  spec.replicates = replicates;
  spec.base_seed = base_seed;
  switch (system) {
    case Family::cubic: {
      spec.sigma_base = 0.4;
      spec.b_start = 0.5;
      const double b_star =
          dynamics::critical_control(dynamics::make_named(Family::cubic, spec.b_start));
      spec.b_end = b_star - 0.05 * (spec.b_start - b_star);
      break;
    }
    case Family::exponential:
      spec.sigma_base = 0.45;
      spec.b_start = 0.0;
      spec.b_end = -1.0;
      break;
    case Family::tanh:
      spec.sigma_base = 0.9;
      spec.b_start = 0.5;
      spec.b_end = -1.0;
      break;
    case Family::hill:
      spec.sigma_base = 0.5;
      spec.b_start = 1.0;
      spec.b_end = -0.5;
      break;
    case Family::logistic:
      spec.sigma_base = 0.3;
      spec.b_start = 0.0;
      spec.b_end = -1.0;
      break;
    case Family::arctan:
      spec.sigma_base = 0.8;
      spec.b_start = 0.5;
      spec.b_end = -1.0;
      break;
  }
  return spec;
}

std::vector<dynamics::Trajectory> run_experiment(const ExperimentSpec& spec) {
  if (spec.replicates < 1)
    throw DataError("run_experiment: replicates must be >= 1");

  const auto drift = dynamics::make_named(spec.system, spec.b_start);
  const auto roots = dynamics::equilibria(dynamics::Drift{drift});
  if (roots.empty())
    throw NumericError("run_experiment: system has no equilibrium at b_start");
  const double x0 = roots.back();

  const auto param = spec.regime == Regime::flickering
                         ? dynamics::Schedule::linear_ramp(spec.b_start, spec.b_end)
                         : dynamics::Schedule::constant(spec.b_start);
  const auto noise =
      spec.regime == Regime::flickering
          ? dynamics::Schedule::constant(spec.sigma_base)
          : dynamics::Schedule::triangular_bump(spec.sigma_base,
                                                spec.bump_factor * spec.sigma_base,
                                                spec.bump_window);

  std::vector<dynamics::Trajectory> out(spec.replicates);
  parallel_for(spec.replicates, spec.threads, [&](std::size_t r) {
    out[r] = dynamics::simulate(dynamics::Drift{drift}, param, noise, x0,
                                spec.steps, spec.dt, spec.base_seed + r);
  });
  return out;
}

RocCurve roc_from_scores(const std::vector<double>& positives,
                         const std::vector<double>& negatives) {
  if (positives.empty() || negatives.empty())
    throw DataError("roc_from_scores: both score lists must be non-empty");

  std::vector<double> taus;
  taus.reserve(positives.size() + negatives.size());
  taus.insert(taus.end(), positives.begin(), positives.end());
  taus.insert(taus.end(), negatives.begin(), negatives.end());
  std::sort(taus.begin(), taus.end(), std::greater<double>());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

  std::vector<double> pos_sorted = positives;
  std::vector<double> neg_sorted = negatives;
  std::sort(pos_sorted.begin(), pos_sorted.end(), std::greater<double>());
  std::sort(neg_sorted.begin(), neg_sorted.end(), std::greater<double>());
  const double np = static_cast<double>(pos_sorted.size());
  const double nn = static_cast<double>(neg_sorted.size());

  RocCurve curve;
  const double inf = std::numeric_limits<double>::infinity();
  curve.thresholds.push_back(inf);
  curve.fpr.push_back(0);
  curve.tpr.push_back(0);
  std::size_t ipos = 0, ineg = 0;
  for (double tau : taus) {
    while (ipos < pos_sorted.size() && pos_sorted[ipos] >= tau) ++ipos;
    while (ineg < neg_sorted.size() && neg_sorted[ineg] >= tau) ++ineg;
    curve.thresholds.push_back(tau);
    curve.tpr.push_back(static_cast<double>(ipos) / np);
    curve.fpr.push_back(static_cast<double>(ineg) / nn);
  }
  curve.thresholds.push_back(-inf);
  curve.fpr.push_back(1);
  curve.tpr.push_back(1);

  double auc = 0;
  for (std::size_t i = 1; i < curve.fpr.size(); ++i)
    auc += (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]) * 0.5;
  curve.auc = auc;
  return curve;
}

DetectorComparison compare_detectors(Family system, std::size_t dl_per_class,
                                     std::size_t var_per_class,
                                     const detector::EnsembleSpec& ensemble,
                                     std::uint64_t base_seed, std::size_t steps,
                                     double dt, int threads,
                                     std::size_t var_window) {
  if (dl_per_class < 1 || var_per_class < 1)
    throw DataError("compare_detectors: replicate counts must be >= 1");

  const std::size_t n = std::max(dl_per_class, var_per_class);
  DetectorComparison cmp;

  for (Regime regime : {Regime::flickering, Regime::null_bump}) {
    ExperimentSpec spec = default_spec(system, regime, n, base_seed);
    spec.steps = steps;
    spec.dt = dt;
    spec.threads = threads;
    // Independent seed streams per regime.
    spec.base_seed =
        regime == Regime::flickering ? base_seed : base_seed + (1ull << 32);
    const auto trajectories = run_experiment(spec);

    auto& dl_scores = regime == Regime::flickering ? cmp.dl_pos : cmp.dl_neg;
    auto& var_scores = regime == Regime::flickering ? cmp.var_pos : cmp.var_neg;
    dl_scores.resize(dl_per_class);
    var_scores.resize(var_per_class);

    detector::EnsembleSpec scan_spec = ensemble;
    scan_spec.threads = threads;
    for (std::size_t r = 0; r < dl_per_class; ++r) {
      const auto trace = detector::scan_series(trajectories[r].values, scan_spec);
      dl_scores[r] = detector::conservative_score(trace.per_member);
    }
    parallel_for(var_per_class, threads, [&](std::size_t r) {
      var_scores[r] = detector::variance_score(trajectories[r].values, var_window);
    });
  }

  cmp.dl = roc_from_scores(cmp.dl_pos, cmp.dl_neg);
  cmp.var = roc_from_scores(cmp.var_pos, cmp.var_neg);
  return cmp;
}

void write_roc_csv(const RocCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "threshold,fpr,tpr\n";
  char buf[96];
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", curve.thresholds[i],
                  curve.fpr[i], curve.tpr[i]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "auc=%.17g\n", curve.auc);
  out << buf;
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace flicker::eval
