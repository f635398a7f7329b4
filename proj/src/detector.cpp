#include "flicker/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flicker/errors.hpp"
#include "flicker/features.hpp"
#include "flicker/parallel.hpp"

namespace flicker::detector {

namespace {

struct WindowPlan {
  std::size_t window = 0;
  std::size_t stride = 0;
  std::size_t var_window = 0;
  std::vector<std::size_t> starts;
};

WindowPlan plan_member(std::size_t n, double fraction, double stride_fraction,
                       int native_length) {
  if (!(fraction > 0 && fraction < 1))
    throw DataError("ensemble window fractions must lie in (0, 1)");
  WindowPlan plan;
  plan.window = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(n)));
  if (plan.window < 8)
    throw DataError("series shorter than a member's sliding window");
  if (plan.window > n)
    throw DataError("series shorter than a member's sliding window");
  plan.stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround(stride_fraction * static_cast<double>(plan.window))));
  const double scaled =
      1000.0 * static_cast<double>(native_length) / static_cast<double>(plan.window);
  plan.var_window =
      std::min<std::size_t>(static_cast<std::size_t>(std::llround(scaled)),
                            static_cast<std::size_t>(native_length / 5));
  plan.var_window = std::max<std::size_t>(2, plan.var_window);
  for (std::size_t start = 0; start + plan.window <= n; start += plan.stride)
    plan.starts.push_back(start);
  return plan;
}

double interp_trace(const MemberTrace& trace, double at) {
  const auto& xs = trace.end_index;
  const auto& ys = trace.p_flicker;
  if (at <= xs.front()) return ys.front();
  if (at >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), at);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double span = xs[hi] - xs[lo];
  const double frac = span > 0 ? (at - xs[lo]) / span : 0.0;
  return ys[lo] + frac * (ys[hi] - ys[lo]);
}

}  // namespace

ProbabilityTrace scan_series(const std::vector<double>& series,
                             const EnsembleSpec& spec) {
  if (spec.members.empty()) throw DataError("ensemble has no members");
  const std::size_t n = series.size();

  ProbabilityTrace trace;
  trace.per_member.resize(spec.members.size());

  for (std::size_t m = 0; m < spec.members.size(); ++m) {
    const auto& member = spec.members[m];
    const int native = member.checkpoint.arch.input_length;
    const WindowPlan plan =
        plan_member(n, member.window_fraction, spec.stride_fraction, native);

    const nn::Net<float> net = nn::to_net(member.checkpoint);
    MemberTrace& mt = trace.per_member[m];
    mt.end_index.resize(plan.starts.size());
    mt.p_flicker.resize(plan.starts.size());

    const int threads = resolve_threads(spec.threads);
    std::vector<nn::Workspace<float>> workspaces;
    for (int i = 0; i < threads; ++i) workspaces.emplace_back(net.arch);

    const std::size_t jobs = plan.starts.size();
    const std::size_t workers = std::min<std::size_t>(threads, jobs ? jobs : 1);
    parallel_for(workers, threads, [&](std::size_t w) {
      auto& ws = workspaces[w];
      std::vector<double> window_buf(plan.window);
      std::vector<float> input(static_cast<std::size_t>(native) * 2);
      const std::size_t lo = jobs * w / workers;
      const std::size_t hi = jobs * (w + 1) / workers;
      for (std::size_t j = lo; j < hi; ++j) {
        const std::size_t start = plan.starts[j];
        std::copy(series.begin() + start, series.begin() + start + plan.window,
                  window_buf.begin());
        const auto resampled = features::linear_resample(
            window_buf, static_cast<std::size_t>(native));
        const auto channels =
            features::assemble_channels(resampled, plan.var_window);
        for (int t = 0; t < native; ++t) {
          input[2 * t] = static_cast<float>(channels.raw[t]);
          input[2 * t + 1] = static_cast<float>(channels.rollvar[t]);
        }
        const auto probs = nn::forward(net, input.data(), ws);
        mt.end_index[j] = static_cast<double>(start + plan.window - 1);
        mt.p_flicker[j] = probs[1];
      }
    });
  }

  // Common grid: union of member end indices.
  std::vector<double> grid;
  for (const auto& mt : trace.per_member)
    grid.insert(grid.end(), mt.end_index.begin(), mt.end_index.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  trace.times = grid;
  trace.p_flicker.resize(grid.size());
  trace.per_member_grid.assign(trace.per_member.size(),
                               std::vector<double>(grid.size()));
  for (std::size_t m = 0; m < trace.per_member.size(); ++m)
    for (std::size_t i = 0; i < grid.size(); ++i)
      trace.per_member_grid[m][i] = interp_trace(trace.per_member[m], grid[i]);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double acc = 0;
    for (std::size_t m = 0; m < trace.per_member.size(); ++m)
      acc += trace.per_member_grid[m][i];
    trace.p_flicker[i] = acc / static_cast<double>(trace.per_member.size());
  }
  return trace;
}

double dl_score(const std::vector<double>& p_flicker) {
  if (p_flicker.empty()) throw DataError("dl_score: empty trace");
  double maxv = p_flicker.front();
  double sum = 0;
  for (double v : p_flicker) {
    maxv = std::max(maxv, v);
    sum += v;
  }
  return maxv - sum / static_cast<double>(p_flicker.size());
}

double dl_score(const ProbabilityTrace& trace) { return dl_score(trace.p_flicker); }

double conservative_score(const std::vector<MemberTrace>& members) {
  if (members.empty()) throw DataError("conservative_score: no member traces");
  double best = dl_score(members.front().p_flicker);
  for (std::size_t m = 1; m < members.size(); ++m)
    best = std::min(best, dl_score(members[m].p_flicker));
  return best;
}

double variance_score(const std::vector<double>& series, std::size_t window) {
  if (series.size() < window)
    throw DataError("variance_score: series shorter than the variance window");
  const auto rollvar = features::rolling_variance(series, window);
  // Only the non-back-filled part carries information.
  const std::size_t first = window - 1;
  const std::size_t count = rollvar.size() - first;
  double maxv = 0, sum = 0;
  for (std::size_t i = first; i < rollvar.size(); ++i) {
    maxv = std::max(maxv, rollvar[i]);
    sum += rollvar[i];
  }
  if (maxv <= 0) return 0.0;  // constant series carries no warning
  const double mean = sum / static_cast<double>(count);
  double m2 = 0;
  for (std::size_t i = first; i < rollvar.size(); ++i) {
    const double d = rollvar[i] - mean;
    m2 += d * d;
  }
  const double stddev = std::sqrt(m2 / static_cast<double>(count));
  return maxv / (mean + stddev);
}

void write_trace_csv(const ProbabilityTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "index,p_flicker,p_nonflicker";
  for (std::size_t m = 0; m < trace.per_member_grid.size(); ++m)
    out << ",member_" << (m + 1);
  out << "\n";
  char buf[48];
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", trace.times[i]);
    out << buf;
    std::snprintf(buf, sizeof buf, ",%.17g", trace.p_flicker[i]);
    out << buf;
    std::snprintf(buf, sizeof buf, ",%.17g", 1.0 - trace.p_flicker[i]);
    out << buf;
    for (const auto& member : trace.per_member_grid) {
      std::snprintf(buf, sizeof buf, ",%.17g", member[i]);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace flicker::detector
