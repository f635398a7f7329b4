#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "flicker/nn/checkpoint.hpp"

namespace flicker::detector {

/// Window fractions of the published six-model ensemble.
inline constexpr std::array<double, 6> kDefaultFractions = {0.08, 0.096, 0.11,
                                                            0.13, 0.14, 0.16};

struct EnsembleMember {
  nn::Checkpoint checkpoint;
  double window_fraction = 0.16;
};

struct EnsembleSpec {
  std::vector<EnsembleMember> members;  // paired with their fractions
  double stride_fraction = 0.1;         // stride as a fraction of the window
  int threads = 0;
};

/// One model's sliding-window outputs, aligned to window-end sample indices.
struct MemberTrace {
  std::vector<double> end_index;
  std::vector<double> p_flicker;
};

/// Ensemble trace on the union grid of member window-end indices. Members
/// are linearly interpolated onto the grid (constant beyond their ends) and
/// averaged pointwise.
struct ProbabilityTrace {
  std::vector<double> times;
  std::vector<double> p_flicker;
  std::vector<MemberTrace> per_member;                // raw member traces
  std::vector<std::vector<double>> per_member_grid;   // interpolated, for export
};

/// Slide each member's window (floor(fraction*N) samples) over the series,
/// resample every window to the member's native input length, rebuild the
/// two channels (variance window = round(1000*native/window), capped at
/// native/5) and run inference. Throws DataError when the series is shorter
/// than a member's window or a window is too short to resample.
ProbabilityTrace scan_series(const std::vector<double>& series,
                             const EnsembleSpec& spec);

/// s_DL = max_w p_f(w) - mean_w p_f(w).
double dl_score(const std::vector<double>& p_flicker);
double dl_score(const ProbabilityTrace& trace);

/// Conservative ensemble score: min over members of their dl_score.
double conservative_score(const std::vector<MemberTrace>& members);

/// s_var = max V / (mean V + std V) over the trailing rolling variance of
/// the raw series (non-back-filled part only); 0 for a constant series.
double variance_score(const std::vector<double>& series,
                      std::size_t window = 1000);

/// CSV export: `index,p_flicker,p_nonflicker[,member_1..,member_k]`.
void write_trace_csv(const ProbabilityTrace& trace, const std::string& path);

}  // namespace flicker::detector
