#pragma once

#include <cstddef>
#include <vector>

namespace flicker::features {

/// Two z-scored input channels of equal length: the raw signal and its
/// rolling variance. A constant channel z-scores to all zeros.
struct ChannelPair {
  std::vector<double> raw;
  std::vector<double> rollvar;

  std::size_t length() const { return raw.size(); }
};

/// Trailing-window population variance. Output index i (i >= window-1)
/// covers x[i-window+1 .. i]; earlier indices are back-filled with the first
/// computed value so the output has the input's length. Sliding Welford
/// update with a periodic exact two-pass refresh.
std::vector<double> rolling_variance(const std::vector<double>& x,
                                     std::size_t window);

/// (x - mean) / population_std; all zeros when the std is below 1e-12.
std::vector<double> zscore(const std::vector<double>& x);

/// Piecewise-linear interpolant of x sampled at target_len equally spaced
/// points, both endpoints preserved exactly.
std::vector<double> linear_resample(const std::vector<double>& x,
                                    std::size_t target_len);

/// channel 1 = zscore(x), channel 2 = zscore(rolling_variance(x, var_window)).
ChannelPair assemble_channels(const std::vector<double>& x,
                              std::size_t var_window);

}  // namespace flicker::features
