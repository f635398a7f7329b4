#include "flicker/features.hpp"

#include <algorithm>
#include <cmath>

#include "flicker/errors.hpp"

namespace flicker::features {

namespace {

/// Exact two-pass population mean/M2 of x[first .. first+count).
void two_pass(const std::vector<double>& x, std::size_t first,
              std::size_t count, double& mean, double& m2) {
  double sum = 0;
  for (std::size_t i = 0; i < count; ++i) sum += x[first + i];
  mean = sum / static_cast<double>(count);
  m2 = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = x[first + i] - mean;
    m2 += d * d;
  }
}

}  // namespace

std::vector<double> rolling_variance(const std::vector<double>& x,
                                     std::size_t window) {
  const std::size_t n = x.size();
  if (window < 1) throw DataError("rolling_variance: window must be >= 1");
  if (window > n) throw DataError("rolling_variance: window exceeds series length");

  std::vector<double> out(n);
  const double w = static_cast<double>(window);

  double mean = 0, m2 = 0;
  two_pass(x, 0, window, mean, m2);
  const double first_var = std::max(0.0, m2 / w);
  for (std::size_t i = 0; i < window; ++i) out[i] = first_var;

  std::size_t since_refresh = 0;
  for (std::size_t i = window; i < n; ++i) {
    if (++since_refresh >= window) {
      // Re-anchor the running moments so removal drift cannot accumulate.
      two_pass(x, i - window + 1, window, mean, m2);
      since_refresh = 0;
    } else {
      const double gone = x[i - window];
      double d = gone - mean;
      mean -= d / (w - 1.0);
      m2 -= d * (gone - mean);
      const double fresh = x[i];
      d = fresh - mean;
      mean += d / w;
      m2 += d * (fresh - mean);
    }
    out[i] = std::max(0.0, m2 / w);
  }
  return out;
}

std::vector<double> zscore(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) throw DataError("zscore: need at least 2 samples");
  double sum = 0;
  for (double v : x) sum += v;
  const double mean = sum / static_cast<double>(n);
  double m2 = 0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
  }
  const double std_dev = std::sqrt(m2 / static_cast<double>(n));
  std::vector<double> out(n);
  if (std_dev < 1e-12) return out;  // constant input -> all zeros
  const double inv = 1.0 / std_dev;
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - mean) * inv;
  return out;
}

std::vector<double> linear_resample(const std::vector<double>& x,
                                    std::size_t target_len) {
  const std::size_t n = x.size();
  if (n < 2) throw DataError("linear_resample: need at least 2 samples");
  if (target_len < 2) throw DataError("linear_resample: target length must be >= 2");

  std::vector<double> out(target_len);
  out.front() = x.front();
  out.back() = x.back();
  const double scale =
      static_cast<double>(n - 1) / static_cast<double>(target_len - 1);
  for (std::size_t j = 1; j + 1 < target_len; ++j) {
    const double pos = static_cast<double>(j) * scale;
    std::size_t i = static_cast<std::size_t>(pos);
    if (i >= n - 1) i = n - 2;
    const double frac = pos - static_cast<double>(i);
    out[j] = x[i] + frac * (x[i + 1] - x[i]);
  }
  return out;
}

ChannelPair assemble_channels(const std::vector<double>& x,
                              std::size_t var_window) {
  ChannelPair channels;
  channels.raw = zscore(x);
  channels.rollvar = zscore(rolling_variance(x, var_window));
  return channels;
}

}  // namespace flicker::features
