#pragma once

#include <cstddef>

namespace flicker::nn {

/// Dot product with eight independent 64-bit accumulators. The parallel
/// chains keep the reduction vectorizable without reassociation flags and the
/// summation order fixed, so results are identical run to run.
template <typename T>
inline double dot_acc(const T* a, const T* b, std::size_t n) {
  double acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
  double acc4 = 0, acc5 = 0, acc6 = 0, acc7 = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 += static_cast<double>(a[i + 0]) * static_cast<double>(b[i + 0]);
    acc1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
    acc2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
    acc3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
    acc4 += static_cast<double>(a[i + 4]) * static_cast<double>(b[i + 4]);
    acc5 += static_cast<double>(a[i + 5]) * static_cast<double>(b[i + 5]);
    acc6 += static_cast<double>(a[i + 6]) * static_cast<double>(b[i + 6]);
    acc7 += static_cast<double>(a[i + 7]) * static_cast<double>(b[i + 7]);
  }
  double sum = ((acc0 + acc1) + (acc2 + acc3)) + ((acc4 + acc5) + (acc6 + acc7));
  for (; i < n; ++i)
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return sum;
}

/// y += alpha * x
template <typename T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace flicker::nn
