#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace reclab {

// Deterministic parallel reductions.
//
// Work is split into fixed-size blocks that do not depend on the number of
// threads; each block is accumulated serially and the per-block results are
// folded pairwise in index order. The outcome is bit-identical for any
// OMP_NUM_THREADS, and the pairwise fold bounds float drift on long sums.

inline double pairwise_fold(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  std::size_t m = v.size();
  while (m > 1) {
    const std::size_t half = m / 2;
    for (std::size_t i = 0; i < half; ++i) v[i] = v[2 * i] + v[2 * i + 1];
    if (m % 2 == 1) {
      v[half] = v[m - 1];
      m = half + 1;
    } else {
      m = half;
    }
  }
  return v[0];
}

// Sum of term(i) for i in [0, n), deterministic under any thread count.
template <class F>
double block_sum(std::size_t n, F&& term, std::size_t block = 1024) {
  if (n == 0) return 0.0;
  const std::size_t nblocks = (n + block - 1) / block;
  std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nblocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * block;
    const std::size_t hi = std::min(n, lo + block);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[static_cast<std::size_t>(b)] = s;
  }
  return pairwise_fold(partial);
}

// Accumulates dense vectors of length dim: emit(i, acc) adds item i's
// contribution into acc. Per-block partials are folded pairwise in index
// order, element-wise.
template <class F>
std::vector<double> block_accumulate(std::size_t n, std::size_t dim, F&& emit,
                                     std::size_t block = 1024) {
  std::vector<double> out(dim, 0.0);
  if (n == 0) return out;
  const std::size_t nblocks = (n + block - 1) / block;
  std::vector<std::vector<double>> partial(nblocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nblocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * block;
    const std::size_t hi = std::min(n, lo + block);
    std::vector<double> acc(dim, 0.0);
    for (std::size_t i = lo; i < hi; ++i) emit(i, acc.data());
    partial[static_cast<std::size_t>(b)] = std::move(acc);
  }
  std::size_t m = nblocks;
  while (m > 1) {
    const std::size_t half = m / 2;
    for (std::size_t i = 0; i < half; ++i) {
      auto& dst = partial[i];
      const auto& a = partial[2 * i];
      const auto& bvec = partial[2 * i + 1];
      std::vector<double> merged(dim);
      for (std::size_t j = 0; j < dim; ++j) merged[j] = a[j] + bvec[j];
      dst = std::move(merged);
    }
    if (m % 2 == 1) {
      partial[half] = std::move(partial[m - 1]);
      m = half + 1;
    } else {
      m = half;
    }
  }
  return partial[0];
}

}  // namespace reclab
