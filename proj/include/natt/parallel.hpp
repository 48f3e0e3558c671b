#pragma once

#include <cstddef>

namespace natt {

// Number of worker threads used by the batch-level loops. Resolves to
// min(OpenMP default, NEURO_ATTITUDE_THREADS) when the env var is set,
// and to 1 in builds without OpenMP.
int max_threads();

namespace detail {
int thread_count_for(std::size_t n);
}

// Runs fn(i) for i in [0, n). Iterations must be independent; results that
// feed a reduction must be written to per-index slots and combined in index
// order by the caller so that serial and parallel runs stay bit-identical.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const int threads = detail::thread_count_for(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    fn(static_cast<std::size_t>(i));
  }
#else
  (void)threads;
  for (std::size_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace natt
