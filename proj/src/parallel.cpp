#include "natt/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace natt {

int max_threads() {
#ifdef _OPENMP
  int n = omp_get_max_threads();
#else
  int n = 1;
#endif
  if (const char* env = std::getenv("NEURO_ATTITUDE_THREADS")) {
    try {
      int cap = std::stoi(env);
      if (cap >= 1) n = std::min(n, cap);
    } catch (...) {
      // Malformed value: ignore and keep the OpenMP default.
    }
  }
  return std::max(n, 1);
}

namespace detail {
int thread_count_for(std::size_t n) {
  return static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(max_threads()),
                            std::max<std::size_t>(n, 1)));
}
}  // namespace detail

}  // namespace natt
