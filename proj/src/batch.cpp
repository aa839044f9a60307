#include <glevy/batch.hpp>

#include <algorithm>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace glevy {

int effective_threads() {
#ifdef _OPENMP
  int n = omp_get_max_threads();
#else
  int n = 1;
#endif
  if (const char* env = std::getenv("GLEVY_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) n = std::min(n, cap);
    } catch (...) {
      // ignore malformed values
    }
  }
  return std::max(1, n);
}

void parallel_for(std::size_t n, Exec exec, const std::function<void(std::size_t)>& body) {
  if (exec == Exec::serial || effective_threads() == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
#ifdef _OPENMP
  const int threads = effective_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    body(static_cast<std::size_t>(i));
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

void parallel_for_chunks(std::size_t n, Exec exec,
                         const std::function<void(std::size_t, std::size_t)>& body) {
  const int threads = exec == Exec::serial ? 1 : effective_threads();
  if (threads == 1 || n < 2) {
    body(0, n);
    return;
  }
  const std::size_t n_chunks = std::min<std::size_t>(n, 4u * threads);
  const std::size_t chunk = (n + n_chunks - 1) / n_chunks;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#endif
  for (long long c = 0; c < static_cast<long long>(n_chunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo < hi) body(lo, hi);
  }
}

}  // namespace glevy
