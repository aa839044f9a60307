#pragma once

// Execution policy for path batches and domain sweeps. Exec::serial is the
// reference implementation; Exec::parallel runs the same per-item work under
// OpenMP. Items write to disjoint slots and all reductions happen afterwards
// in index order, so both policies produce identical bytes for any thread
// count. GLEVY_THREADS caps the OpenMP team size.

#include <cstddef>
#include <functional>

namespace glevy {

enum class Exec { serial, parallel };

/// Effective thread count for Exec::parallel (>= 1).
int effective_threads();

void parallel_for(std::size_t n, Exec exec, const std::function<void(std::size_t)>& body);

/// Chunked variant for cheap per-item work.
void parallel_for_chunks(std::size_t n, Exec exec,
                         const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace glevy
