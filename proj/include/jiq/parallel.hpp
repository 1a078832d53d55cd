#pragma once

#include <cstddef>
#include <functional>

namespace jiq {

/// Worker cap from JOINTIQ_THREADS (positive integer), else the hardware
/// concurrency. Always at least 1.
int worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Callers write
/// results into slot i, so output order never depends on scheduling. The first
/// exception (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace jiq
