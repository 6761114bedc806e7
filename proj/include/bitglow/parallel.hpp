#pragma once

#include <cstddef>
#include <functional>

namespace bitglow {

// Worker cap: BITGLOW_THREADS when set, hardware concurrency otherwise.
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Result slots must be disjoint per index; the
// work itself must be read-only on shared state. Falls back to a serial loop
// for small n or a cap of 1.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace bitglow
