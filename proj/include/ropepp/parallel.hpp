#pragma once

#include <cstddef>
#include <functional>

namespace ropepp {

// Thread budget: ROPEPP_THREADS caps it, hardware concurrency is the default.
int max_threads();

// Runs fn(i) for i in [0, n). Work is split into contiguous blocks; each
// index is processed exactly once by one thread, so writes to disjoint
// per-index slots need no synchronization.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

} // namespace ropepp
