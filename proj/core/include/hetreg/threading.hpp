#pragma once

#include <cstddef>
#include <functional>

namespace hetreg {

/// Worker count for a parallel region: `requested` if nonzero, otherwise the
/// hardware concurrency, always capped by the HETREG_THREADS environment
/// variable when set.
std::size_t worker_count(std::size_t requested = 0);

/// Runs fn(begin, end) over contiguous chunks of [0, n) on `threads` workers.
/// Chunking is deterministic; callers must write disjoint outputs.
void parallel_chunks(std::size_t n, std::size_t threads,
                     const std::function<void(std::size_t, std::size_t)> &fn);

} // namespace hetreg
