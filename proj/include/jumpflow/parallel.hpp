#pragma once

#include <cstddef>
#include <functional>

namespace jumpflow {

/// Worker count: explicit request if > 0, else JUMPFLOW_THREADS, else 1.
unsigned resolve_threads(unsigned requested);

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries
/// depend only on n and the worker count; callers write results by index so
/// the outcome is independent of scheduling. Exceptions from workers are
/// rethrown on the calling thread.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace jumpflow
