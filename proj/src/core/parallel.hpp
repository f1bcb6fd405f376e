#pragma once

#include <functional>

namespace omniact {

/// Worker count derived from OMNI_THREADS (0 or unset = hardware concurrency).
int thread_budget();

/// Runs fn over contiguous chunks of [0, n). Chunks are disjoint, so callers
/// that only write their own range stay deterministic regardless of schedule.
void parallel_chunks(int n, const std::function<void(int begin, int end)>& fn);

}  // namespace omniact
