#pragma once

#include <cstddef>
#include <functional>

namespace syncdmpc {

/// Worker count: SYNC_DMPC_THREADS if set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
unsigned thread_count();

/// Runs fn(0..n-1) on up to thread_count() threads. Results must be written
/// to per-index slots; the first exception by index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace syncdmpc
