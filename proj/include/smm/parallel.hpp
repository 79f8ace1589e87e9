#pragma once

#include <cstddef>
#include <functional>

namespace smm {

/// Worker cap from SMM_THREADS (0 or unset = hardware concurrency).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n). Work is split statically, so callers that
/// write results by index get a deterministic outcome for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace smm
