#pragma once

#include <cstddef>
#include <functional>

namespace dustat {

/// Worker count: explicit request if positive, else the THREADS environment
/// variable, else the hardware concurrency.
int resolve_threads(int requested);

// Runs body(i) for i in [0, count) on up to `threads` workers. Work items are
// independent and write to their own slots, so results never depend on the
// thread count. The first exception thrown by any item is rethrown.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace dustat
