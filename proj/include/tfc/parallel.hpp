#pragma once

#include <cstddef>
#include <functional>

namespace tfc {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is handled
// exactly once, so results never depend on the worker count as long as fn only
// writes to slots owned by i. The first exception thrown is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

// Hardware concurrency, at least 1.
std::size_t default_threads();

}  // namespace tfc
