#pragma once

#include <cstddef>
#include <functional>

namespace sph {

// Global worker cap. 0 = hardware concurrency. Set once at startup (CLI flag
// or SPH_THREADS); reads are not synchronized against concurrent writes.
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [0, n). Work items must be independent; results must be
// written to per-index slots so the outcome is identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace sph
