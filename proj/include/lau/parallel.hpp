#pragma once

#include <cstddef>
#include <functional>

namespace lau {

/// Worker count from LAU_THREADS; 0 or unset means sequential (returns 1).
int thread_count();

/// Runs body(i) for i in [0, count). Work is split into contiguous chunks, one
/// per worker; callers must only write to outputs owned by index i.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace lau
