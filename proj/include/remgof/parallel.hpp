#pragma once

#include <cstddef>
#include <functional>

namespace remgof {

/// Worker count: REMGOF_THREADS if set (>= 1), else hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n) over up to thread_count() threads. Each index
/// is visited exactly once; callers must write only to index-owned slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace remgof
