#pragma once

#include <cstdint>
#include <functional>

namespace auda {

// Global kernel thread count. 1 = strictly sequential (deterministic mode).
// Kernels only ever parallelize over disjoint output ranges with fixed
// per-element accumulation order, so results are bit-identical at any
// thread count; deterministic mode still forces 1.
void set_num_threads(int n);
int num_threads();

// Splits [0, n) into contiguous ranges, one per worker. fn(begin, end) must
// only write to state owned by its range.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace auda
