#pragma once

#include <cstddef>
#include <functional>

namespace nael {

// Upper bound on worker threads used by parallel_for. Zero means
// "hardware concurrency". Results never depend on this value.
void set_max_threads(std::size_t n);
std::size_t max_threads();

// Calls fn(i) for every i in [0, n). Each index is visited exactly once;
// callers must only write state owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Keeps large activation buffers on the heap instead of fresh mmap pages.
// Training allocates and frees tens of megabytes per step and the page
// faults otherwise dominate. No-op outside glibc.
void tune_allocator();

}  // namespace nael
