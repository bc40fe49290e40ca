#pragma once

#include <cstddef>
#include <functional>

namespace canonmap {

// Runs body(i) for i in [0, n) on up to `workers` threads. Indices are
// handed out in contiguous blocks; body must only write to slots owned by i.
// workers <= 1 runs inline.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

int default_workers();

}  // namespace canonmap
