#pragma once

#include <cstddef>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace gml {

// Caps the worker pool for the rest of the process. 0 restores the default.
void set_max_threads(int threads);
int max_threads();

// Runs body(i) for i in [0, n). Bodies must write only to slots owned by i;
// under that contract results are independent of the worker count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  if (n == 0) return;
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t i = r.begin(); i != r.end(); ++i) body(i);
                    });
}

}  // namespace gml
