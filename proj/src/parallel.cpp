#include "gml/parallel.hpp"

#include <memory>
#include <mutex>

#include <tbb/global_control.h>
#include <tbb/info.h>

namespace gml {

namespace {
std::mutex control_mutex;
std::unique_ptr<tbb::global_control> control;
int cap = 0;
}  // namespace

void set_max_threads(int threads) {
  std::lock_guard lock(control_mutex);
  control.reset();
  cap = threads > 0 ? threads : 0;
  if (cap > 0) {
    control = std::make_unique<tbb::global_control>(
        tbb::global_control::max_allowed_parallelism, static_cast<std::size_t>(cap));
  }
}

int max_threads() {
  return static_cast<int>(
      tbb::global_control::active_value(tbb::global_control::max_allowed_parallelism));
}

}  // namespace gml
