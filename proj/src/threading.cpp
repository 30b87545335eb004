#include "bnav/threading.hpp"

#include <omp.h>

#include <atomic>
#include <vector>

namespace bnav {

namespace {
bool g_parallel = true;
}

namespace threading {

bool parallel_enabled() { return g_parallel; }
void set_parallel(bool on) { g_parallel = on; }

int worker_count() {
  return g_parallel ? omp_get_max_threads() : 1;
}

}  // namespace threading

void parallel_for(int64_t n, const std::function<void(int64_t)>& f) {
  if (n <= 0) return;
  if (!g_parallel || n == 1) {
    for (int64_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
  std::atomic<bool> failed{false};
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < n; ++i) {
    try {
      f(i);
    } catch (...) {
      errors[static_cast<size_t>(i)] = std::current_exception();
      failed.store(true, std::memory_order_relaxed);
    }
  }
  if (failed.load()) {
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
}

}  // namespace bnav
