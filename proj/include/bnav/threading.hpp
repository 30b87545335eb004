#pragma once

#include <cstdint>
#include <exception>
#include <functional>

namespace bnav {

// Runtime switch between the OpenMP path and the serial reference path.
// Both paths write disjoint output slots indexed by item, so they produce
// bit-identical results; tests assert this.
namespace threading {

bool parallel_enabled();
void set_parallel(bool on);
int worker_count();

}  // namespace threading

// Runs f(i) for i in [0, n). Exceptions thrown by items are captured and
// the first one (lowest index) is rethrown after the loop joins.
void parallel_for(int64_t n, const std::function<void(int64_t)>& f);

}  // namespace bnav
