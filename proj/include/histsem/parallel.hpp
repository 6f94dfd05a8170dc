#ifndef HISTSEM_PARALLEL_HPP_
#define HISTSEM_PARALLEL_HPP_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace histsem {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is split into
// contiguous chunks; the first exception thrown (lowest chunk) is rethrown.
// Results must not depend on scheduling: callers write to index-addressed
// slots only.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  const std::size_t chunk = (n + jobs - 1) / jobs;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace histsem

#endif  // HISTSEM_PARALLEL_HPP_
