#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace knotmatch {

// Independent child seed for stream k of a seed (splitmix64 finalizer).
inline std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t k) {
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  };
  return mix(seed ^ mix(k));
}

// KNOTMATCH_THREADS overrides the hardware concurrency.
inline std::size_t defaultThreadCount() {
  if (const char* env = std::getenv("KNOTMATCH_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs fn(task) for task in [0, numTasks) on up to numThreads threads. Tasks
// are independent; the first exception thrown is rethrown on the caller.
template <class Fn>
void parallelFor(std::size_t numTasks, std::size_t numThreads, Fn&& fn) {
  numThreads = std::clamp<std::size_t>(numThreads, 1, std::max<std::size_t>(1, numTasks));
  if (numThreads == 1) {
    for (std::size_t t = 0; t < numTasks; ++t) fn(t);
    return;
  }
  std::exception_ptr failure;
  std::mutex failureMutex;
  std::vector<std::thread> workers;
  workers.reserve(numThreads);
  for (std::size_t w = 0; w < numThreads; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t t = w; t < numTasks; t += numThreads) fn(t);
      } catch (...) {
        std::lock_guard lock(failureMutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : workers) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace knotmatch
