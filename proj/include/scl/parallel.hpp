#pragma once

// Deterministic fork-join over index ranges, capped by SCL_THREADS.

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace scl {

inline unsigned thread_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SCL_THREADS")) {
        try {
            long v = std::stol(env);
            if (v >= 1) return static_cast<unsigned>(std::min<long>(v, 256));
        } catch (...) {
        }
    }
    return hw;
}

// Runs fn(i) for i in [0, n). Each index is owned by exactly one worker, so
// results written per index do not depend on the thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned t = std::min<std::size_t>(thread_count(), std::max<std::size_t>(1, n / 64));
    if (t <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < t; ++w)
        workers.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += t) fn(i);
        });
    for (auto& th : workers) th.join();
}

} // namespace scl
