#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

// Deterministic index-space parallel_for. Workers pull indices from a shared
// counter and write results by index, so outputs never depend on the thread
// count; callers own any ordered reduction.

namespace hfl {

inline int default_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : int(n);
}

template <class Fn>
void parallel_for(size_t count, int n_threads, Fn&& fn) {
    if (count == 0) return;
    if (n_threads <= 1 || count == 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    size_t workers = std::min<size_t>(size_t(n_threads), count);
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace hfl
