#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace singflow {

// Thread count: SINGFLOW_THREADS caps hardware concurrency; 1 disables
// threading entirely.
inline int thread_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("SINGFLOW_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1 && cap < n) n = cap;
    }
    return n;
}

// Runs body(i) for i in [0, n). Results must be written to index-addressed
// storage by the body so the outcome is deterministic regardless of the
// thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const int workers = thread_count();
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int used = static_cast<int>(std::min<std::size_t>(workers, n));
    pool.reserve(used);
    for (int w = 0; w < used; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace singflow
