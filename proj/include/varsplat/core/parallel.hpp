#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace varsplat {

inline int default_thread_count() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// Runs fn(shard) for shard in [0, num_shards). Work is split by shard index,
// never by thread, so any per-shard accumulation is identical for every
// thread count.
inline void parallel_for_shards(int num_shards, int num_threads,
                                const std::function<void(int)>& fn) {
    if (num_threads <= 1 || num_shards <= 1) {
        for (int s = 0; s < num_shards; ++s) fn(s);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        while (true) {
            const int s = next.fetch_add(1);
            if (s >= num_shards) break;
            fn(s);
        }
    };
    std::vector<std::thread> threads;
    const int n = std::min(num_threads, num_shards);
    threads.reserve(n - 1);
    for (int i = 1; i < n; ++i) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
}

}  // namespace varsplat
