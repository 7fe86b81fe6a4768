#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace fex {

inline int resolve_jobs(int jobs) {
    if (jobs > 0) return jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

// Runs fn(0..n-1) on up to `jobs` worker threads. Each index owns its own
// output slot, so results do not depend on the schedule.
inline void parallel_for(int jobs, int n, const std::function<void(int)>& fn) {
    jobs = resolve_jobs(jobs);
    if (jobs <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> threads;
    const int nthreads = std::min(jobs, n);
    threads.reserve(std::size_t(nthreads));
    for (int t = 0; t < nthreads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

}  // namespace fex
