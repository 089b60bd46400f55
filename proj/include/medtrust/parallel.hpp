#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace medtrust {

/// Apply `fn` to indices [0, count) on up to `parallelism` worker threads.
/// Results land at their input index, so output order never depends on
/// scheduling. `fn` must not throw; callers wrap exceptions into the result.
template <typename Result>
std::vector<Result> parallel_map(size_t count, size_t parallelism,
                                 const std::function<Result(size_t)>& fn) {
    std::vector<Result> results(count);
    if (count == 0) return results;

    parallelism = std::max<size_t>(1, std::min(parallelism, count));
    if (parallelism == 1) {
        for (size_t i = 0; i < count; ++i) results[i] = fn(i);
        return results;
    }

    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(parallelism);
    for (size_t w = 0; w < parallelism; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= count) return;
                results[i] = fn(i);
            }
        });
    }
    for (auto& worker : workers) worker.join();
    return results;
}

}  // namespace medtrust
