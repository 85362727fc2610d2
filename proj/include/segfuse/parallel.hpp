#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "segfuse/core.hpp"

namespace segfuse {

struct TaskFailure {
    size_t index;
    std::string message;
};

/// Run fn(index) for every index in [0, count) on a pool of workers pulling
/// from a shared atomic counter. A throwing task is recorded and the run
/// continues; failures come back ordered by index, so reports do not depend
/// on scheduling. fn must not touch shared mutable state.
template <class Fn>
std::vector<TaskFailure> run_parallel(size_t count, int workers, Fn&& fn) {
    detail::require(workers >= 1, "worker count must be >= 1");
    std::vector<TaskFailure> failures;
    std::mutex failures_mutex;

    auto run_one = [&](size_t i) {
        try {
            fn(i);
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(failures_mutex);
            failures.push_back({i, e.what()});
        } catch (...) {
            std::lock_guard<std::mutex> lock(failures_mutex);
            failures.push_back({i, "unknown error"});
        }
    };

    if (workers == 1 || count <= 1) {
        for (size_t i = 0; i < count; ++i)
            run_one(i);
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&]() {
            while (true) {
                const size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= count)
                    return;
                run_one(i);
            }
        };
        const size_t n_threads = std::min<size_t>(static_cast<size_t>(workers), count);
        std::vector<std::thread> threads;
        threads.reserve(n_threads);
        for (size_t t = 0; t < n_threads; ++t)
            threads.emplace_back(worker);
        for (std::thread& t : threads)
            t.join();
    }

    std::sort(failures.begin(), failures.end(),
              [](const TaskFailure& a, const TaskFailure& b) { return a.index < b.index; });
    return failures;
}

} // namespace segfuse
