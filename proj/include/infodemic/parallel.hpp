#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace infodemic {

/// Process-wide worker count used by the parallel stages (0 = hardware).
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs fn(i) for i in [0, n) on up to thread_count() workers. Work items are
/// handed out dynamically, so fn must not depend on which thread runs it.
/// The first exception thrown by any item is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

} // namespace infodemic
