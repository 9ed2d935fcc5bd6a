#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace kpo {

/// Evaluates fn(0..count-1) on up to `threads` workers. Results are stored by
/// index, so the output does not depend on scheduling. The first exception
/// thrown by any call is rethrown after all workers finish.
template <class Result, class Fn>
std::vector<Result> run_ensemble(int count, int threads, Fn&& fn) {
    std::vector<std::optional<Result>> slots(static_cast<std::size_t>(std::max(count, 0)));
    const int workers = count > 0 ? std::clamp(threads, 1, count) : 0;
    if (workers == 1) {
        for (int i = 0; i < count; ++i) slots[static_cast<std::size_t>(i)].emplace(fn(i));
    } else if (workers > 1) {
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int i = next++; i < count; i = next++) {
                    try {
                        slots[static_cast<std::size_t>(i)].emplace(fn(i));
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    std::vector<Result> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

} // namespace kpo
