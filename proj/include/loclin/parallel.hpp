#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <stdexcept>
#include <thread>
#include <vector>

namespace loclin {

namespace detail {

inline std::atomic<unsigned>& thread_count_slot() {
    static std::atomic<unsigned> count{1};
    return count;
}

// set while executing inside a worker so nested loops stay serial
inline bool& in_worker_flag() {
    thread_local bool flag = false;
    return flag;
}

}  // namespace detail

/// Worker threads used by parallel_for. 0 selects the hardware count.
/// Thread count never changes computed bytes, only wall time.
inline void set_thread_count(unsigned n) {
    if (n == 0) {
        n = std::thread::hardware_concurrency();
        if (n == 0) n = 1;
    }
    detail::thread_count_slot().store(n, std::memory_order_relaxed);
}

inline unsigned thread_count() { return detail::thread_count_slot().load(std::memory_order_relaxed); }

/// Runs f(i) for i in [begin, end) across worker threads in contiguous
/// blocks. Callers write results into per-index slots and reduce
/// sequentially afterwards; the function itself imposes no ordering.
/// Exceptions are rethrown from the lowest-index failing block. Nested
/// calls from inside a worker run serially.
template <class F>
void parallel_for(std::size_t begin, std::size_t end, F&& f) {
    if (begin >= end) return;
    const std::size_t total = end - begin;
    const unsigned requested = thread_count();
    const std::size_t workers =
        std::min<std::size_t>(requested, total);

    if (workers <= 1 || detail::in_worker_flag()) {
        for (std::size_t i = begin; i < end; ++i) f(i);
        return;
    }

    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (total + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi, w] {
            detail::in_worker_flag() = true;
            try {
                for (std::size_t i = lo; i < hi; ++i) f(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace loclin
