#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

namespace g2s {

/// Outcome of one parallel_map item: a value or the exception it threw.
template <typename T>
struct Outcome {
    std::optional<T> value;
    std::exception_ptr error;

    bool ok() const { return value.has_value(); }
};

/// Applies `fn(index)` to 0..count-1 on up to `workers` threads. Results are in
/// index order regardless of completion order; exceptions are captured per item.
template <typename F>
auto parallel_map(std::size_t count, int workers, F&& fn) -> std::vector<Outcome<decltype(fn(std::size_t{}))>> {
    using T = decltype(fn(std::size_t{}));
    std::vector<Outcome<T>> out(count);
    auto run_one = [&](std::size_t i) {
        try {
            out[i].value.emplace(fn(i));
        } catch (...) {
            out[i].error = std::current_exception();
        }
    };
    const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) run_one(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) run_one(i);
        });
    pool.clear();
    return out;
}

}  // namespace g2s
