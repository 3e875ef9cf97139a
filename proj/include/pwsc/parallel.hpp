#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace pwsc::parallel {

/// Number of workers used for grid sweeps.
inline std::size_t worker_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

inline std::size_t chunk_count(std::size_t n) {
    return std::max<std::size_t>(1, std::min(worker_count(), n / 256 + 1));
}

/// Splits [0, n) into contiguous chunks and runs body(begin, end, chunk) for
/// each one, one chunk per worker. Chunk boundaries depend only on n and the
/// worker count; callers reduce per-chunk results in chunk order so the
/// outcome does not depend on scheduling. The first exception is rethrown.
template <class Body>
void for_chunks(std::size_t n, Body&& body) {
    const std::size_t chunks = chunk_count(n);
    const std::size_t per = (n + chunks - 1) / chunks;
    if (chunks == 1) {
        body(std::size_t{0}, n, std::size_t{0});
        return;
    }
    std::vector<std::exception_ptr> errors(chunks);
    {
        std::vector<std::jthread> workers;
        workers.reserve(chunks);
        for (std::size_t c = 0; c < chunks; ++c) {
            const std::size_t begin = std::min(n, c * per);
            const std::size_t end = std::min(n, begin + per);
            workers.emplace_back([&, begin, end, c] {
                try {
                    body(begin, end, c);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

}

}  // namespace pwsc::parallel
