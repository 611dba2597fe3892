#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace isoscatter {

// Worker count resolution: explicit request wins, then the ISOSCATTER_THREADS
// environment variable, then 1.
inline int resolve_workers(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("ISOSCATTER_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

inline constexpr std::uint64_t kEnsembleChunk = 4096;

// Deterministic chunked ensemble execution. The index range [0, count) is cut
// into fixed-size chunks; workers grab whole chunks, and the per-chunk states
// come back in chunk order. Reducing the returned states sequentially gives a
// result that does not depend on the worker count, only on (count, chunk_size)
// and the per-index work itself.
template <class State, class MakeState, class Body>
std::vector<State> run_chunked(std::uint64_t count, int workers, MakeState make_state,
                               Body body, std::uint64_t chunk_size = kEnsembleChunk) {
    const std::uint64_t n_chunks = count == 0 ? 0 : (count + chunk_size - 1) / chunk_size;
    std::vector<State> states;
    states.reserve(n_chunks);
    for (std::uint64_t c = 0; c < n_chunks; ++c) states.push_back(make_state());

    auto work_chunk = [&](std::uint64_t c) {
        const std::uint64_t begin = c * chunk_size;
        const std::uint64_t end = std::min(count, begin + chunk_size);
        for (std::uint64_t i = begin; i < end; ++i) body(states[c], i);
    };

    const int n_workers = static_cast<int>(
        std::min<std::uint64_t>(static_cast<std::uint64_t>(std::max(workers, 1)),
                                std::max<std::uint64_t>(n_chunks, 1)));
    if (n_workers <= 1) {
        for (std::uint64_t c = 0; c < n_chunks; ++c) work_chunk(c);
        return states;
    }

    std::atomic<std::uint64_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::uint64_t c = next.fetch_add(1);
                if (c >= n_chunks) break;
                try {
                    work_chunk(c);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    break;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return states;
}

// Fills out[i] = value computed for index i, chunked as above. The output is
// identical for any worker count.
template <class T, class Fn>
void parallel_fill(std::vector<T>& out, int workers, Fn fn,
                   std::uint64_t chunk_size = kEnsembleChunk) {
    struct Nothing {};
    run_chunked<Nothing>(
        out.size(), workers, [] { return Nothing{}; },
        [&](Nothing&, std::uint64_t i) { out[i] = fn(i); }, chunk_size);
}

}  // namespace isoscatter
