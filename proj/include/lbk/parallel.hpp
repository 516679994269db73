#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lbk {

// Process-wide worker count used by the pair sums and table builders.
void set_thread_count(int n);
int thread_count();

// Splits [0, count) into `chunks` contiguous ranges of near-equal length.
std::vector<std::size_t> even_bounds(std::size_t count, int chunks);

// Splits the rows of the strict upper triangle of an n x n pair matrix so that
// every chunk holds roughly the same number of pairs.
std::vector<std::size_t> pair_row_bounds(std::size_t n, int chunks);

// Runs body(chunk, begin, end) for every chunk. Chunk boundaries depend only on
// `bounds`, so reductions merged in chunk order are reproducible.
template <class Body>
void run_chunks(const std::vector<std::size_t>& bounds, Body&& body)
{
    const std::size_t chunks = bounds.size() - 1;
    if (chunks == 1) {
        body(std::size_t{0}, bounds[0], bounds[1]);
        return;
    }
    std::vector<std::exception_ptr> errors(chunks);
    {
        std::vector<std::jthread> workers;
        workers.reserve(chunks - 1);
        for (std::size_t c = 1; c < chunks; ++c) {
            workers.emplace_back([&, c] {
                try {
                    body(c, bounds[c], bounds[c + 1]);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        }
        try {
            body(std::size_t{0}, bounds[0], bounds[1]);
        } catch (...) {
            errors[0] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

template <class Body>
void parallel_for(std::size_t count, Body&& body)
{
    run_chunks(even_bounds(count, thread_count()), body);
}

}
