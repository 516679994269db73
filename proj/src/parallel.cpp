#include "lbk/parallel.hpp"

#include <algorithm>
#include <atomic>

namespace lbk {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) { g_threads = std::max(1, n); }

int thread_count() { return g_threads; }

std::vector<std::size_t> even_bounds(std::size_t count, int chunks)
{
    const std::size_t c = std::max<std::size_t>(1, std::min<std::size_t>(chunks, std::max<std::size_t>(count, 1)));
    std::vector<std::size_t> b(c + 1);
    for (std::size_t k = 0; k <= c; ++k) b[k] = count * k / c;
    return b;
}

std::vector<std::size_t> pair_row_bounds(std::size_t n, int chunks)
{
    const std::size_t c = std::max<std::size_t>(1, std::min<std::size_t>(chunks, std::max<std::size_t>(n, 1)));
    std::vector<std::size_t> b{0};
    const double total = 0.5 * double(n) * double(n > 0 ? n - 1 : 0);
    double acc = 0;
    std::size_t next = 1;
    for (std::size_t i = 0; i < n && next < c; ++i) {
        acc += double(n - 1 - i);
        if (acc >= total * double(next) / double(c)) {
            b.push_back(i + 1);
            ++next;
        }
    }
    while (b.size() < c + 1) b.push_back(n);
    b.back() = n;
    return b;
}

}
