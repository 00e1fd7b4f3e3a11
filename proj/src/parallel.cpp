#include "pcm/parallel.hpp"

#include <atomic>

namespace pcm {
namespace {
std::atomic<std::size_t> g_threads{1};
}

void set_default_threads(std::size_t threads) {
    g_threads.store(threads == 0 ? std::max<std::size_t>(1, std::thread::hardware_concurrency())
                                 : threads);
}

std::size_t default_threads() { return g_threads.load(); }

}  // namespace pcm
